#pragma once

#include <functional>
#include <memory>
#include <string>

#include <Eigen/Core>

namespace geowave::geometry {

constexpr int kMaxAmbientDim = 8;

/// Ambient vector in R^n. Storage is inline (no heap) up to kMaxAmbientDim.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxAmbientDim, 1>;

/// Quintic C^2 ramp: 0 for s <= 0, 1 for s >= 1, zero first and second
/// derivatives at both ends.
double smooth_ramp(double s);
double smooth_ramp_d1(double s);
double smooth_ramp_d2(double s);

/// C^2 plateau in one variable: 1 on |d| <= inner, 0 on |d| >= outer.
struct Plateau {
  double inner;
  double outer;

  double value(double d) const;
  /// Derivatives with respect to d (the plateau is even, so these are odd/even).
  double d1(double d) const;
  double d2(double d) const;
};

enum class ManifoldKind { Circle, Sphere, Custom };

std::string to_string(ManifoldKind kind);

/// An embedded compact manifold M in R^n with its tubular involution and the
/// two ambient extensions of the second fundamental form.
///
/// Checked operations (project_tangent, second_fundamental_form,
/// involution_jacobian) validate their preconditions and throw
/// geowave::Error; the *_unchecked / raw virtuals are what the solvers call in
/// inner loops. Instances are immutable after construction.
class Manifold {
 public:
  virtual ~Manifold() = default;

  int ambient_dim() const { return dim_; }
  double tubular_radius() const { return tubular_radius_; }
  ManifoldKind kind() const { return kind_; }

  /// Euclidean distance from q to M.
  virtual double distance(const Vec& q) const = 0;
  virtual Vec nearest_point(const Vec& q) const = 0;
  /// Orthogonal projection onto T_pM for p on M (no check).
  virtual Vec tangent_part(const Vec& p, const Vec& a) const = 0;
  /// A_p(xi, eta) for p on M and tangent xi, eta (no check).
  virtual Vec sff_unchecked(const Vec& p, const Vec& xi, const Vec& eta) const = 0;

  /// The involution Upsilon, defined on all of R^n.
  virtual Vec involution(const Vec& q) const = 0;
  /// Upsilon'(q) a, defined on all of R^n.
  virtual Vec involution_derivative(const Vec& q, const Vec& a) const = 0;
  /// B_q(a, b) = Upsilon''(q)(a, b).
  virtual Vec involution_hessian(const Vec& q, const Vec& a, const Vec& b) const = 0;
  /// The perpendicular extension: smooth compactly supported symmetric v_ij
  /// with v_ij(p) = A_p(pi_p e_i, pi_p e_j) on M.
  virtual Vec extended_sff_perp(const Vec& q, const Vec& a, const Vec& b) const = 0;

  /// A-extension: 1/2 B_{Upsilon(q)}(Upsilon'(q) a, Upsilon'(q) b).
  virtual Vec extended_sff_A(const Vec& q, const Vec& a, const Vec& b) const;

  double constraint_residual(const Vec& q) const { return distance(q); }

  Vec project_tangent(const Vec& p, const Vec& a) const;
  Vec second_fundamental_form(const Vec& p, const Vec& xi, const Vec& eta) const;
  Vec involution_jacobian(const Vec& q, const Vec& a) const;

  static constexpr double kOnManifoldTol = 1e-8;

 protected:
  Manifold(int dim, double tubular_radius, ManifoldKind kind);

  void require_on_manifold(const Vec& p) const;
  void require_tangent(const Vec& p, const Vec& xi) const;
  void require_dim(const Vec& q) const;

 private:
  int dim_;
  double tubular_radius_;
  ManifoldKind kind_;
};

/// Unit sphere S^{n-1} in R^n (n = 2 is the circle). Closed-form involution
/// Upsilon(q) = (2 - |q|) q / |q| on the shell ||q| - 1| <= tubular_radius,
/// blended to the identity by a C^2 plateau in |q| - 1 that vanishes at
/// blend_outer.
class Sphere final : public Manifold {
 public:
  explicit Sphere(int ambient_dim, double tubular_radius = 0.75, double blend_outer = 0.9);

  double distance(const Vec& q) const override;
  Vec nearest_point(const Vec& q) const override;
  Vec tangent_part(const Vec& p, const Vec& a) const override;
  Vec sff_unchecked(const Vec& p, const Vec& xi, const Vec& eta) const override;
  Vec involution(const Vec& q) const override;
  Vec involution_derivative(const Vec& q, const Vec& a) const override;
  Vec involution_hessian(const Vec& q, const Vec& a, const Vec& b) const override;
  Vec extended_sff_perp(const Vec& q, const Vec& a, const Vec& b) const override;

  const Plateau& blend() const { return blend_; }

 private:
  struct Radial {
    double h, d1, d2;
  };
  // Upsilon(q) = h(|q|) q; returns h and its first two derivatives in |q|.
  Radial radial(double rho) const;

  Plateau blend_;
};

/// User-supplied manifold. Upsilon is the normal reflection q -> 2 pi(q) - q
/// blended to the identity; its derivatives are taken by central differences.
struct ManifoldCallbacks {
  int ambient_dim = 0;
  double tubular_radius = 0.0;
  std::function<Vec(const Vec&)> nearest_point;
  std::function<Vec(const Vec& p, const Vec& a)> tangent_projection;
  std::function<Vec(const Vec& p, const Vec& xi, const Vec& eta)> second_fundamental_form;
};

class CallbackManifold final : public Manifold {
 public:
  explicit CallbackManifold(ManifoldCallbacks callbacks, double jacobian_step = 1e-6,
                            double hessian_step = 1e-4);

  double distance(const Vec& q) const override;
  Vec nearest_point(const Vec& q) const override;
  Vec tangent_part(const Vec& p, const Vec& a) const override;
  Vec sff_unchecked(const Vec& p, const Vec& xi, const Vec& eta) const override;
  Vec involution(const Vec& q) const override;
  Vec involution_derivative(const Vec& q, const Vec& a) const override;
  Vec involution_hessian(const Vec& q, const Vec& a, const Vec& b) const override;
  Vec extended_sff_perp(const Vec& q, const Vec& a, const Vec& b) const override;

 private:
  ManifoldCallbacks cb_;
  Plateau blend_;
  double jacobian_step_;
  double hessian_step_;
};

std::shared_ptr<const Manifold> make_manifold(const std::string& kind);

/// The diffusion vector field Y: R^n -> R^n, vanishing outside the ball of
/// radius cutoff_radius.
class DiffusionField {
 public:
  using Evaluator = std::function<Vec(const Vec&)>;

  DiffusionField(int ambient_dim, Evaluator evaluator, double cutoff_radius,
                 double bound_constant, std::string name);

  Vec operator()(const Vec& q) const;

  int ambient_dim() const { return dim_; }
  double cutoff_radius() const { return cutoff_radius_; }
  double bound_constant() const { return bound_constant_; }
  const std::string& name() const { return name_; }
  bool is_zero() const { return name_ == "zero"; }

  /// Y(q) = chi(|q|) e x q on R^3 (rotation about e), chi = 1 on |q| <= 1.75 and 0 beyond 2.
  static DiffusionField cross_product(const Vec& e);
  /// Y(q) = chi(|q|) J q on R^2 with J the rotation by +90 degrees.
  static DiffusionField planar_rotation();
  static DiffusionField zero(int ambient_dim);
  /// Default field for a manifold kind ("circle" or "sphere").
  static DiffusionField standard_for(const Manifold& manifold);

 private:
  int dim_;
  Evaluator evaluator_;
  double cutoff_radius_;
  double bound_constant_;
  std::string name_;
};

}  // namespace geowave::geometry
