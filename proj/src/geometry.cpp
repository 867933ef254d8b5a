#include "geowave/geometry.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Geometry>

#include "geowave/errors.hpp"

namespace geowave::geometry {

double smooth_ramp(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double smooth_ramp_d1(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double t = s * (1.0 - s);
  return 30.0 * t * t;
}

double smooth_ramp_d2(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
}

double Plateau::value(double d) const {
  return 1.0 - smooth_ramp((std::abs(d) - inner) / (outer - inner));
}

double Plateau::d1(double d) const {
  const double w = outer - inner;
  const double g = -smooth_ramp_d1((std::abs(d) - inner) / w) / w;
  return d < 0.0 ? -g : g;
}

double Plateau::d2(double d) const {
  const double w = outer - inner;
  return -smooth_ramp_d2((std::abs(d) - inner) / w) / (w * w);
}

std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Circle: return "circle";
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::Custom: return "custom";
  }
  return "unknown";
}

Manifold::Manifold(int dim, double tubular_radius, ManifoldKind kind)
    : dim_(dim), tubular_radius_(tubular_radius), kind_(kind) {
  if (dim < 1 || dim > kMaxAmbientDim)
    throw Error(ErrorCode::InvalidArgument, "ambient dimension out of range");
  if (!(tubular_radius > 0.0))
    throw Error(ErrorCode::InvalidArgument, "tubular radius must be positive");
}

void Manifold::require_dim(const Vec& q) const {
  if (q.size() != dim_) {
    std::ostringstream os;
    os << "expected ambient dimension " << dim_ << ", got " << q.size();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

void Manifold::require_on_manifold(const Vec& p) const {
  require_dim(p);
  const double r = distance(p);
  if (!(r < kOnManifoldTol)) {
    std::ostringstream os;
    os << "constraint residual " << r;
    throw Error(ErrorCode::PointOffManifold, os.str());
  }
}

void Manifold::require_tangent(const Vec& p, const Vec& xi) const {
  require_dim(xi);
  const double normal = (xi - tangent_part(p, xi)).norm();
  if (!(normal < kOnManifoldTol * (1.0 + xi.norm()))) {
    std::ostringstream os;
    os << "normal component " << normal;
    throw Error(ErrorCode::VectorNotTangent, os.str());
  }
}

Vec Manifold::project_tangent(const Vec& p, const Vec& a) const {
  require_on_manifold(p);
  require_dim(a);
  return tangent_part(p, a);
}

Vec Manifold::second_fundamental_form(const Vec& p, const Vec& xi, const Vec& eta) const {
  require_on_manifold(p);
  require_tangent(p, xi);
  require_tangent(p, eta);
  return sff_unchecked(p, xi, eta);
}

Vec Manifold::involution_jacobian(const Vec& q, const Vec& a) const {
  require_dim(q);
  require_dim(a);
  if (!(distance(q) < tubular_radius())) {
    std::ostringstream os;
    os << "distance " << distance(q) << " exceeds tubular radius " << tubular_radius();
    throw Error(ErrorCode::OutsideTubularNeighborhood, os.str());
  }
  return involution_derivative(q, a);
}

Vec Manifold::extended_sff_A(const Vec& q, const Vec& a, const Vec& b) const {
  return 0.5 * involution_hessian(involution(q), involution_derivative(q, a),
                                  involution_derivative(q, b));
}

// ---------------------------------------------------------------------------

Sphere::Sphere(int ambient_dim, double tubular_radius, double blend_outer)
    : Manifold(ambient_dim, tubular_radius,
               ambient_dim == 2 ? ManifoldKind::Circle : ManifoldKind::Sphere),
      blend_{tubular_radius, blend_outer} {
  if (!(tubular_radius < blend_outer && blend_outer < 1.0))
    throw Error(ErrorCode::InvalidArgument, "need tubular_radius < blend_outer < 1");
}

Sphere::Radial Sphere::radial(double rho) const {
  const double d = rho - 1.0;
  if (std::abs(d) >= blend_.outer) return {1.0, 0.0, 0.0};
  const double phi = blend_.value(d), phi1 = blend_.d1(d), phi2 = blend_.d2(d);
  const double m = 2.0 / rho - 2.0;
  const double m1 = -2.0 / (rho * rho);
  const double m2 = 4.0 / (rho * rho * rho);
  return {1.0 + phi * m, phi1 * m + phi * m1, phi2 * m + 2.0 * phi1 * m1 + phi * m2};
}

double Sphere::distance(const Vec& q) const { return std::abs(q.norm() - 1.0); }

Vec Sphere::nearest_point(const Vec& q) const {
  const double rho = q.norm();
  if (rho == 0.0) {
    Vec e = Vec::Zero(q.size());
    e[0] = 1.0;
    return e;
  }
  return q / rho;
}

Vec Sphere::tangent_part(const Vec& p, const Vec& a) const {
  return a - p.dot(a) * p;
}

Vec Sphere::sff_unchecked(const Vec& p, const Vec& xi, const Vec& eta) const {
  return -xi.dot(eta) * p;
}

Vec Sphere::involution(const Vec& q) const {
  return radial(q.norm()).h * q;
}

Vec Sphere::involution_derivative(const Vec& q, const Vec& a) const {
  const double rho = q.norm();
  const Radial r = radial(rho);
  if (r.d1 == 0.0) return r.h * a;
  return r.h * a + (r.d1 / rho) * q.dot(a) * q;
}

Vec Sphere::involution_hessian(const Vec& q, const Vec& a, const Vec& b) const {
  const double rho = q.norm();
  const Radial r = radial(rho);
  if (r.d1 == 0.0 && r.d2 == 0.0) return Vec::Zero(q.size());
  const double qa = q.dot(a), qb = q.dot(b);
  const double c1 = r.d1 / rho;
  const double c2 = r.d2 / (rho * rho) - r.d1 / (rho * rho * rho);
  return c1 * (qb * a + qa * b) + (c2 * (qa * qb) + c1 * a.dot(b)) * q;
}

Vec Sphere::extended_sff_perp(const Vec& q, const Vec& a, const Vec& b) const {
  const double rho = q.norm();
  const double d = rho - 1.0;
  if (std::abs(d) >= blend_.outer) return Vec::Zero(q.size());
  const Vec p = q / rho;
  return -blend_.value(d) * tangent_part(p, a).dot(tangent_part(p, b)) * p;
}

// ---------------------------------------------------------------------------

CallbackManifold::CallbackManifold(ManifoldCallbacks callbacks, double jacobian_step,
                                   double hessian_step)
    : Manifold(callbacks.ambient_dim, callbacks.tubular_radius, ManifoldKind::Custom),
      cb_(std::move(callbacks)),
      blend_{cb_.tubular_radius, 1.2 * cb_.tubular_radius},
      jacobian_step_(jacobian_step),
      hessian_step_(hessian_step) {
  if (!cb_.nearest_point || !cb_.tangent_projection || !cb_.second_fundamental_form)
    throw Error(ErrorCode::InvalidArgument, "all manifold callbacks are required");
}

double CallbackManifold::distance(const Vec& q) const {
  return (q - cb_.nearest_point(q)).norm();
}

Vec CallbackManifold::nearest_point(const Vec& q) const { return cb_.nearest_point(q); }

Vec CallbackManifold::tangent_part(const Vec& p, const Vec& a) const {
  return cb_.tangent_projection(p, a);
}

Vec CallbackManifold::sff_unchecked(const Vec& p, const Vec& xi, const Vec& eta) const {
  return cb_.second_fundamental_form(p, xi, eta);
}

Vec CallbackManifold::involution(const Vec& q) const {
  const Vec p = cb_.nearest_point(q);
  const double d = (q - p).norm();
  if (d >= blend_.outer) return q;
  return q + 2.0 * blend_.value(d) * (p - q);
}

Vec CallbackManifold::involution_derivative(const Vec& q, const Vec& a) const {
  const double h = jacobian_step_;
  return (involution(q + h * a) - involution(q - h * a)) / (2.0 * h);
}

Vec CallbackManifold::involution_hessian(const Vec& q, const Vec& a, const Vec& b) const {
  const double h = hessian_step_;
  const Vec pp = involution(q + h * a + h * b), pm = involution(q + h * a - h * b);
  const Vec mp = involution(q - h * a + h * b), mm = involution(q - h * a - h * b);
  // Summed in an order symmetric under a <-> b so the form is exactly symmetric.
  return ((pp + mm) - (pm + mp)) / (4.0 * h * h);
}

Vec CallbackManifold::extended_sff_perp(const Vec& q, const Vec& a, const Vec& b) const {
  const Vec p = cb_.nearest_point(q);
  const double d = (q - p).norm();
  if (d >= blend_.outer) return Vec::Zero(q.size());
  return blend_.value(d) *
         cb_.second_fundamental_form(p, cb_.tangent_projection(p, a), cb_.tangent_projection(p, b));
}

std::shared_ptr<const Manifold> make_manifold(const std::string& kind) {
  if (kind == "circle") return std::make_shared<Sphere>(2);
  if (kind == "sphere") return std::make_shared<Sphere>(3);
  throw Error(ErrorCode::InvalidArgument, "unknown manifold kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

namespace {
const Plateau kFieldCutoff{1.75, 2.0};
}

DiffusionField::DiffusionField(int ambient_dim, Evaluator evaluator, double cutoff_radius,
                               double bound_constant, std::string name)
    : dim_(ambient_dim),
      evaluator_(std::move(evaluator)),
      cutoff_radius_(cutoff_radius),
      bound_constant_(bound_constant),
      name_(std::move(name)) {}

Vec DiffusionField::operator()(const Vec& q) const {
  if (q.norm() > cutoff_radius_ || !evaluator_) return Vec::Zero(dim_);
  return evaluator_(q);
}

DiffusionField DiffusionField::cross_product(const Vec& e) {
  if (e.size() != 3) throw Error(ErrorCode::DimensionMismatch, "cross-product field needs R^3");
  const Eigen::Vector3d axis(e[0], e[1], e[2]);
  auto f = [axis](const Vec& q) {
    const Eigen::Vector3d q3(q[0], q[1], q[2]);
    const Eigen::Vector3d y = kFieldCutoff.value(q3.norm()) * axis.cross(q3);
    Vec out(3);
    out << y[0], y[1], y[2];
    return out;
  };
  return DiffusionField(3, f, kFieldCutoff.outer, axis.norm(), "cross_product");
}

DiffusionField DiffusionField::planar_rotation() {
  auto f = [](const Vec& q) {
    Vec out(2);
    const double chi = kFieldCutoff.value(q.norm());
    out << -chi * q[1], chi * q[0];
    return out;
  };
  return DiffusionField(2, f, kFieldCutoff.outer, 1.0, "planar_rotation");
}

DiffusionField DiffusionField::zero(int ambient_dim) {
  return DiffusionField(ambient_dim, nullptr, 1.0, 1.0, "zero");
}

DiffusionField DiffusionField::standard_for(const Manifold& manifold) {
  if (manifold.ambient_dim() == 2) return planar_rotation();
  if (manifold.ambient_dim() == 3) {
    Vec e(3);
    e << 0.0, 0.0, 1.0;
    return cross_product(e);
  }
  return zero(manifold.ambient_dim());
}

}  // namespace geowave::geometry
