#pragma once

#include <functional>
#include <string>
#include <vector>

#include "geowave/geometry.hpp"

namespace geowave {

using geometry::Vec;

/// Samples of an R^n-valued function on a uniform 1-D lattice, stored node-major.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(double origin, double spacing, int size, int dim);

  /// Symmetric lattice on [-L, L] with 2*points+1 nodes, spacing L/points.
  static GridFunction lattice(double domain_radius, int points, int dim);
  static GridFunction sample(const GridFunction& like, const std::function<Vec(double)>& fn);

  double origin() const { return origin_; }
  double spacing() const { return spacing_; }
  int size() const { return size_; }
  int dim() const { return dim_; }
  double x(int i) const { return origin_ + i * spacing_; }
  double last_x() const { return x(size_ - 1); }

  double& at(int i, int c) { return values_[static_cast<size_t>(i) * dim_ + c]; }
  double at(int i, int c) const { return values_[static_cast<size_t>(i) * dim_ + c]; }
  double* node(int i) { return values_.data() + static_cast<size_t>(i) * dim_; }
  const double* node(int i) const { return values_.data() + static_cast<size_t>(i) * dim_; }
  Vec point(int i) const;
  void set_point(int i, const Vec& p);

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  /// Index of the node nearest to x (may lie outside [0, size)).
  int nearest_index(double x) const;

  bool same_lattice(const GridFunction& other) const;
  /// Throws InvalidArgument on non-positive spacing or non-finite samples.
  void validate() const;

  GridFunction zeros_like() const { return GridFunction(origin_, spacing_, size_, dim_); }

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double s);

 private:
  double origin_ = 0.0;
  double spacing_ = 1.0;
  int size_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

/// z = (u, v) on a shared lattice.
struct State {
  GridFunction u;
  GridFunction v;

  void validate() const;
};

State operator-(const State& a, const State& b);

struct LightCone {
  double center = 0.0;
  double horizon = 1.0;

  /// Radius of B(center, horizon - t); throws HorizonExceeded when t >= horizon.
  double radius_at(double t) const;
};

/// Derivative of order 0, 1 or 2 at node i: central second-order stencils,
/// one-sided second-order stencils at the two array ends.
double derivative_at(const GridFunction& f, int i, int c, int order);
GridFunction derivative(const GridFunction& f, int order);

/// Integral over [a, b] of the lattice function g (trapezoid rule; the
/// partial end cells integrate the linear interpolant of g).
double integrate(const GridFunction& like, const std::function<double(int)>& g, double a,
                 double b);

double sobolev_norm_squared(const GridFunction& f, double a, double b, int order);
double sobolev_norm(const GridFunction& f, double a, double b, int order);

/// ||u||^2_{H^{k+1}(a,b)} + ||v||^2_{H^k(a,b)}.
double state_norm_squared(const State& z, double a, double b, int k = 1);

/// Half the squared H^2 x H^1 norm of z on B(x, T - t).
double light_cone_norm(const State& z, const LightCone& cone, double t);

/// Scaled extension operator E^k_r centred at `center`: reproduces f on
/// |x - center| <= r, a cut-off higher-order reflection on r < |x - center| < 2r,
/// and zero beyond.
GridFunction extend(const GridFunction& f, double r, int k, double center = 0.0);

/// ||E f||_{H^k(R)} / ||f||_{H^k(-r, r)}; the observed operator bound.
double extension_ratio(const GridFunction& f, double r, int k, double center = 0.0);

enum class InterpolationVariant { Standard, GagliardoNirenberg };

struct InterpolationReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

/// k_e = 2 max{1, 1/sqrt(|I|)}.
double interpolation_constant(double length);

InterpolationReport interpolation_check(const GridFunction& u, double a, double b,
                                        InterpolationVariant variant);

void write_csv(const std::string& path, const GridFunction& f);
GridFunction read_csv(const std::string& path);
/// Writes prefix.u.csv and prefix.v.csv.
void write_state(const std::string& prefix, const State& z);
State read_state(const std::string& prefix);

}  // namespace geowave
