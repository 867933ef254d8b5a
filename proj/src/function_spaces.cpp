#include "geowave/function_spaces.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Dense>

#include "geowave/errors.hpp"

namespace geowave {

GridFunction::GridFunction(double origin, double spacing, int size, int dim)
    : origin_(origin), spacing_(spacing), size_(size), dim_(dim),
      values_(static_cast<size_t>(size) * dim, 0.0) {
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  if (size < 0 || dim < 1) throw Error(ErrorCode::InvalidArgument, "bad lattice shape");
}

GridFunction GridFunction::lattice(double domain_radius, int points, int dim) {
  if (!(domain_radius > 0.0) || points < 1)
    throw Error(ErrorCode::InvalidArgument, "bad lattice parameters");
  return GridFunction(-domain_radius, domain_radius / points, 2 * points + 1, dim);
}

GridFunction GridFunction::sample(const GridFunction& like,
                                  const std::function<Vec(double)>& fn) {
  GridFunction f = like.zeros_like();
  for (int i = 0; i < f.size(); ++i) f.set_point(i, fn(f.x(i)));
  return f;
}

Vec GridFunction::point(int i) const {
  Vec p(dim_);
  for (int c = 0; c < dim_; ++c) p[c] = at(i, c);
  return p;
}

void GridFunction::set_point(int i, const Vec& p) {
  if (p.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "point dimension");
  for (int c = 0; c < dim_; ++c) at(i, c) = p[c];
}

int GridFunction::nearest_index(double x) const {
  return static_cast<int>(std::lround((x - origin_) / spacing_));
}

bool GridFunction::same_lattice(const GridFunction& o) const {
  return origin_ == o.origin_ && spacing_ == o.spacing_ && size_ == o.size_ && dim_ == o.dim_;
}

void GridFunction::validate() const {
  if (!(spacing_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  for (size_t k = 0; k < values_.size(); ++k)
    if (!std::isfinite(values_[k])) {
      std::ostringstream os;
      os << "non-finite sample at node " << k / dim_;
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  if (!same_lattice(o)) throw Error(ErrorCode::DimensionMismatch, "lattice mismatch");
  for (size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  if (!same_lattice(o)) throw Error(ErrorCode::DimensionMismatch, "lattice mismatch");
  for (size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  for (double& x : values_) x *= s;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

void State::validate() const {
  if (!u.same_lattice(v)) throw Error(ErrorCode::DimensionMismatch, "u and v lattices differ");
  u.validate();
  v.validate();
}

State operator-(const State& a, const State& b) { return {a.u - b.u, a.v - b.v}; }

double LightCone::radius_at(double t) const {
  if (!(t < horizon)) {
    std::ostringstream os;
    os << "t = " << t << " is not below the cone horizon " << horizon;
    throw Error(ErrorCode::HorizonExceeded, os.str());
  }
  return horizon - t;
}

double derivative_at(const GridFunction& f, int i, int c, int order) {
  const int n = f.size();
  const double h = f.spacing();
  auto F = [&](int j) { return f.at(j, c); };
  switch (order) {
    case 0: return F(i);
    case 1:
      if (i == 0) return (-3.0 * F(0) + 4.0 * F(1) - F(2)) / (2.0 * h);
      if (i == n - 1) return (3.0 * F(n - 1) - 4.0 * F(n - 2) + F(n - 3)) / (2.0 * h);
      return (F(i + 1) - F(i - 1)) / (2.0 * h);
    case 2:
      if (i == 0) return (2.0 * F(0) - 5.0 * F(1) + 4.0 * F(2) - F(3)) / (h * h);
      if (i == n - 1) return (2.0 * F(n - 1) - 5.0 * F(n - 2) + 4.0 * F(n - 3) - F(n - 4)) / (h * h);
      return (F(i + 1) - 2.0 * F(i) + F(i - 1)) / (h * h);
    default: throw Error(ErrorCode::UnsupportedOrder, "derivative order above 2");
  }
}

GridFunction derivative(const GridFunction& f, int order) {
  GridFunction d = f.zeros_like();
  for (int i = 0; i < f.size(); ++i)
    for (int c = 0; c < f.dim(); ++c) d.at(i, c) = derivative_at(f, i, c, order);
  return d;
}

double integrate(const GridFunction& like, const std::function<double(int)>& g, double a,
                 double b) {
  const double h = like.spacing();
  const int n = like.size();
  const double eps = 1e-9;
  double sa = (a - like.origin()) / h, sb = (b - like.origin()) / h;
  if (sa < -eps || sb > (n - 1) + eps || n < 2) {
    std::ostringstream os;
    os << "interval [" << a << ", " << b << "] outside lattice [" << like.origin() << ", "
       << like.last_x() << "]";
    throw Error(ErrorCode::IntervalOutsideGrid, os.str());
  }
  sa = std::clamp(sa, 0.0, n - 1.0);
  sb = std::clamp(sb, 0.0, n - 1.0);
  if (!(sb > sa)) return 0.0;
  // Snap endpoints that sit on a node up to round-off.
  auto snap = [](double s) {
    const double r = std::round(s);
    return std::abs(s - r) < 1e-9 ? r : s;
  };
  sa = snap(sa);
  sb = snap(sb);
  const int i = std::min(static_cast<int>(std::floor(sa)), n - 2);
  const int j = std::min(static_cast<int>(std::floor(sb)), n - 2);
  auto interp = [&](double s, int k) {
    const double th = s - k;
    if (th == 0.0) return g(k);
    if (th == 1.0) return g(k + 1);
    return (1.0 - th) * g(k) + th * g(k + 1);
  };
  if (i == j) return 0.5 * (sb - sa) * h * (interp(sa, i) + interp(sb, i));
  double sum = 0.5 * (i + 1 - sa) * h * (interp(sa, i) + g(i + 1));
  double inner = 0.0;
  for (int k = i + 1; k < j; ++k) inner += g(k) + g(k + 1);
  sum += 0.5 * h * inner;
  if (sb > j) sum += 0.5 * (sb - j) * h * (g(j) + interp(sb, j));
  return sum;
}

double sobolev_norm_squared(const GridFunction& f, double a, double b, int order) {
  if (order < 0 || order > 2) throw Error(ErrorCode::UnsupportedOrder, "order must be 0, 1 or 2");
  return integrate(
      f,
      [&](int i) {
        double s = 0.0;
        for (int c = 0; c < f.dim(); ++c)
          for (int j = 0; j <= order; ++j) {
            const double d = derivative_at(f, i, c, j);
            s += d * d;
          }
        return s;
      },
      a, b);
}

double sobolev_norm(const GridFunction& f, double a, double b, int order) {
  return std::sqrt(sobolev_norm_squared(f, a, b, order));
}

double state_norm_squared(const State& z, double a, double b, int k) {
  return sobolev_norm_squared(z.u, a, b, k + 1) + sobolev_norm_squared(z.v, a, b, k);
}

double light_cone_norm(const State& z, const LightCone& cone, double t) {
  const double rho = cone.radius_at(t);
  return 0.5 * state_norm_squared(z, cone.center - rho, cone.center + rho, 1);
}

namespace {

// Coefficients c_j with sum_j c_j (-lambda_j)^m = 1 for m = 0..k.
std::vector<double> reflection_coefficients(int k) {
  static const double lambda[3] = {1.0, 0.5, 0.25};
  const int n = k + 1;
  Eigen::MatrixXd A(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n);
  for (int m = 0; m < n; ++m)
    for (int j = 0; j < n; ++j) A(m, j) = std::pow(-lambda[j], m);
  const Eigen::VectorXd c = A.fullPivLu().solve(rhs);
  return std::vector<double>(c.data(), c.data() + n);
}

}  // namespace

GridFunction extend(const GridFunction& f, double r, int k, double center) {
  if (k < 0 || k > 2) throw Error(ErrorCode::UnsupportedOrder, "extension order above 2");
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "extension radius must be positive");
  static const double lambda[3] = {1.0, 0.5, 0.25};
  const std::vector<double> coef = reflection_coefficients(k);
  const double h = f.spacing();
  const int n = f.size();
  const int lo = std::max(0, static_cast<int>(std::ceil((center - r - f.origin()) / h - 1e-9)));
  const int hi = std::min(n - 1, static_cast<int>(std::floor((center + r - f.origin()) / h + 1e-9)));
  if (hi - lo < 3) throw Error(ErrorCode::InvalidArgument, "extension core has fewer than 4 nodes");

  GridFunction out = f.zeros_like();
  const int dim = f.dim();
  for (int i = lo; i <= hi; ++i)
    for (int c = 0; c < dim; ++c) out.at(i, c) = f.at(i, c);

  // Cubic Lagrange interpolation from core nodes only.
  auto interp = [&](double y, double* dst, double scale) {
    const double s = (y - f.origin()) / h;
    const int base = std::clamp(static_cast<int>(std::floor(s)) - 1, lo, hi - 3);
    const double t = s - base;
    const double w0 = -(t - 1) * (t - 2) * (t - 3) / 6.0;
    const double w1 = t * (t - 2) * (t - 3) / 2.0;
    const double w2 = -t * (t - 1) * (t - 3) / 2.0;
    const double w3 = t * (t - 1) * (t - 2) / 6.0;
    for (int c = 0; c < dim; ++c)
      dst[c] += scale * (w0 * f.at(base, c) + w1 * f.at(base + 1, c) + w2 * f.at(base + 2, c) +
                         w3 * f.at(base + 3, c));
  };

  auto fill = [&](int i) {
    const double dx = f.x(i) - center;
    const double d = std::abs(dx) - r;
    if (!(d > 0.0) || d >= r) return;
    const double psi = 1.0 - geometry::smooth_ramp(d / r);
    if (psi == 0.0) return;
    const double side = dx < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j <= k; ++j) interp(center + side * (r - lambda[j] * d), out.node(i), psi * coef[j]);
  };
  for (int i = 0; i < lo; ++i) fill(i);
  for (int i = hi + 1; i < n; ++i) fill(i);
  return out;
}

double extension_ratio(const GridFunction& f, double r, int k, double center) {
  const GridFunction e = extend(f, r, k, center);
  const double num = sobolev_norm(e, e.origin(), e.last_x(), k);
  const double den = sobolev_norm(f, center - r, center + r, k);
  return den > 0.0 ? num / den : 0.0;
}

double interpolation_constant(double length) {
  if (!(length > 0.0)) throw Error(ErrorCode::InvalidArgument, "interval length must be positive");
  return 2.0 * std::max(1.0, 1.0 / std::sqrt(length));
}

InterpolationReport interpolation_check(const GridFunction& u, double a, double b,
                                        InterpolationVariant variant) {
  if (!(b > a)) throw Error(ErrorCode::InvalidArgument, "empty interval");
  // Sup norm over the nodes in [a, b] and the linearly interpolated endpoints.
  const double h = u.spacing();
  auto sq_at = [&](double x) {
    const double s = std::clamp((x - u.origin()) / h, 0.0, u.size() - 1.0);
    const int i = std::min(static_cast<int>(std::floor(s)), u.size() - 2);
    const double th = s - i;
    double acc = 0.0;
    for (int c = 0; c < u.dim(); ++c) {
      const double val = (1.0 - th) * u.at(i, c) + th * u.at(i + 1, c);
      acc += val * val;
    }
    return acc;
  };
  double sup = std::max(sq_at(a), sq_at(b));
  const int i0 = std::max(0, static_cast<int>(std::ceil((a - u.origin()) / h)));
  const int i1 = std::min(u.size() - 1, static_cast<int>(std::floor((b - u.origin()) / h)));
  for (int i = i0; i <= i1; ++i) {
    double acc = 0.0;
    for (int c = 0; c < u.dim(); ++c) acc += u.at(i, c) * u.at(i, c);
    sup = std::max(sup, acc);
  }
  const double l2sq = sobolev_norm_squared(u, a, b, 0);
  const double h1sq = sobolev_norm_squared(u, a, b, 1);
  const double l2 = std::sqrt(l2sq);
  InterpolationReport rep;
  rep.lhs = sup;
  if (variant == InterpolationVariant::Standard) {
    const double ke = interpolation_constant(b - a);
    rep.rhs = ke * ke * l2 * std::sqrt(h1sq);
  } else {
    const double du = std::sqrt(std::max(0.0, h1sq - l2sq));
    rep.rhs = l2sq + 2.0 * l2 * du;
  }
  rep.holds = rep.lhs <= rep.rhs * (1.0 + 1e-12) + 1e-300;
  return rep;
}

void write_csv(const std::string& path, const GridFunction& f) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << "x";
  for (int c = 0; c < f.dim(); ++c) out << ",f_" << c + 1;
  out << '\n' << std::setprecision(17);
  for (int i = 0; i < f.size(); ++i) {
    out << f.x(i);
    for (int c = 0; c < f.dim(); ++c) out << ',' << f.at(i, c);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

GridFunction read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::string line;
  std::vector<double> xs;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-' || line[0] == '+' ||
          line[0] == '.'))
      continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() < 2) throw Error(ErrorCode::Io, "malformed row in " + path);
    xs.push_back(row[0]);
    rows.emplace_back(row.begin() + 1, row.end());
  }
  if (xs.size() < 2) throw Error(ErrorCode::Io, "too few rows in " + path);
  const int dim = static_cast<int>(rows[0].size());
  GridFunction f(xs[0], (xs.back() - xs[0]) / (xs.size() - 1), static_cast<int>(xs.size()), dim);
  for (int i = 0; i < f.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != dim) throw Error(ErrorCode::Io, "ragged rows in " + path);
    for (int c = 0; c < dim; ++c) f.at(i, c) = rows[i][c];
  }
  return f;
}

void write_state(const std::string& prefix, const State& z) {
  write_csv(prefix + ".u.csv", z.u);
  write_csv(prefix + ".v.csv", z.v);
}

State read_state(const std::string& prefix) {
  State z{read_csv(prefix + ".u.csv"), read_csv(prefix + ".v.csv")};
  z.validate();
  return z;
}

}  // namespace geowave
