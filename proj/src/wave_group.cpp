#include "geowave/wave_group.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geowave/errors.hpp"

namespace geowave::wave {

GroupStep lattice_step(double t, double dx) {
  if (!(dx > 0.0)) throw Error(ErrorCode::InvalidArgument, "lattice spacing must be positive");
  const double s = t / dx;
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-9 * std::max(1.0, std::abs(s))) {
    std::ostringstream os;
    os << "t = " << t << " is not a multiple of dx = " << dx;
    throw Error(ErrorCode::NonLatticeTime, os.str());
  }
  return {static_cast<int>(r), dx};
}

State apply_group(const State& z, double t) { return apply_group(z, lattice_step(t, z.u.spacing())); }

namespace {

struct Neumaier {
  double sum = 0.0, carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

State shift_impl(const State& z, GroupStep step, bool check_padding) {
  if (!z.u.same_lattice(z.v)) throw Error(ErrorCode::DimensionMismatch, "u and v lattices differ");
  if (step.spacing != z.u.spacing())
    throw Error(ErrorCode::NonLatticeTime, "group step spacing differs from the lattice spacing");
  const int s = std::abs(step.shift_count);
  if (s == 0) return z;
  const double sign = step.shift_count > 0 ? 1.0 : -1.0;
  const int n = z.u.size(), dim = z.u.dim();
  const double h = z.u.spacing();

  double scale = 0.0, edge = 0.0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < dim; ++c) {
      const double m = std::max(std::abs(z.u.at(i, c)), std::abs(z.v.at(i, c)));
      scale = std::max(scale, m);
      if (i < s || i >= n - s) edge = std::max(edge, m);
    }
  if (check_padding && edge > 1e-8 * (1.0 + scale)) {
    std::ostringstream os;
    os << "data of size " << edge << " within " << s << " nodes of the lattice end";
    throw Error(ErrorCode::InsufficientPadding, os.str());
  }

  State out{z.u.zeros_like(), z.v.zeros_like()};
  auto U = [&](int j, int c) { return (j >= 0 && j < n) ? z.u.at(j, c) : 0.0; };
  auto V = [&](int j, int c) { return (j >= 0 && j < n) ? z.v.at(j, c) : 0.0; };
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < dim; ++c) {
      const int lo = i - s, hi = i + s;
      // Compensated sums: the velocity update divides by h.
      Neumaier integral;
      integral.add(0.5 * V(lo, c));
      integral.add(0.5 * V(hi, c));
      for (int j = lo + 1; j < hi; ++j) integral.add(V(j, c));
      // Alternating sum of first differences, signed from the right end, telescoped:
      // U(hi) - 2 U(hi-1) + 2 U(hi-2) - ... + (-1)^(2s) U(lo) with inner weights 2.
      Neumaier alt;
      alt.add(U(hi, c));
      double sgn = -1.0;
      for (int j = hi - 1; j > lo; --j) {
        alt.add(sgn * 2.0 * U(j, c));
        sgn = -sgn;
      }
      alt.add(sgn * U(lo, c));
      out.u.at(i, c) = 0.5 * (U(hi, c) + U(lo, c)) + sign * 0.5 * h * integral.value();
      out.v.at(i, c) = 0.5 * (V(hi, c) + V(lo, c)) + sign * alt.value() / h;
    }
  }
  return out;
}

}  // namespace

State apply_group(const State& z, GroupStep step) { return shift_impl(z, step, true); }

State apply_group_unpadded(const State& z, GroupStep step) { return shift_impl(z, step, false); }

State generator(const State& z) { return {z.v, derivative(z.u, 2)}; }

GridFunction compatible_derivative(const GridFunction& u) {
  GridFunction d = u.zeros_like();
  const double h = u.spacing();
  for (int i = 1; i < u.size(); ++i)
    for (int c = 0; c < u.dim(); ++c)
      d.at(i, c) = 2.0 * (u.at(i, c) - u.at(i - 1, c)) / h - d.at(i - 1, c);
  return d;
}

double free_energy(const State& z) {
  const GridFunction d = compatible_derivative(z.u);
  double s = 0.0;
  for (size_t k = 0; k < d.values().size(); ++k)
    s += d.values()[k] * d.values()[k] + z.v.values()[k] * z.v.values()[k];
  return s * z.u.spacing();
}

}  // namespace geowave::wave
