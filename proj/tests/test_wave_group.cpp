#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "geowave/errors.hpp"
#include "geowave/wave_group.hpp"

using namespace geowave;
using namespace geowave::wave;

namespace {

double max_diff(const GridFunction& a, const GridFunction& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

double max_diff(const State& a, const State& b) { return std::max(max_diff(a.u, b.u), max_diff(a.v, b.v)); }

// Smooth data supported in |x| < 2 built from random Gaussian bumps.
State random_bumps(const GridFunction& lat, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  State z{lat.zeros_like(), lat.zeros_like()};
  for (int b = 0; b < 3; ++b) {
    const double x0 = c(rng), w = 4.0 + 4.0 * std::abs(c(rng));
    Vec au(lat.dim()), av(lat.dim());
    for (int k = 0; k < lat.dim(); ++k) {
      au[k] = g(rng);
      av[k] = g(rng);
    }
    for (int i = 0; i < lat.size(); ++i) {
      const double x = lat.x(i);
      const double env = std::abs(x) < 2.0 ? std::exp(-w * (x - x0) * (x - x0)) : 0.0;
      for (int k = 0; k < lat.dim(); ++k) {
        z.u.at(i, k) += au[k] * env;
        z.v.at(i, k) += av[k] * env;
      }
    }
  }
  return z;
}

}  // namespace

TEST_CASE("identity and d'Alembert example") {
  const GridFunction lat = GridFunction::lattice(6.0, 1536, 1);
  State z{GridFunction::sample(lat, [](double x) { Vec p(1); p << std::exp(-x * x); return p; }),
          lat.zeros_like()};
  CHECK(max_diff(apply_group(z, 0.0), z) == 0.0);

  const State s = apply_group(z, 1.0);
  double eu = 0.0, ev = 0.0;
  for (int i = 0; i < lat.size(); ++i) {
    const double x = lat.x(i);
    const double u = 0.5 * (std::exp(-(x + 1) * (x + 1)) + std::exp(-(x - 1) * (x - 1)));
    const double v = 0.5 * (-2 * (x + 1) * std::exp(-(x + 1) * (x + 1)) + 2 * (x - 1) * std::exp(-(x - 1) * (x - 1)));
    eu = std::max(eu, std::abs(s.u.at(i, 0) - u));
    ev = std::max(ev, std::abs(s.v.at(i, 0) - v));
  }
  const double h = lat.spacing();
  CHECK(eu < h * h);
  CHECK(ev < h * h);

  // A velocity pulse: u(t,x) = 1/2 int_{x-t}^{x+t} exp(-y^2) dy.
  State w{lat.zeros_like(), z.u};
  const State sw = apply_group(w, 1.0);
  double ew = 0.0;
  for (int i = 0; i < lat.size(); ++i) {
    const double x = lat.x(i);
    const double exact = 0.25 * std::sqrt(M_PI) * (std::erf(x + 1) - std::erf(x - 1));
    ew = std::max(ew, std::abs(sw.u.at(i, 0) - exact));
  }
  CHECK(ew < h * h);
}

TEST_CASE("group law, reversibility, finite speed, energy") {
  const GridFunction lat = GridFunction::lattice(6.0, 384, 3);
  const double h = lat.spacing();
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const State z = random_bumps(lat, rng);
    const int a = 20 + 17 * trial, b = 55 - 9 * trial;
    const State ab = apply_group(apply_group(z, a * h), b * h);
    const State direct = apply_group(z, (a + b) * h);
    CHECK(max_diff(ab, direct) < 1e-12);
    const State mixed = apply_group(apply_group(z, a * h), -b * h);
    CHECK(max_diff(mixed, apply_group(z, (a - b) * h)) < 1e-12);
    CHECK(max_diff(apply_group(apply_group(z, a * h), -a * h), z) < 1e-12);

    const double e0 = free_energy(z);
    for (int m : {1, 64, 256, -100}) CHECK(std::abs(free_energy(apply_group(z, m * h)) - e0) < 1e-10 * e0);
  }

  // Zero on B(x0, R) stays zero on B(x0, R - t), exactly.
  State z = random_bumps(lat, rng);
  const double x0 = 0.4, R = 1.0;
  for (int i = 0; i < lat.size(); ++i)
    if (std::abs(lat.x(i) - x0) <= R + 1e-12)
      for (int c = 0; c < 3; ++c) z.u.at(i, c) = z.v.at(i, c) = 0.0;
  for (int m : {1, 50, 128, 255}) {
    const State s = apply_group(z, m * h);
    for (int i = 0; i < lat.size(); ++i)
      if (std::abs(lat.x(i) - x0) <= R - m * h + 1e-12)
        for (int c = 0; c < 3; ++c) {
          CHECK(s.u.at(i, c) == 0.0);
          CHECK(s.v.at(i, c) == 0.0);
        }
  }
}

TEST_CASE("errors") {
  const GridFunction lat = GridFunction::lattice(1.0, 64, 1);
  State z{lat.zeros_like(), lat.zeros_like()};
  try {
    apply_group(z, 0.3 * lat.spacing());
    FAIL("expected NonLatticeTime");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonLatticeTime);
  }
  z.u.at(2, 0) = 1.0;
  try {
    apply_group(z, 5 * lat.spacing());
    FAIL("expected InsufficientPadding");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientPadding);
  }
}

TEST_CASE("generator") {
  const GridFunction lat = GridFunction::lattice(4.0, 256, 2);
  const State zero{lat.zeros_like(), lat.zeros_like()};
  const State g0 = generator(zero);
  CHECK(max_diff(g0.u, lat.zeros_like()) == 0.0);
  CHECK(max_diff(g0.v, lat.zeros_like()) == 0.0);

  const GridFunction lat1 = GridFunction::lattice(4.0, 256, 1);
  State s{GridFunction::sample(lat1, [](double x) { Vec p(1); p << std::sin(x); return p; }), lat1.zeros_like()};
  const State gs = generator(s);
  double err = 0.0;
  for (int i = 1; i + 1 < lat1.size(); ++i) err = std::max(err, std::abs(gs.v.at(i, 0) + std::sin(lat1.x(i))));
  CHECK(err < lat1.spacing() * lat1.spacing());

  // (S_dx z - z)/dx - G z in interior L^2 is first order in dx.
  double res[3];
  for (int level = 0; level < 3; ++level) {
    const GridFunction l = GridFunction::lattice(6.0, 192 << level, 1);
    State z{GridFunction::sample(l, [](double x) { Vec p(1); p << std::exp(-2 * x * x); return p; }),
            GridFunction::sample(l, [](double x) { Vec p(1); p << x * std::exp(-x * x); return p; })};
    const State step = apply_group(z, l.spacing());
    const State gz = generator(z);
    const State diff{(1.0 / l.spacing()) * (step.u - z.u) - gz.u, (1.0 / l.spacing()) * (step.v - z.v) - gz.v};
    res[level] = std::sqrt(sobolev_norm_squared(diff.u, -4, 4, 0) + sobolev_norm_squared(diff.v, -4, 4, 0));
  }
  MESSAGE("consistency residuals " << res[0] << " " << res[1] << " " << res[2]);
  CHECK(res[1] / res[0] == doctest::Approx(0.5).epsilon(0.05));
  CHECK(res[2] / res[1] == doctest::Approx(0.5).epsilon(0.05));
}
