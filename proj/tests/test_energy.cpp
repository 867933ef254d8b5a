#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "geowave/energy.hpp"
#include "geowave/errors.hpp"
#include "geowave/wave_group.hpp"

using namespace geowave;
using namespace geowave::energy;

namespace {

const noise::SpectralMeasure kMu{{{0.0, 1.0}, {1.0, 0.5}, {2.0, 0.25}}};

State sphere_data(const GridFunction& lat, double amp = 1.0) {
  State z{lat.zeros_like(), lat.zeros_like()};
  for (int i = 0; i < lat.size(); ++i) {
    const double x = lat.x(i), g = std::exp(-x * x);
    Vec q(3), w(3);
    q << 0.4 * amp * g, 0.3 * amp * x * g, 1.0;
    q.normalize();
    w << 0.3 * amp * g, -0.2 * amp * g, 0.1 * x * g;
    w -= w.dot(q) * q;
    z.u.set_point(i, q);
    z.v.set_point(i, w);
  }
  return z;
}

State random_state(const GridFunction& lat, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  State z{lat.zeros_like(), lat.zeros_like()};
  for (int b = 0; b < 4; ++b) {
    const double x0 = 1.5 * g(rng), w = 1.0 + std::abs(g(rng));
    Vec au(lat.dim()), av(lat.dim());
    for (int c = 0; c < lat.dim(); ++c) {
      au[c] = g(rng);
      av[c] = g(rng);
    }
    for (int i = 0; i < lat.size(); ++i) {
      const double env = std::exp(-w * (lat.x(i) - x0) * (lat.x(i) - x0));
      for (int c = 0; c < lat.dim(); ++c) {
        z.u.at(i, c) += au[c] * env;
        z.v.at(i, c) += av[c] * env;
      }
    }
  }
  return z;
}

}  // namespace

TEST_CASE("cone energy") {
  const GridFunction lat = GridFunction::lattice(6.0, 768, 3);
  const LightCone cone{0.0, 2.0};
  const State zero{lat.zeros_like(), lat.zeros_like()};
  CHECK(energy::energy(0.5, zero, cone, 1) == 0.0);

  // Constant unit map: e = 1/2 |p0|^2 |B| = T - t.
  State c{GridFunction::sample(lat, [](double) { Vec p(3); p << 0.0, 0.6, 0.8; return p; }), lat.zeros_like()};
  for (double t : {0.0, 0.25, 1.5}) CHECK(energy::energy(t, c, cone, 0) == doctest::Approx(2.0 - t).epsilon(1e-12));

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const State z = random_state(lat, rng);
    CHECK(energy::energy(0.3, z, cone, 1) >= energy::energy(0.3, z, cone, 0));
    CHECK(std::abs(energy::energy(0.3, z, cone, 1) - light_cone_norm(z, cone, 0.3)) <= 1e-12 * energy::energy(0.3, z, cone, 1));
  }
  try {
    energy::energy(2.0, c, cone, 1);
    FAIL("expected HorizonExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HorizonExceeded);
  }
}

TEST_CASE("outer functions") {
  CHECK(outer_value(Outer::Log1p, 0.0) == 0.0);
  const double e = 0.7, h = 1e-5;
  CHECK(outer_d1(Outer::Log1p, e) == doctest::Approx((std::log1p(e + h) - std::log1p(e - h)) / (2 * h)).epsilon(1e-8));
  CHECK(outer_d2(Outer::Log1p, e) ==
        doctest::Approx((outer_d1(Outer::Log1p, e + h) - outer_d1(Outer::Log1p, e - h)) / (2 * h)).epsilon(1e-6));
  CHECK(outer_d2(Outer::Identity, e) == 0.0);
}

TEST_CASE("free waves satisfy the inequality") {
  // Off-manifold linear data under the exact lattice group, f = g = 0.
  const GridFunction lat = GridFunction::lattice(6.0, 384, 2);
  const LightCone cone{0.2, 2.0};
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    solver::Trajectory tr;
    const State z0 = random_state(lat, rng);
    const int steps = 128;
    for (int m = 0; m <= steps; ++m) {
      tr.times.push_back(m * lat.spacing());
      tr.states.push_back(wave::apply_group_unpadded(z0, {m, lat.spacing()}));
    }
    for (int k : {0, 1}) {
      const EnergyReport rep = verify_energy_inequality(tr, Forcing{}, Outer::Identity, cone, k);
      CHECK(rep.min_gap() >= -1e-8);
      CHECK(rep.ok());
      // e(t) <= e(0) + int <u, v> <= e(0) e^t.
      for (size_t m = 0; m < rep.times.size(); ++m)
        CHECK(rep.e_values[m] <= rep.e_values[0] * std::exp(rep.times[m]) + 1e-8);
    }
  }
}

TEST_CASE("skeleton runs: geodesic and controlled") {
  const solver::Model circle = solver::Model::standard("circle", kMu);
  const GridFunction lat = GridFunction::lattice(6.0, 384, 2);
  const double w = 1.3;
  State z{GridFunction::sample(lat, [](double) { Vec p(2); p << 1.0, 0.0; return p; }),
          GridFunction::sample(lat, [w](double) { Vec p(2); p << 0.0, w; return p; })};
  solver::SolverOptions opts;
  const solver::Trajectory tr = solver::solve_skeleton(circle, z, nullptr, opts);
  const LightCone cone{0.0, 2.0};
  const EnergyReport rep = verify_energy_inequality(tr, solver_forcing(circle, tr), Outer::Identity, cone);
  CHECK(rep.ok());
  for (size_t m = 1; m < rep.e_values.size(); ++m) CHECK(rep.e_values[m] <= rep.e_values[m - 1] + 1e-12);
  for (size_t m = 0; m < rep.e_values.size(); ++m)
    CHECK(std::abs(rep.e_values[m] - tr.energy_trace[m]) <= 1e-12 * (1.0 + tr.energy_trace[m]));

  const solver::Model sphere = solver::Model::standard("sphere", kMu);
  const GridFunction lat3 = GridFunction::lattice(6.0, 384, 3);
  solver::Control h(0.25, 4, sphere.basis.dim());
  for (int b = 0; b < 4; ++b)
    for (int k = 0; k < h.dim; ++k) h.at(b, k) = 0.5 * std::cos(b + k);
  const solver::Trajectory ts = solver::solve_skeleton(sphere, sphere_data(lat3), &h, opts);
  for (Outer L : {Outer::Identity, Outer::Log1p}) {
    const EnergyReport r = verify_energy_inequality(ts, solver_forcing(sphere, ts), L, cone);
    CHECK(r.ok());
    MESSAGE(to_string(L) << " controlled min gap " << r.min_gap() << " tol " << r.tol);
  }
}

TEST_CASE("stochastic paths, pathwise and mean") {
  const solver::Model sphere = solver::Model::standard("sphere", kMu);
  const GridFunction lat = GridFunction::lattice(6.0, 384, 3);
  solver::SolverOptions opts;
  const LightCone cone{0.0, 2.0};
  std::vector<EnergyReport> mean_reports;
  for (uint64_t path = 0; path < 4; ++path) {
    const solver::Trajectory tr = solver::solve_stochastic(sphere, sphere_data(lat), 0.01, nullptr, opts, 77, path);
    const Forcing f = solver_forcing(sphere, tr);
    for (Outer L : {Outer::Identity, Outer::Log1p}) CHECK(verify_energy_inequality(tr, f, L, cone).ok());
    mean_reports.push_back(verify_energy_inequality(tr, f, Outer::Identity, cone, 1, BoundMode::Mean));

    solver::Trajectory stripped = tr;
    stripped.increments.clear();
    try {
      verify_energy_inequality(stripped, f, Outer::Identity, cone);
      FAIL("expected MissingIncrementLog");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingIncrementLog);
    }
  }
  CHECK(average_reports(mean_reports).times.size() == mean_reports[0].times.size());
  CHECK(energy_tolerance(0.01, 3.0) == doctest::Approx(2.0 * energy_tolerance(0.005, 3.0)));
}

TEST_CASE("perpendicularity cancellation") {
  const solver::Model sphere = solver::Model::standard("sphere", kMu);
  const GridFunction lat = GridFunction::lattice(6.0, 384, 3);
  solver::SolverOptions opts;
  opts.record_slopes = true;
  const solver::Trajectory tr = solver::solve_stochastic(sphere, sphere_data(lat, 2.0), 0.05, nullptr, opts, 3);
  const LightCone cone{0.0, 2.0};
  for (size_t m = 0; m < tr.states.size(); ++m) {
    const double t = tr.times[m];
    if (t >= 2.0) break;
    const double e = energy::energy(t, tr.states[m], cone, 1);
    CHECK(perpendicularity_residual(*sphere.manifold, tr.states[m], t, cone) < 1e-8 * (1.0 + e));
    CHECK(perpendicularity_residual(*sphere.manifold, tr.states[m], t, cone, &tr.slopes[m]) < 1e-8 * (1.0 + e));
  }
}

TEST_CASE("gronwall envelope") {
  const auto zero = gronwall_envelope(0.0, [](double) { return 3.0; }, 1.0);
  CHECK(zero(0.7) == 0.0);
  const auto c = gronwall_envelope(2.0, [](double) { return 1.5; }, 1.0);
  for (double t : {0.0, 0.3, 1.0}) CHECK(c(t) == doctest::Approx(2.0 * std::exp(1.5 * t)).epsilon(1e-12));
  const auto lin = gronwall_envelope(1.0, [](double s) { return s; }, 1.0, 4096);
  CHECK(lin(1.0) == doctest::Approx(std::exp(0.5)).epsilon(1e-8));
}

TEST_CASE("twin gaps sit under the envelope") {
  // Two controlled skeleton runs from nearby data; squared H^1 x L^2 gap vs
  // p(0) exp(int (1 + |hdot|^2)) scaled by the observed initial growth.
  const solver::Model sphere = solver::Model::standard("sphere", kMu);
  const GridFunction lat = GridFunction::lattice(6.0, 384, 3);
  solver::Control h(0.25, 4, sphere.basis.dim());
  for (int b = 0; b < 4; ++b)
    for (int k = 0; k < h.dim; ++k) h.at(b, k) = 0.3 * std::sin(b - k);
  solver::SolverOptions opts;
  const State a = sphere_data(lat, 1.0), b = sphere_data(lat, 1.01);
  const solver::Trajectory ta = solver::solve_skeleton(sphere, a, &h, opts);
  const solver::Trajectory tb = solver::solve_skeleton(sphere, b, &h, opts);
  const LightCone cone{0.0, 2.0};
  const double p0 = 2.0 * energy::energy(0.0, ta.states[0] - tb.states[0], cone, 0);
  double hmax = 0.0;
  for (double x : h.coeffs) hmax = std::max(hmax, std::abs(x));
  const double lip = 10.0;
  const auto env = gronwall_envelope(p0, [&](double) { return lip * (1.0 + h.dim * hmax * hmax); }, 1.0);
  for (size_t m = 0; m < ta.states.size(); ++m) {
    const double t = ta.times[m];
    CHECK(2.0 * energy::energy(t, ta.states[m] - tb.states[m], cone, 0) <= env(t));
  }
}
