#include "geowave/energy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "json.hpp"

#include "geowave/errors.hpp"

namespace geowave::energy {

double energy(double t, const State& z, const LightCone& cone, int k) {
  if (k != 0 && k != 1) throw Error(ErrorCode::UnsupportedOrder, "energy order must be 0 or 1");
  const double rho = cone.radius_at(t);
  return 0.5 * state_norm_squared(z, cone.center - rho, cone.center + rho, k);
}

std::string to_string(Outer L) { return L == Outer::Identity ? "identity" : "log1p"; }

double outer_value(Outer L, double e) { return L == Outer::Identity ? e : std::log1p(e); }
double outer_d1(Outer L, double e) { return L == Outer::Identity ? 1.0 : 1.0 / (1.0 + e); }
double outer_d2(Outer L, double e) { return L == Outer::Identity ? 0.0 : -1.0 / ((1.0 + e) * (1.0 + e)); }

double EnergyReport::min_gap() const {
  double m = std::numeric_limits<double>::infinity();
  for (double g : gaps) m = std::min(m, g);
  return m;
}

double energy_tolerance(double dt, double max_e) { return 5.0 * dt * (1.0 + max_e); }

namespace {

// sum_{l=0}^{k} <D^l a, D^l b>_{L^2(lo, hi)}
double inner(const GridFunction& a, const GridFunction& b, double lo, double hi, int k) {
  return integrate(
      a,
      [&](int i) {
        double s = 0.0;
        for (int c = 0; c < a.dim(); ++c)
          for (int l = 0; l <= k; ++l) s += derivative_at(a, i, c, l) * derivative_at(b, i, c, l);
        return s;
      },
      lo, hi);
}

}  // namespace

Forcing solver_forcing(const solver::Model& model, const solver::Trajectory& traj) {
  Forcing out;
  const solver::LocalizationParams open{traj.loc.r, std::numeric_limits<double>::infinity()};
  const size_t steps = traj.taper_trace.size();
  auto taper_at = [&traj, steps](int m) {
    if (steps == 0) return 1.0;
    return traj.taper_trace[std::min(static_cast<size_t>(m), steps - 1)];
  };
  out.drift = [&model, &traj, open, taper_at](int m) {
    const State& z = traj.states[m];
    const double t = traj.times[m];
    GridFunction f = solver::localized_drift(model, t, z, open).v;
    if (static_cast<size_t>(m) < traj.control_rows.size() && !traj.control_rows[m].empty()) {
      const std::vector<State> cols = solver::localized_diffusion(model, t, z, open);
      const std::vector<double>& row = traj.control_rows[m];
      for (size_t j = 0; j < cols.size(); ++j) f = f + row[j] * cols[j].v;
    }
    return taper_at(m) * f;
  };
  if (traj.epsilon > 0.0 && !model.field.is_zero()) {
    out.diffusion = [&model, &traj, open, taper_at](int m) {
      const double s = std::sqrt(traj.epsilon) * taper_at(m);
      std::vector<GridFunction> cols;
      for (State& c : solver::localized_diffusion(model, traj.times[m], traj.states[m], open))
        cols.push_back(s * c.v);
      return cols;
    };
  }
  return out;
}

EnergyReport verify_energy_inequality(const solver::Trajectory& traj, const Forcing& forcing, Outer L,
                                      const LightCone& cone, int k, BoundMode mode) {
  const int n = static_cast<int>(traj.states.size());
  if (n < 2 || traj.times.size() != traj.states.size())
    throw Error(ErrorCode::InvalidArgument, "trajectory needs at least two recorded states");
  const double dt = traj.times[1] - traj.times[0];
  for (int m = 1; m < n; ++m)
    if (std::abs(traj.times[m] - traj.times[m - 1] - dt) > 1e-9 * dt)
      throw Error(ErrorCode::InvalidArgument, "recorded times are not uniform; record every step");
  const bool noisy = static_cast<bool>(forcing.diffusion);
  if (noisy && mode == BoundMode::Pathwise) {
    size_t logged = 0;
    for (const auto& inc : traj.increments) logged += inc.empty() ? 0 : 1;
    if (traj.increments.size() + 1 < static_cast<size_t>(n) || logged == 0)
      throw Error(ErrorCode::MissingIncrementLog, "pathwise verification needs the noise increments");
  }

  EnergyReport rep;
  rep.L = L;
  rep.k = k;
  double bound = 0.0, v_prev = 0.0, max_e = 0.0;
  for (int m = 0; m < n; ++m) {
    const double t = traj.times[m];
    if (!(t < cone.horizon)) break;
    const State& z = traj.states[m];
    const double rho = cone.radius_at(t);
    const double lo = cone.center - rho, hi = cone.center + rho;
    const double e = 0.5 * state_norm_squared(z, lo, hi, k);
    const double d1 = outer_d1(L, e), d2 = outer_d2(L, e);

    double V = inner(z.u, z.v, lo, hi, 0);
    if (forcing.drift) V += inner(z.v, forcing.drift(m), lo, hi, k);
    V *= d1;
    std::vector<GridFunction> cols;
    if (noisy) {
      cols = forcing.diffusion(m);
      for (const GridFunction& g : cols) {
        V += 0.5 * d1 * inner(g, g, lo, hi, k);
        const double c = inner(z.v, g, lo, hi, k);
        V += 0.5 * d2 * c * c;
      }
    }

    if (m == 0) bound = outer_value(L, e);
    else bound += 0.5 * dt * (v_prev + V);
    v_prev = V;

    const double E = outer_value(L, e);
    rep.times.push_back(t);
    rep.e_values.push_back(e);
    rep.E_values.push_back(E);
    rep.bound_values.push_back(bound);
    rep.gaps.push_back(bound - E);
    max_e = std::max(max_e, e);

    // Ito increment over [t_m, t_{m+1}], evaluated at the left end.
    if (noisy && mode == BoundMode::Pathwise && static_cast<size_t>(m) < traj.increments.size()) {
      const std::vector<double>& xi = traj.increments[m];
      for (size_t j = 0; j < xi.size() && j < cols.size(); ++j)
        bound += d1 * xi[j] * inner(z.v, cols[j], lo, hi, k);
    }
  }
  rep.tol = energy_tolerance(dt, max_e);
  for (size_t m = 0; m < rep.gaps.size(); ++m)
    if (rep.gaps[m] < -rep.tol) rep.violations.emplace_back(rep.times[m], rep.gaps[m]);
  return rep;
}

EnergyReport average_reports(const std::vector<EnergyReport>& reports) {
  if (reports.empty()) throw Error(ErrorCode::InvalidArgument, "no reports to average");
  EnergyReport avg = reports[0];
  avg.violations.clear();
  const size_t n = avg.times.size();
  for (size_t r = 1; r < reports.size(); ++r) {
    if (reports[r].times.size() != n) throw Error(ErrorCode::DimensionMismatch, "reports differ in length");
    for (size_t m = 0; m < n; ++m) {
      avg.e_values[m] += reports[r].e_values[m];
      avg.E_values[m] += reports[r].E_values[m];
      avg.bound_values[m] += reports[r].bound_values[m];
    }
  }
  const double s = 1.0 / reports.size();
  double max_e = 0.0, dt = n > 1 ? avg.times[1] - avg.times[0] : 0.0;
  for (size_t m = 0; m < n; ++m) {
    avg.e_values[m] *= s;
    avg.E_values[m] *= s;
    avg.bound_values[m] *= s;
    avg.gaps[m] = avg.bound_values[m] - avg.E_values[m];
    max_e = std::max(max_e, avg.e_values[m]);
  }
  avg.tol = energy_tolerance(dt, max_e);
  for (size_t m = 0; m < n; ++m)
    if (avg.gaps[m] < -avg.tol) avg.violations.emplace_back(avg.times[m], avg.gaps[m]);
  return avg;
}

double perpendicularity_residual(const geometry::Manifold& manifold, const State& z, double t,
                                 const LightCone& cone, const GridFunction* slope) {
  const double rho = cone.radius_at(t);
  GridFunction ux = slope ? *slope : derivative(z.u, 1);
  GridFunction a = z.u.zeros_like();
  for (int i = 0; i < a.size(); ++i) {
    if (std::abs(a.x(i) - cone.center) > rho + 2.0 * a.spacing()) continue;
    const Vec u = z.u.point(i), v = z.v.point(i);
    const Vec p = manifold.tangent_part(manifold.nearest_point(u), ux.point(i));
    a.set_point(i, manifold.extended_sff_A(u, v, v) - manifold.extended_sff_A(u, p, p));
  }
  return std::abs(inner(z.v, a, cone.center - rho, cone.center + rho, 0));
}

std::function<double(double)> gronwall_envelope(double p0, const std::function<double(double)>& rate,
                                                double horizon, int steps) {
  if (!(horizon > 0.0) || steps < 1) throw Error(ErrorCode::InvalidArgument, "need horizon > 0 and steps >= 1");
  const double h = horizon / steps;
  std::vector<double> cum(steps + 1, 0.0);
  double prev = rate(0.0);
  for (int i = 1; i <= steps; ++i) {
    const double cur = rate(i * h);
    cum[i] = cum[i - 1] + 0.5 * h * (prev + cur);
    prev = cur;
  }
  return [p0, h, steps, cum = std::move(cum)](double t) {
    if (p0 == 0.0) return 0.0;
    const double s = std::clamp(t / h, 0.0, static_cast<double>(steps));
    const int i = std::min(static_cast<int>(s), steps - 1);
    const double w = s - i;
    return p0 * std::exp((1.0 - w) * cum[i] + w * cum[i + 1]);
  };
}

void write_report_csv(const std::string& path, const EnergyReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << "t,e,bound,gap\n" << std::setprecision(17);
  for (size_t m = 0; m < report.times.size(); ++m)
    out << report.times[m] << ',' << report.e_values[m] << ',' << report.bound_values[m] << ','
        << report.gaps[m] << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::string report_summary_json(const EnergyReport& report) {
  nlohmann::ordered_json j;
  j["L"] = to_string(report.L);
  j["k"] = report.k;
  j["steps"] = report.times.size();
  j["tol"] = report.tol;
  j["min_gap"] = report.gaps.empty() ? 0.0 : report.min_gap();
  j["max_e"] = report.e_values.empty() ? 0.0 : *std::max_element(report.e_values.begin(), report.e_values.end());
  auto v = nlohmann::ordered_json::array();
  for (const auto& [t, g] : report.violations) v.push_back({{"t", t}, {"gap", g}});
  j["violations"] = v;
  return j.dump(2);
}

}  // namespace geowave::energy
