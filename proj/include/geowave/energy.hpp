#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "geowave/solver.hpp"

namespace geowave::energy {

/// e(t, z): half the squared H^{k+1} x H^k norm on B(x, T - t).
/// Throws HorizonExceeded for t >= T.
double energy(double t, const State& z, const LightCone& cone, int k);

enum class Outer { Identity, Log1p };
std::string to_string(Outer L);
double outer_value(Outer L, double e);
double outer_d1(Outer L, double e);
double outer_d2(Outer L, double e);

/// Forcing of the linear inhomogeneous equation at recorded step m: the
/// drift f (control term included) and the columns g e_j. An empty
/// diffusion vector means g = 0.
struct Forcing {
  std::function<GridFunction(int m)> drift;
  std::function<std::vector<GridFunction>(int m)> diffusion;
};

/// The drift and diffusion the solver applied to `traj` (taper, extension,
/// control and sqrt(epsilon) included).
Forcing solver_forcing(const solver::Model& model, const solver::Trajectory& traj);

enum class BoundMode {
  Pathwise,  // adds the realised martingale increments
  Mean,      // drops them; compare averages over paths
};

struct EnergyReport {
  std::vector<double> times;
  std::vector<double> e_values;
  /// E = L(e) and its bound E(0) + int V (+ martingale); gap = bound - E.
  std::vector<double> E_values;
  std::vector<double> bound_values;
  std::vector<double> gaps;
  std::vector<std::pair<double, double>> violations;  // (t, gap)
  double tol = 0.0;
  Outer L = Outer::Identity;
  int k = 1;

  bool ok() const { return violations.empty(); }
  double min_gap() const;
};

/// tol(dt) = 5 dt (1 + max e).
double energy_tolerance(double dt, double max_e);

/// Checks E(t, z(t)) <= E(0, z0) + int_0^t V + sum L'(e) <D^l v, D^l (g dW)>
/// at every recorded time with t < cone.horizon. Needs a state at every step.
/// Throws MissingIncrementLog when g != 0, the mode is pathwise and the
/// trajectory has no increment log.
EnergyReport verify_energy_inequality(const solver::Trajectory& traj, const Forcing& forcing, Outer L,
                                      const LightCone& cone, int k = 1,
                                      BoundMode mode = BoundMode::Pathwise);

/// Pointwise average of reports over paths with identical times; violations
/// recomputed against the averaged bound.
EnergyReport average_reports(const std::vector<EnergyReport>& reports);

/// |<v, A_u(v, v) - A_u(u_x, u_x)>_{L^2(B(x, T - t))}| with u_x the tangent
/// projection of the difference quotient (or `slope` when given).
double perpendicularity_residual(const geometry::Manifold& manifold, const State& z, double t,
                                 const LightCone& cone, const GridFunction* slope = nullptr);

/// t -> p0 exp(int_0^t rate), trapezoid rule on `steps` cells of [0, horizon];
/// linear interpolation of the exponent between nodes.
std::function<double(double)> gronwall_envelope(double p0, const std::function<double(double)>& rate,
                                                double horizon, int steps = 1024);

void write_report_csv(const std::string& path, const EnergyReport& report);
std::string report_summary_json(const EnergyReport& report);

}  // namespace geowave::energy
