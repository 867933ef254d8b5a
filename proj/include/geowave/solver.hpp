#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "geowave/function_spaces.hpp"
#include "geowave/geometry.hpp"
#include "geowave/noise.hpp"

namespace geowave::solver {

/// Time-discretised control hdot: piecewise constant on blocks of length dt,
/// one row of noise-basis coefficients per block.
struct Control {
  double dt = 0.0;
  int dim = 0;
  std::vector<double> coeffs;  // blocks x dim, row-major

  Control() = default;
  Control(double dt, int blocks, int dim) : dt(dt), dim(dim), coeffs(static_cast<size_t>(blocks) * dim, 0.0) {}

  int blocks() const { return dim > 0 ? static_cast<int>(coeffs.size()) / dim : 0; }
  double& at(int block, int k) { return coeffs[static_cast<size_t>(block) * dim + k]; }
  double at(int block, int k) const { return coeffs[static_cast<size_t>(block) * dim + k]; }
  /// Block index containing time t (clamped to the last block).
  int block_at(double t) const;
};

/// The target manifold, the diffusion field Y and the noise basis.
struct Model {
  std::shared_ptr<const geometry::Manifold> manifold;
  geometry::DiffusionField field;
  noise::NoiseBasis basis;

  static Model standard(const std::string& manifold_kind, const noise::SpectralMeasure& mu);
};

/// r: cone base radius; k: energy cut-off level.
struct LocalizationParams {
  double r = 0.0;
  double k = 1.0;
};

/// Optional diffusion depending on (u, u_t, u_x); used for the control term of
/// the skeleton equation only.
using GeneralDiffusion = std::function<Vec(const Vec& u, const Vec& v, const Vec& ux)>;

struct StepView {
  int step = 0;
  double t = 0.0;
  const State* state = nullptr;
  const GridFunction* slope = nullptr;
};

struct SolverOptions {
  double horizon = 1.0;
  /// Radius R of the observation cone B(center, R - t).
  double cone_radius = 2.0;
  double cone_center = 0.0;
  /// Cone base radius r; 0 selects R + T + dx.
  double base_radius = 0.0;
  /// Initial cut-off level; 0 selects ceil(2 ||xi||).
  double k_initial = 0.0;
  double k_max = 1024.0;
  bool escalate = true;
  bool renormalize = true;
  /// Record every `record_stride`-th state (0: first and last only).
  int record_stride = 1;
  bool record_slopes = false;
  /// Stopping level N and cone for tau_n = inf{t : ||Z(t)||_{H(B(x, T - t))} >= N} ^ T.
  double stopping_level = std::numeric_limits<double>::infinity();
  LightCone stopping_cone{0.0, 1.0};
  GeneralDiffusion general_diffusion;
  std::function<void(const StepView&)> observer;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<GridFunction> slopes;
  /// Per step m = 0..M: light-cone energy on B(center, R - t_m) and the
  /// localisation norm ||z||_{H_{r - t_m}}.
  std::vector<double> step_times;
  std::vector<double> energy_trace;
  std::vector<double> norm_trace;
  std::vector<double> taper_trace;
  /// (k, tau_k) for every level that was crossed.
  std::vector<std::pair<double, double>> k_hits;
  double k_final = 0.0;
  double tau_n = 0.0;
  /// Noise coefficients and control row used on each step.
  std::vector<std::vector<double>> increments;
  std::vector<std::vector<double>> control_rows;
  double max_constraint_residual = 0.0;
  int renormalizations = 0;
  // Metadata.
  uint64_t seed = 0;
  uint64_t trajectory_id = 0;
  double epsilon = 0.0;
  std::string control_id;
  double dx = 0.0;
  LocalizationParams loc;
  SolverOptions options;
};

/// C^2 bump equal to 1 on |x| <= r, 0 for |x| >= 2r.
double cutoff(double x, double r);
/// 1 for n <= k, 2 - n/k on [k, 2k], 0 beyond.
double taper(double norm, double k);

/// ||z||_{H_{r - t}} (unsquared H^2 x H^1 norm on (-(r - t), r - t)).
double localization_norm(const State& z, double t, const LocalizationParams& loc);

/// (0, taper E^1_{r-t}[A_u(v, v) - A_u(u_x, u_x)]).
State localized_drift(const Model& model, double t, const State& z, const LocalizationParams& loc);
/// For each basis mode e_k: (0, taper E^1_{r-t}[Y(u)] e_k).
std::vector<State> localized_diffusion(const Model& model, double t, const State& z,
                                       const LocalizationParams& loc);
/// (phi Upsilon(u), phi Upsilon'(u) v), phi = cutoff(., r).
State q_transform(const Model& model, const State& z, const LocalizationParams& loc);
/// Directional derivative of q_transform at z along w.
State q_transform_derivative(const Model& model, const State& z, const State& w,
                             const LocalizationParams& loc);

Trajectory solve_skeleton(const Model& model, const State& z0, const Control* h,
                          const SolverOptions& opts);
Trajectory solve_stochastic(const Model& model, const State& z0, double epsilon, const Control* h,
                            const SolverOptions& opts, uint64_t seed, uint64_t trajectory_id = 0);

/// First step time at which the localisation norm reaches each level, or T.
std::vector<std::pair<double, double>> blowup_times(const Trajectory& traj,
                                                    const std::vector<double>& levels);

/// max over the observation cone of the H^1 x L^2 distance, sup over recorded times.
double sup_cone_distance(const Trajectory& a, const Trajectory& b, int k = 0);

/// Rows on the observation cone; columns t, x, u_1.., v_1.., residual
/// (distance of u to the manifold).
void write_trajectory_csv(const std::string& path, const Trajectory& traj, const geometry::Manifold& manifold);
std::string trajectory_summary_json(const Trajectory& traj);

}  // namespace geowave::solver
