#pragma once

#include "geowave/function_spaces.hpp"

namespace geowave::wave {

/// t = shift_count * spacing exactly.
struct GroupStep {
  int shift_count = 0;
  double spacing = 1.0;

  double time() const { return shift_count * spacing; }
};

/// Throws NonLatticeTime unless t is an integer multiple of dx (to 1e-9 relative).
GroupStep lattice_step(double t, double dx);

/// S_t z on the lattice: exact d'Alembert shifts, trapezoid integral of v,
/// and the lattice-compatible derivative of u. S_s S_t = S_{s+t} holds
/// exactly in exact arithmetic. Throws InsufficientPadding when z is not
/// negligible within |t| of either end of the lattice.
State apply_group(const State& z, double t);
State apply_group(const State& z, GroupStep step);
/// As apply_group, treating values beyond the lattice as zero without the padding check.
State apply_group_unpadded(const State& z, GroupStep step);

/// (v, D^2 u) with D^2 the second-order difference used by function_spaces.
State generator(const State& z);

/// Derivative compatible with the trapezoid rule: u_j - u_{j-1} = dx/2 (D_j + D_{j-1}), D_0 = 0.
GridFunction compatible_derivative(const GridFunction& u);

/// sum_i (|D u_i|^2 + |v_i|^2) dx over the whole lattice, D the compatible derivative.
double free_energy(const State& z);

}  // namespace geowave::wave
