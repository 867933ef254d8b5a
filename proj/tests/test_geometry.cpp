#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "geowave/errors.hpp"
#include "geowave/geometry.hpp"

using geowave::Error;
using geowave::ErrorCode;
using namespace geowave::geometry;

namespace {

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

Vec v3(double a, double b, double c) {
  Vec x(3);
  x << a, b, c;
  return x;
}

Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = g(rng);
  return x;
}

// Uniform direction scaled to a radius drawn from [lo, hi].
Vec random_in_shell(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec d = random_vec(rng, n);
  return u(rng) * d / d.norm();
}

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::Io;
}

// Off-centre sphere of radius 2 supplied only through callbacks.
CallbackManifold shifted_sphere() {
  const Vec c = v3(0.3, -0.2, 0.5);
  const double R = 2.0;
  ManifoldCallbacks cb;
  cb.ambient_dim = 3;
  cb.tubular_radius = 1.0;
  cb.nearest_point = [c, R](const Vec& q) { return Vec(c + R * (q - c) / (q - c).norm()); };
  cb.tangent_projection = [c, R](const Vec& p, const Vec& a) {
    const Vec n = (p - c) / R;
    return Vec(a - n.dot(a) * n);
  };
  cb.second_fundamental_form = [c, R](const Vec& p, const Vec& xi, const Vec& eta) {
    return Vec(-xi.dot(eta) * (p - c) / (R * R));
  };
  return CallbackManifold(cb);
}

}  // namespace

TEST_CASE("project_tangent examples") {
  Sphere s1(2), s2(3);
  CHECK((s1.project_tangent(v2(1, 0), v2(3, 4)) - v2(0, 4)).norm() == 0.0);
  CHECK(s1.project_tangent(v2(0, 1), v2(0, 5)).norm() == 0.0);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    Vec p = random_vec(rng, 3);
    p /= p.norm();
    const Vec a = random_vec(rng, 3, 3.0);
    const Vec t = s2.project_tangent(p, a);
    CHECK(std::abs(t.dot(p)) < 1e-12);
    CHECK((s2.project_tangent(p, t) - t).norm() < 1e-14);
  }
  CHECK(code_of([&] { s2.project_tangent(v3(0, 0, 1.1), v3(1, 0, 0)); }) ==
        ErrorCode::PointOffManifold);
}

TEST_CASE("second fundamental form examples") {
  Sphere s1(2), s2(3);
  CHECK((s2.second_fundamental_form(v3(0, 0, 1), v3(1, 0, 0), v3(1, 0, 0)) - v3(0, 0, -1)).norm() ==
        0.0);
  CHECK(s2.second_fundamental_form(v3(0, 0, 1), v3(1, 0, 0), v3(0, 1, 0)).norm() == 0.0);
  CHECK((s1.second_fundamental_form(v2(0, 1), v2(2, 0), v2(2, 0)) - v2(0, -4)).norm() == 0.0);
  CHECK(code_of([&] { s2.second_fundamental_form(v3(0, 0, 1), v3(0, 0, 1), v3(1, 0, 0)); }) ==
        ErrorCode::VectorNotTangent);
  CHECK(code_of([&] { s2.second_fundamental_form(v3(0, 0, 2), v3(1, 0, 0), v3(1, 0, 0)); }) ==
        ErrorCode::PointOffManifold);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    Vec p = random_vec(rng, 3);
    p /= p.norm();
    const Vec xi = s2.tangent_part(p, random_vec(rng, 3));
    const Vec eta = s2.tangent_part(p, random_vec(rng, 3));
    const Vec a = s2.second_fundamental_form(p, xi, eta);
    CHECK((a - s2.second_fundamental_form(p, eta, xi)).norm() == 0.0);
    CHECK(s2.tangent_part(p, a).norm() < 1e-14);
  }
}

TEST_CASE("involution examples and invariants") {
  Sphere s1(2), s2(3);
  CHECK((s1.involution(v2(0.5, 0)) - v2(1.5, 0)).norm() < 1e-15);
  CHECK((s1.involution(v2(0, 1)) - v2(0, 1)).norm() == 0.0);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec q = random_in_shell(rng, 3, 0.3, 1.7);
    CHECK((s2.involution(s2.involution(q)) - q).norm() < 1e-12 * (1.0 + q.norm()));
  }
  // Fixed points are exactly M inside the neighbourhood.
  for (int i = 0; i < 200; ++i) {
    const Vec q = random_in_shell(rng, 2, 0.3, 1.7);
    const bool fixed = (s1.involution(q) - q).norm() < 1e-10;
    CHECK(fixed == (s1.distance(q) < 1e-10));
    Vec p = q / q.norm();
    CHECK((s1.involution(p) - p).norm() < 1e-10);
  }
  // Identity far away.
  CHECK((s2.involution(v3(0, 0, 3)) - v3(0, 0, 3)).norm() == 0.0);
  CHECK((s2.involution(v3(0, 0.05, 0)) - v3(0, 0.05, 0)).norm() == 0.0);
}

TEST_CASE("involution jacobian") {
  Sphere s1(2), s2(3);
  CHECK((s1.involution_jacobian(v2(1, 0), v2(0, 1)) - v2(0, 1)).norm() < 1e-15);
  CHECK((s1.involution_jacobian(v2(1, 0), v2(1, 0)) - v2(-1, 0)).norm() < 1e-15);
  CHECK(code_of([&] { s1.involution_jacobian(v2(0, 1.9), v2(1, 0)); }) ==
        ErrorCode::OutsideTubularNeighborhood);

  std::mt19937_64 rng(4);
  const Vec q = v3(0, 0, 0.8);
  const double d = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const Vec a = random_vec(rng, 3);
    const Vec fd = (s2.involution(q + d * a) - s2.involution(q - d * a)) / (2 * d);
    CHECK((s2.involution_jacobian(q, a) - fd).norm() < 1e-8);
  }
  // Eigenvalues +1 on tangent basis, -1 on the normal at sampled points.
  for (int i = 0; i < 50; ++i) {
    Vec p = random_vec(rng, 3);
    p /= p.norm();
    CHECK((s2.involution_jacobian(p, p) + p).norm() < 1e-14);
    Vec t = s2.tangent_part(p, random_vec(rng, 3));
    t /= t.norm();
    CHECK((s2.involution_jacobian(p, t) - t).norm() < 1e-14);
  }
}

TEST_CASE("involution hessian matches second differences") {
  Sphere s2(3);
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  for (int i = 0; i < 50; ++i) {
    const Vec q = random_in_shell(rng, 3, 0.15, 1.85);
    const Vec a = random_vec(rng, 3), b = random_vec(rng, 3);
    const Vec fd = (s2.involution(q + h * a + h * b) - s2.involution(q + h * a - h * b) -
                    s2.involution(q - h * a + h * b) + s2.involution(q - h * a - h * b)) /
                   (4 * h * h);
    CHECK((s2.involution_hessian(q, a, b) - fd).norm() < 1e-4 * (1.0 + fd.norm()));
  }
}

TEST_CASE("extended_sff_A") {
  Sphere s1(2), s2(3);
  CHECK((s2.extended_sff_A(v3(0, 0, 1), v3(1, 0, 0), v3(1, 0, 0)) - v3(0, 0, -1)).norm() < 1e-12);
  CHECK(s2.extended_sff_A(v3(0.2, 0.1, 0.9), v3(0, 0, 0), v3(1, 2, 3)).norm() == 0.0);

  std::mt19937_64 rng(6);
  // Restriction to the second fundamental form and symmetry.
  for (int i = 0; i < 100; ++i) {
    Vec p = random_vec(rng, 3);
    p /= p.norm();
    const Vec xi = s2.tangent_part(p, random_vec(rng, 3));
    const Vec eta = s2.tangent_part(p, random_vec(rng, 3));
    CHECK((s2.extended_sff_A(p, xi, eta) - s2.second_fundamental_form(p, xi, eta)).norm() < 1e-12);
    const Vec q = random_in_shell(rng, 3, 0.2, 1.8);
    const Vec a = random_vec(rng, 3), b = random_vec(rng, 3);
    CHECK((s2.extended_sff_A(q, a, b) - s2.extended_sff_A(q, b, a)).norm() == 0.0);
  }
  // Invariance: A_{Y(q)}(Y'a, Y'b) = Y'(q) A_q(a,b) + B_q(a,b), B by second differences.
  const double h = 1e-4;
  for (int i = 0; i < 100; ++i) {
    const Vec q = random_in_shell(rng, 2, 0.5, 1.5);
    const Vec a = random_vec(rng, 2), b = random_vec(rng, 2);
    const Vec lhs = s1.extended_sff_A(s1.involution(q), s1.involution_derivative(q, a),
                                      s1.involution_derivative(q, b));
    const Vec B = (s1.involution(q + h * a + h * b) - s1.involution(q + h * a - h * b) -
                   s1.involution(q - h * a + h * b) + s1.involution(q - h * a - h * b)) /
                  (4 * h * h);
    const Vec rhs = s1.involution_derivative(q, s1.extended_sff_A(q, a, b)) + B;
    CHECK((lhs - rhs).norm() < 1e-5);
  }
}

TEST_CASE("extended_sff_perp") {
  Sphere s1(2), s2(3);
  CHECK((s2.extended_sff_perp(v3(0, 0, 1), v3(1, 0, 5), v3(1, 0, -3)) - v3(0, 0, -1)).norm() <
        1e-15);
  CHECK(s2.extended_sff_perp(v3(0, 0, 1), v3(1, 0, 5), v3(0, 0, 0)).norm() == 0.0);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    Vec p = random_vec(rng, 3);
    p /= p.norm();
    const Vec a = random_vec(rng, 3), b = random_vec(rng, 3);
    const Vec out = s2.extended_sff_perp(p, a, b);
    const Vec ref = s2.second_fundamental_form(p, s2.project_tangent(p, a), s2.project_tangent(p, b));
    CHECK((out - ref).norm() < 1e-14);
    CHECK(s2.tangent_part(p, out).norm() < 1e-14);
    CHECK((out - s2.extended_sff_perp(p, b, a)).norm() == 0.0);
  }
  // Off the manifold the extension tracks the nearest-point value to O(dist^2).
  for (double dist : {1e-2, 5e-3, 2.5e-3}) {
    const Vec q = (1.0 + dist) * v2(0.6, 0.8);
    const Vec a = v2(0.3, -1.2), b = v2(-0.7, 0.4);
    const Vec p = s1.nearest_point(q);
    const Vec ref = s1.sff_unchecked(p, s1.tangent_part(p, a), s1.tangent_part(p, b));
    CHECK((s1.extended_sff_perp(q, a, b) - ref).norm() <= dist * dist);
  }
}

TEST_CASE("callback manifold agrees with closed-form shifted sphere") {
  const CallbackManifold m = shifted_sphere();
  const Vec c = v3(0.3, -0.2, 0.5);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 30; ++i) {
    Vec dir = random_vec(rng, 3);
    dir /= dir.norm();
    const Vec p = c + 2.0 * dir;
    const Vec xi = m.tangent_part(p, random_vec(rng, 3));
    const Vec eta = m.tangent_part(p, random_vec(rng, 3));
    const Vec expected = -xi.dot(eta) * dir / 2.0;
    CHECK((m.second_fundamental_form(p, xi, eta) - expected).norm() < 1e-12);
    CHECK((m.extended_sff_A(p, xi, eta) - expected).norm() < 1e-6);
    CHECK((m.extended_sff_perp(p, xi, eta) - expected).norm() < 1e-12);
    // Reflection across the sphere of radius 2: radius 2+s maps to 2-s.
    const Vec q = c + 2.4 * dir;
    CHECK((m.involution(q) - (c + 1.6 * dir)).norm() < 1e-12);
    CHECK((m.involution(m.involution(q)) - q).norm() < 1e-12);
    CHECK((m.involution_jacobian(p, dir) + dir).norm() < 1e-8);
  }
}

TEST_CASE("diffusion fields") {
  const DiffusionField y3 = DiffusionField::standard_for(Sphere(3));
  CHECK((y3(v3(1, 0, 0)) - v3(0, 1, 0)).norm() < 1e-15);
  CHECK(y3(v3(0, 0, 1)).norm() == 0.0);
  CHECK(y3(v3(0, 2.5, 0)).norm() == 0.0);
  const DiffusionField y2 = DiffusionField::standard_for(Sphere(2));
  CHECK((y2(v2(1, 0)) - v2(0, 1)).norm() < 1e-15);
  CHECK(DiffusionField::zero(3)(v3(1, 0, 0)).norm() == 0.0);

  Sphere s2(3), s1(2);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 500; ++i) {
    const Vec q = random_vec(rng, 3, 1.5);
    CHECK(y3(q).norm() <= y3.bound_constant() * (1.0 + q.norm()));
    if (q.norm() > y3.cutoff_radius()) CHECK(y3(q).norm() == 0.0);
    Vec p = q / q.norm();
    CHECK(std::abs(y3(p).dot(p)) < 1e-10);
    // Equivariance Y(Y(q)) = Y'(q) Y(q) on the neighbourhood.
    const Vec o = random_in_shell(rng, 3, 0.3, 1.7);
    CHECK((y3(s2.involution(o)) - s2.involution_derivative(o, y3(o))).norm() < 1e-6);
    const Vec o2 = random_in_shell(rng, 2, 0.3, 1.7);
    CHECK((y2(s1.involution(o2)) - s1.involution_derivative(o2, y2(o2))).norm() < 1e-6);
  }
}
