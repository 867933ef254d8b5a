#include "geowave/cli.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "geowave/energy.hpp"
#include "geowave/ldp.hpp"
#include "geowave/parallel.hpp"
#include "geowave/wave_group.hpp"
#include "json.hpp"

namespace geowave::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using solver::Control;
using solver::Model;
using solver::Trajectory;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::ConfigInvalid, key + ": " + what);
}

json parse_json(const std::string& key, const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    bad_key(key, "expected a JSON array, got '" + text + "'");
  }
}

std::string hex64(uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

json number(double x) { return std::isfinite(x) ? json(x) : json(std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf")); }

}  // namespace

// ---------------------------------------------------------------- config

const std::map<std::string, std::string>& config_schema() {
  static const std::map<std::string, std::string> schema{
      {"manifold.kind", "sphere"},
      {"grid.domain_radius", "6"},
      {"grid.points", "1536"},
      {"time.horizon", "1"},
      {"time.cone_radius", "2"},
      {"noise.atoms", "[[0, 1], [1, 0.5], [2, 0.25]]"},
      {"noise.seed", "1"},
      {"solver.k_max", "1024"},
      {"solver.renormalize", "true"},
      {"solver.record_stride", "16"},
      {"initial.amplitude", "0.5"},
      {"initial.speed", "0"},
      {"control.amplitude", "0"},
      {"control.blocks", "4"},
      {"control.mode", "0"},
      {"experiment.epsilon", "0.01"},
      {"experiment.trials", "20"},
      {"experiment.eps_list", "[0.01, 0.001, 0.0001]"},
      {"experiment.n_list", "[4, 8, 16, 32, 64]"},
      {"experiment.oscillation", "1"},
      {"experiment.delta", "0.5"},
      {"experiment.planted_norm", "0.5"},
      {"experiment.planted_seed", "0"},
      {"experiment.rate_blocks", "4"},
      {"experiment.gap_tol", "0.005"},
      {"experiment.budget", "inf"},
  };
  return schema;
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!config_schema().count(key)) bad_key(key, "unknown key (line " + std::to_string(number) + ")");
    if (c.values_.count(key)) bad_key(key, "given twice");
    if (value.empty()) bad_key(key, "empty value");
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!config_schema().count(key)) bad_key(key, "unknown key");
  values_[key] = value;
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const auto d = config_schema().find(key);
  if (d == config_schema().end()) bad_key(key, "unknown key");
  return d->second;
}

std::string Config::get_string(const std::string& key) const {
  std::string s = raw(key);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

double Config::get_double(const std::string& key) const {
  const std::string& s = raw(key);
  size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    bad_key(key, "expected a number, got '" + s + "'");
  }
  if (used != s.size()) bad_key(key, "expected a number, got '" + s + "'");
  return x;
}

int64_t Config::get_int(const std::string& key) const {
  const std::string& s = raw(key);
  size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(s, &used);
  } catch (const std::exception&) {
    bad_key(key, "expected an integer, got '" + s + "'");
  }
  if (used != s.size()) bad_key(key, "expected an integer, got '" + s + "'");
  return x;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& s = raw(key);
  if (s == "true") return true;
  if (s == "false") return false;
  bad_key(key, "expected true or false, got '" + s + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  const json j = parse_json(key, raw(key));
  if (!j.is_array()) bad_key(key, "expected an array of numbers");
  std::vector<double> out;
  for (const json& x : j) {
    if (!x.is_number()) bad_key(key, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::vector<double>> Config::get_pairs(const std::string& key) const {
  const json j = parse_json(key, raw(key));
  if (!j.is_array()) bad_key(key, "expected an array of [x, w] pairs");
  std::vector<std::vector<double>> out;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      bad_key(key, "expected an array of [x, w] pairs");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

std::string Config::canonical() const {
  std::ostringstream os;
  for (const auto& [key, def] : config_schema()) os << key << " = " << raw(key) << '\n';
  return os.str();
}

// ---------------------------------------------------------------- experiment

Experiment Experiment::from(const Config& config) {
  Experiment e;
  e.config = &config;
  e.manifold = config.get_string("manifold.kind");
  if (e.manifold != "circle" && e.manifold != "sphere") bad_key("manifold.kind", "must be circle or sphere");
  e.domain_radius = config.get_double("grid.domain_radius");
  if (!(e.domain_radius > 0.0)) bad_key("grid.domain_radius", "must be positive");
  const int64_t points = config.get_int("grid.points");
  if (points < 64 || points > (1 << 22)) bad_key("grid.points", "must be at least 64");
  e.points = static_cast<int>(points);
  e.horizon = config.get_double("time.horizon");
  if (!(e.horizon > 0.0) || !(e.horizon < e.domain_radius)) bad_key("time.horizon", "need 0 < horizon < domain_radius");
  const double dx = e.domain_radius / e.points;
  const double steps = e.horizon / dx;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
    bad_key("time.horizon", "must be a multiple of the lattice spacing domain_radius/points");
  e.cone_radius = config.get_double("time.cone_radius");
  if (!(e.cone_radius > 0.0)) bad_key("time.cone_radius", "must be positive");
  if (e.cone_radius + e.horizon + dx > e.domain_radius + 1e-12)
    bad_key("time.cone_radius", "cone_radius + horizon + spacing must fit in domain_radius");

  for (const auto& p : config.get_pairs("noise.atoms")) {
    if (!(p[1] >= 0.0) || !(p[0] >= 0.0)) bad_key("noise.atoms", "frequencies and weights must be nonnegative");
    e.measure.atoms.push_back({p[0], p[1]});
  }
  if (e.measure.atoms.empty()) bad_key("noise.atoms", "needs at least one atom");
  const int64_t seed = config.get_int("noise.seed");
  if (seed < 0) bad_key("noise.seed", "must be nonnegative");
  e.seed = static_cast<uint64_t>(seed);

  e.solver.horizon = e.horizon;
  e.solver.cone_radius = e.cone_radius;
  e.solver.k_max = config.get_double("solver.k_max");
  if (!(e.solver.k_max > 0.0)) bad_key("solver.k_max", "must be positive");
  e.solver.renormalize = config.get_bool("solver.renormalize");
  const int64_t stride = config.get_int("solver.record_stride");
  if (stride < 0) bad_key("solver.record_stride", "must be nonnegative");
  e.solver.record_stride = static_cast<int>(stride);

  e.amplitude = config.get_double("initial.amplitude");
  e.speed = config.get_double("initial.speed");
  e.control_amplitude = config.get_double("control.amplitude");
  const int64_t blocks = config.get_int("control.blocks");
  if (blocks < 1) bad_key("control.blocks", "must be at least 1");
  e.control_blocks = static_cast<int>(blocks);
  const int64_t mode = config.get_int("control.mode");
  const int dim = noise::build_basis(e.measure).dim();
  if (mode < 0 || mode >= dim) bad_key("control.mode", "must index a noise mode below " + std::to_string(dim));
  e.control_mode = static_cast<int>(mode);
  return e;
}

GridFunction Experiment::lattice() const {
  return GridFunction::lattice(domain_radius, points, manifold == "circle" ? 2 : 3);
}

State Experiment::initial_state() const {
  const GridFunction lat = lattice();
  State z{lat.zeros_like(), lat.zeros_like()};
  for (int i = 0; i < lat.size(); ++i) {
    const double x = lat.x(i), g = amplitude * std::exp(-x * x);
    if (manifold == "circle") {
      Vec q(2), w(2);
      q << std::cos(g), std::sin(g);
      w << -speed * std::sin(g), speed * std::cos(g);
      z.u.set_point(i, q);
      z.v.set_point(i, w);
    } else {
      Vec q(3), w(3);
      q << g, 0.75 * x * g, 1.0;
      q.normalize();
      // Rotation about the first axis: e_1 x q.
      w << 0.0, -speed * q[2], speed * q[1];
      z.u.set_point(i, q);
      z.v.set_point(i, w);
    }
  }
  return z;
}

Control Experiment::control(int dim) const {
  Control h(horizon / control_blocks, control_blocks, dim);
  for (int b = 0; b < control_blocks; ++b) h.at(b, control_mode) = control_amplitude;
  return h;
}

int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

// ---------------------------------------------------------------- verify suite

namespace {

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

using Rng = std::mt19937_64;

Vec random_unit(Rng& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = g(rng);
  return v / v.norm();
}

Vec random_tangent(Rng& rng, const geometry::Manifold& m, const Vec& p) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec a(m.ambient_dim());
  for (int k = 0; k < a.size(); ++k) a[k] = g(rng);
  return m.tangent_part(p, a);
}

double max_abs(const GridFunction& a, const GridFunction& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

double max_abs(const State& a, const State& b) { return std::max(max_abs(a.u, b.u), max_abs(a.v, b.v)); }

GridFunction scalar(const GridFunction& like, const std::function<double(double)>& f) {
  return GridFunction::sample(like, [&](double x) {
    Vec p(1);
    p << f(x);
    return p;
  });
}

std::function<double(double)> random_trig(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = u(rng), w1 = 2.0 * u(rng), w2 = 3.0 * u(rng), c = u(rng);
  return [=](double x) { return a * std::cos(w1 * x) + b * std::sin(w2 * x + c); };
}

State bumps(const GridFunction& lat, Rng& rng, double support, double sharpness = 4.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> c(-0.5, 0.5);
  State z{lat.zeros_like(), lat.zeros_like()};
  for (int b = 0; b < 3; ++b) {
    const double x0 = c(rng), w = sharpness * (1.0 + std::abs(c(rng)));
    for (int k = 0; k < lat.dim(); ++k) {
      const double au = g(rng), av = g(rng);
      for (int i = 0; i < lat.size(); ++i) {
        const double x = lat.x(i);
        const double env = std::abs(x) < support ? std::exp(-w * (x - x0) * (x - x0)) : 0.0;
        z.u.at(i, k) += au * env;
        z.v.at(i, k) += av * env;
      }
    }
  }
  return z;
}

State sphere_bump(const GridFunction& lat, double amp, double phase) {
  State z{lat.zeros_like(), lat.zeros_like()};
  for (int i = 0; i < lat.size(); ++i) {
    const double x = lat.x(i), g = std::exp(-x * x);
    Vec q(3), w(3);
    q << 0.4 * amp * g, 0.3 * amp * std::sin(x + phase) * g, 1.0;
    q.normalize();
    w << 0.3 * amp * g, -0.2 * amp * g, 0.1 * x * g;
    z.u.set_point(i, q);
    z.v.set_point(i, w - w.dot(q) * q);
  }
  return z;
}

Control wavy(int dim, double horizon, int blocks, double amp) {
  Control h(horizon / blocks, blocks, dim);
  for (int b = 0; b < blocks; ++b)
    for (int k = 0; k < dim; ++k) h.at(b, k) = amp * std::cos(0.7 * b + 1.1 * k);
  return h;
}

struct Suite {
  const Experiment& ex;
  std::vector<std::pair<std::string, std::function<std::pair<double, double>(Rng&)>>> groups;

  void add(std::string name, std::function<std::pair<double, double>(Rng&)> fn) {
    groups.emplace_back(std::move(name), std::move(fn));
  }
};

std::vector<std::shared_ptr<const geometry::Manifold>> both_manifolds() {
  return {geometry::make_manifold("circle"), geometry::make_manifold("sphere")};
}

void add_geometry(Suite& s) {
  const int n = 200;
  s.add("geometry.fixed_points", [n](Rng& rng) {
    double worst = 0.0;
    for (const auto& m : both_manifolds())
      for (int t = 0; t < n; ++t) {
        const Vec p = random_unit(rng, m->ambient_dim());
        worst = std::max(worst, (m->involution(p) - p).norm());
      }
    return std::pair{worst, 1e-12};
  });
  s.add("geometry.involutivity", [n](Rng& rng) {
    std::uniform_real_distribution<double> off(-0.6, 0.6);
    double worst = 0.0;
    for (const auto& m : both_manifolds())
      for (int t = 0; t < n; ++t) {
        const Vec q = (1.0 + off(rng)) * random_unit(rng, m->ambient_dim());
        worst = std::max(worst, (m->involution(m->involution(q)) - q).norm() / (1.0 + q.norm()));
      }
    return std::pair{worst, 1e-12};
  });
  s.add("geometry.jacobian_signs", [n](Rng& rng) {
    double worst = 0.0;
    for (const auto& m : both_manifolds())
      for (int t = 0; t < n; ++t) {
        const Vec p = random_unit(rng, m->ambient_dim());
        const Vec xi = random_tangent(rng, *m, p);
        worst = std::max(worst, (m->involution_jacobian(p, xi) - xi).norm());
        worst = std::max(worst, (m->involution_jacobian(p, p) + p).norm());
      }
    return std::pair{worst, 1e-10};
  });
  s.add("geometry.sff_symmetric", [n](Rng& rng) {
    double worst = 0.0;
    for (const auto& m : both_manifolds())
      for (int t = 0; t < n; ++t) {
        const Vec p = random_unit(rng, m->ambient_dim());
        const Vec a = random_tangent(rng, *m, p), b = random_tangent(rng, *m, p);
        worst = std::max(worst, (m->second_fundamental_form(p, a, b) - m->second_fundamental_form(p, b, a)).norm());
      }
    return std::pair{worst, 1e-12};
  });
  s.add("geometry.sff_normal", [n](Rng& rng) {
    double worst = 0.0;
    for (const auto& m : both_manifolds())
      for (int t = 0; t < n; ++t) {
        const Vec p = random_unit(rng, m->ambient_dim());
        const Vec a = random_tangent(rng, *m, p), b = random_tangent(rng, *m, p);
        worst = std::max(worst, m->tangent_part(p, m->second_fundamental_form(p, a, b)).norm());
      }
    return std::pair{worst, 1e-12};
  });
  s.add("geometry.extension_consistency", [n](Rng& rng) {
    double worst = 0.0;
    for (const auto& m : both_manifolds())
      for (int t = 0; t < n; ++t) {
        const Vec p = random_unit(rng, m->ambient_dim());
        const Vec a = random_tangent(rng, *m, p), b = random_tangent(rng, *m, p);
        const Vec A = m->second_fundamental_form(p, a, b);
        worst = std::max(worst, (m->extended_sff_A(p, a, b) - A).norm());
        worst = std::max(worst, (m->extended_sff_perp(p, a, b) - A).norm());
      }
    return std::pair{worst, 1e-12};
  });
  s.add("geometry.diffusion_tangent", [n](Rng& rng) {
    double worst = 0.0;
    for (const auto& m : both_manifolds()) {
      const auto Y = geometry::DiffusionField::standard_for(*m);
      for (int t = 0; t < n; ++t) {
        const Vec p = random_unit(rng, m->ambient_dim());
        const Vec y = Y(p);
        worst = std::max(worst, (y - m->tangent_part(p, y)).norm());
      }
    }
    return std::pair{worst, 1e-12};
  });
}

void add_function_spaces(Suite& s) {
  const GridFunction lat(-5.0, 1.0 / 64, 641, 1);
  s.add("function_spaces.extension_reproduces", [lat](Rng& rng) {
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const GridFunction f = scalar(lat, random_trig(rng));
      for (int k = 0; k <= 2; ++k) {
        const GridFunction e = extend(f, 1.7, k, 0.3);
        for (int i = 0; i < e.size(); ++i)
          if (std::abs(e.x(i) - 0.3) <= 1.7) worst = std::max(worst, std::abs(e.at(i, 0) - f.at(i, 0)));
      }
    }
    return std::pair{worst, 0.0};
  });
  s.add("function_spaces.extension_bound", [lat](Rng& rng) {
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const GridFunction f = scalar(lat, random_trig(rng));
      for (int k = 0; k <= 2; ++k) worst = std::max(worst, extension_ratio(f, 1.5, k));
    }
    return std::pair{worst, 20.0};
  });
  s.add("function_spaces.norm_nesting", [lat](Rng& rng) {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const GridFunction f = scalar(lat, random_trig(rng));
      double prev = 0.0;
      for (int k = 0; k <= 2; ++k) {
        const double nk = sobolev_norm(f, -2.0, 2.5, k);
        worst = std::max(worst, prev - nk);
        prev = nk;
      }
    }
    return std::pair{worst, 0.0};
  });
  s.add("function_spaces.interpolation", [](Rng& rng) {
    const GridFunction fine(-4.0, 1.0 / 128, 1025, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double failures = 0.0;
    for (int t = 0; t < 200; ++t) {
      const GridFunction f = scalar(fine, random_trig(rng));
      const double a = -3.5 + 2.0 * u(rng);
      if (!interpolation_check(f, a, a + 0.05 + 4.0 * u(rng), InterpolationVariant::Standard).holds) failures += 1.0;
      if (!interpolation_check(f, a, a + 1.0 + 2.0 * u(rng), InterpolationVariant::GagliardoNirenberg).holds)
        failures += 1.0;
    }
    return std::pair{failures, 0.0};
  });
  s.add("function_spaces.csv_round_trip", [lat](Rng& rng) {
    const State z{scalar(lat, random_trig(rng)), scalar(lat, random_trig(rng))};
    const fs::path prefix = fs::temp_directory_path() / ("geowave_verify_" + std::to_string(::getpid()));
    write_state(prefix.string(), z);
    const State back = read_state(prefix.string());
    fs::remove(prefix.string() + ".u.csv");
    fs::remove(prefix.string() + ".v.csv");
    return std::pair{max_abs(z, back), 0.0};
  });
}

void add_noise(Suite& s) {
  const noise::SpectralMeasure mu = s.ex.measure;
  s.add("noise.kernel_covariance", [mu](Rng& rng) {
    const noise::NoiseBasis basis = noise::build_basis(mu);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
      const double x = u(rng), y = u(rng);
      worst = std::max(worst, std::abs(basis.kernel(x, y) - noise::covariance(mu, x, y)));
    }
    return std::pair{worst, 1e-12};
  });
  s.add("noise.increment_variance", [mu, seed = s.ex.seed](Rng&) {
    const noise::NoiseBasis basis = noise::build_basis(mu);
    const int draws = 100000, d = basis.dim();
    const double dt = 0.01;
    std::vector<double> sq(d, 0.0), cross(d, 0.0);
    for (int n = 0; n < draws; ++n) {
      noise::RngStream rng(seed, 1u << 20, n);
      const auto inc = noise::sample_increment(basis, dt, rng);
      for (int k = 0; k < d; ++k) {
        sq[k] += inc.coeffs[k] * inc.coeffs[k];
        cross[k] += inc.coeffs[k] * inc.coeffs[(k + 1) % d];
      }
    }
    // Sample second moment of N(0, dt): sd dt sqrt(2 / draws); cross moment: dt / sqrt(draws).
    double z = 0.0;
    for (int k = 0; k < d; ++k) {
      z = std::max(z, std::abs(sq[k] / draws - dt) / (dt * std::sqrt(2.0 / draws)));
      if (d > 1) z = std::max(z, std::abs(cross[k] / draws) / (dt / std::sqrt(1.0 * draws)));
    }
    return std::pair{z, 5.0};
  });
  s.add("noise.covariance_stationarity", [mu, seed = s.ex.seed](Rng&) {
    const noise::NoiseBasis basis = noise::build_basis(mu);
    const GridFunction lat = GridFunction::lattice(6.0, 48, 1);
    const int samples = 20000, i0 = 10;
    const int lags[] = {0, 3, 7, 12, 20}, shifts[] = {0, 25, 50};
    const double dt = 0.1;
    double acc[3][5] = {}, acc2[3][5] = {};
    for (int n = 0; n < samples; ++n) {
      noise::RngStream rng(seed, 1u << 21, n);
      const GridFunction w = noise::evaluate_field(noise::sample_increment(basis, dt, rng), basis, lat);
      for (int a = 0; a < 3; ++a)
        for (int l = 0; l < 5; ++l) {
          const double p = w.at(i0 + shifts[a], 0) * w.at(i0 + shifts[a] + lags[l], 0);
          acc[a][l] += p;
          acc2[a][l] += p * p;
        }
    }
    double z = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int l = 0; l < 5; ++l) {
        const double x = lat.x(i0 + shifts[a]), y = lat.x(i0 + shifts[a] + lags[l]);
        const double mean = acc[a][l] / samples;
        const double sd = std::sqrt((acc2[a][l] / samples - mean * mean) / samples);
        z = std::max(z, std::abs(mean - dt * noise::covariance(mu, x, y)) / sd);
      }
    return std::pair{z, 5.0};
  });
  s.add("noise.hs_embedding", [mu](Rng&) {
    double closed = 0.0;
    for (const noise::Atom& a : mu.atoms) {
      const double x2 = a.frequency * a.frequency;
      closed += a.weight * std::sqrt(M_PI) * (2.75 + 5.0 * x2 + x2 * x2);
    }
    return std::pair{std::abs(noise::hs_embedding_norm(mu) - closed) / closed, 1e-9};
  });
  s.add("noise.multiplication_bound", [mu](Rng& rng) {
    const noise::NoiseBasis basis = noise::build_basis(mu);
    const GridFunction lat(-10.0, 1.0 / 64, 1281, 2);
    const double c = noise::multiplication_hs_constant(basis);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const double x0 = u(rng), a = -3.0 + u(rng);
      const GridFunction g = GridFunction::sample(lat, [x0](double x) {
        Vec p(2);
        p << std::exp(-(x - x0) * (x - x0)), std::sin(x) * std::exp(-0.5 * (x - x0) * (x - x0));
        return p;
      });
      for (int k = 0; k <= 2; ++k)
        worst = std::max(worst, noise::multiplication_hs_norm(g, basis, a, a + 3.0, k) /
                                    (c * sobolev_norm(g, a, a + 3.0, k)));
    }
    return std::pair{worst, 1.0};
  });
  s.add("noise.rng_keyed", [seed = s.ex.seed](Rng&) {
    double bad = 0.0;
    for (uint64_t t = 0; t < 20; ++t) {
      noise::RngStream a(seed, t, 3), b(seed, t, 3), c(seed, t + 1, 3), d(seed, t, 4);
      for (int k = 0; k < 16; ++k) {
        const double x = a.normal();
        if (x != b.normal()) bad += 1.0;
        if (x == c.normal() || x == d.normal()) bad += 1.0;
      }
    }
    return std::pair{bad, 0.0};
  });
}

void add_wave(Suite& s) {
  const GridFunction lat = GridFunction::lattice(6.0, 384, 3);
  const double h = lat.spacing();
  s.add("wave.group_law", [lat, h](Rng& rng) {
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
      const State z = bumps(lat, rng, 2.0);
      const int a = 20 + 17 * t, b = 55 - 9 * t;
      worst = std::max(worst, max_abs(wave::apply_group(wave::apply_group(z, a * h), b * h),
                                      wave::apply_group(z, (a + b) * h)));
      worst = std::max(worst, max_abs(wave::apply_group(wave::apply_group(z, a * h), -b * h),
                                      wave::apply_group(z, (a - b) * h)));
    }
    return std::pair{worst, 1e-12};
  });
  s.add("wave.reversibility", [lat, h](Rng& rng) {
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
      const State z = bumps(lat, rng, 2.0);
      const int a = 40 + 30 * t;
      worst = std::max(worst, max_abs(wave::apply_group(wave::apply_group(z, a * h), -a * h), z));
    }
    return std::pair{worst, 1e-12};
  });
  s.add("wave.finite_speed", [lat, h](Rng& rng) {
    State z = bumps(lat, rng, 2.0);
    const double x0 = 0.4, R = 1.0;
    for (int i = 0; i < lat.size(); ++i)
      if (std::abs(lat.x(i) - x0) <= R + 1e-12)
        for (int c = 0; c < lat.dim(); ++c) z.u.at(i, c) = z.v.at(i, c) = 0.0;
    double worst = 0.0;
    for (int m : {1, 50, 128, 255}) {
      const State w = wave::apply_group(z, m * h);
      for (int i = 0; i < lat.size(); ++i)
        if (std::abs(lat.x(i) - x0) <= R - m * h + 1e-12)
          for (int c = 0; c < lat.dim(); ++c)
            worst = std::max({worst, std::abs(w.u.at(i, c)), std::abs(w.v.at(i, c))});
    }
    return std::pair{worst, 0.0};
  });
  s.add("wave.free_energy", [lat, h](Rng& rng) {
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
      const State z = bumps(lat, rng, 2.0);
      const double e0 = wave::free_energy(z);
      for (int m : {1, 64, 256, -100})
        worst = std::max(worst, std::abs(wave::free_energy(wave::apply_group(z, m * h)) - e0) / e0);
    }
    return std::pair{worst, 1e-10};
  });
}

solver::SolverOptions base_options(const Experiment& ex) {
  solver::SolverOptions o;
  o.horizon = ex.horizon;
  o.cone_radius = ex.cone_radius;
  o.k_max = ex.solver.k_max;
  o.renormalize = ex.solver.renormalize;
  return o;
}

void add_solver(Suite& s) {
  const Experiment& ex = s.ex;
  const auto lat2 = GridFunction::lattice(ex.domain_radius, ex.points, 2);
  const auto lat3 = GridFunction::lattice(ex.domain_radius, ex.points, 3);
  const solver::SolverOptions opts = base_options(ex);
  const noise::SpectralMeasure mu = ex.measure;
  const double T = ex.horizon, R = ex.cone_radius;

  s.add("solver.constant_map", [=](Rng& rng) {
    const Model model = Model::standard("sphere", mu);
    const Vec p = random_unit(rng, 3);
    const State z{GridFunction::sample(lat3, [&](double) { return p; }), lat3.zeros_like()};
    const Trajectory tr = solver::solve_skeleton(model, z, nullptr, opts);
    double worst = 0.0;
    for (const State& w : tr.states)
      for (int i = 0; i < lat3.size(); ++i)
        if (std::abs(lat3.x(i)) <= R - T) worst = std::max(worst, (w.u.point(i) - p).norm() + w.v.point(i).norm());
    return std::pair{worst, 1e-14};
  });
  s.add("solver.rotating_geodesic", [=](Rng&) {
    const Model model = Model::standard("circle", mu);
    const double w = 1.3;
    State z{GridFunction::sample(lat2, [](double) { Vec p(2); p << 1.0, 0.0; return p; }),
            GridFunction::sample(lat2, [w](double) { Vec p(2); p << 0.0, w; return p; })};
    const Trajectory tr = solver::solve_skeleton(model, z, nullptr, opts);
    double worst = 0.0;
    for (size_t m = 0; m < tr.states.size(); ++m) {
      const double t = tr.times[m];
      Vec u(2), v(2);
      u << std::cos(w * t), std::sin(w * t);
      v << -w * std::sin(w * t), w * std::cos(w * t);
      for (int i = 0; i < lat2.size(); ++i)
        if (std::abs(lat2.x(i)) <= R - t)
          worst = std::max(worst, (tr.states[m].u.point(i) - u).norm() + (tr.states[m].v.point(i) - v).norm());
    }
    return std::pair{worst, 1e-3};
  });
  s.add("solver.constraint_residual", [=, seed = ex.seed](Rng&) {
    const Model model = Model::standard("sphere", mu);
    const Control h = wavy(model.basis.dim(), T, 8, 1.0);
    const Trajectory tr = solver::solve_stochastic(model, sphere_bump(lat3, 1.0, 0.0), 0.05, &h, opts, seed, 101);
    return std::pair{tr.max_constraint_residual, 1e-9};
  });
  s.add("solver.local_uniqueness", [=, seed = ex.seed](Rng& rng) {
    const Model model = Model::standard("sphere", mu);
    const Control h = wavy(model.basis.dim(), T, 4, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const State a = sphere_bump(lat3, 1.0, 0.0);
    State b = a;
    const double k1 = 3.0 * u(rng), k2 = u(rng);
    for (int i = 0; i < lat3.size(); ++i) {
      const double x = lat3.x(i);
      if (std::abs(x) <= R) continue;
      Vec q = b.u.point(i);
      q[0] += 0.3 * std::sin(k1 * x);
      q.normalize();
      b.u.set_point(i, q);
      Vec w(3);
      w << 0.2, 0.5 * std::cos(x + k2), -0.1;
      b.v.set_point(i, w - w.dot(q) * q);
    }
    solver::SolverOptions o = opts;
    const Trajectory ta = solver::solve_stochastic(model, a, 0.1, &h, o, seed, 102);
    const Trajectory tb = solver::solve_stochastic(model, b, 0.1, &h, o, seed, 102);
    double diff = 0.0;
    for (size_t j = 0; j < ta.states.size(); ++j)
      for (int i = 0; i < lat3.size(); ++i)
        if (std::abs(lat3.x(i)) <= R - ta.times[j])
          diff = std::max(diff, (ta.states[j].u.point(i) - tb.states[j].u.point(i)).norm() +
                                    (ta.states[j].v.point(i) - tb.states[j].v.point(i)).norm());
    return std::pair{diff, 1e-10};
  });
  s.add("solver.zero_noise", [=, seed = ex.seed](Rng&) {
    const Model model = Model::standard("sphere", mu);
    const Control h = wavy(model.basis.dim(), T, 4, 0.5);
    const State z = sphere_bump(lat3, 1.0, 0.3);
    const Trajectory a = solver::solve_skeleton(model, z, &h, opts);
    const Trajectory b = solver::solve_stochastic(model, z, 0.0, &h, opts, seed, 103);
    return std::pair{max_abs(a.states.back(), b.states.back()), 0.0};
  });
  s.add("solver.taper_consistency", [=, seed = ex.seed](Rng&) {
    const Model model = Model::standard("sphere", mu);
    const State z = sphere_bump(lat3, 1.0, 0.0);
    solver::SolverOptions o = opts;
    o.escalate = false;
    const Trajectory base = solver::solve_stochastic(model, z, 0.05, nullptr, o, seed, 104);
    double top = 0.0;
    for (double n : base.norm_trace) top = std::max(top, n);
    o.k_initial = std::ceil(top) + 1.0;
    const Trajectory a = solver::solve_stochastic(model, z, 0.05, nullptr, o, seed, 104);
    o.k_initial += 1.0;
    const Trajectory b = solver::solve_stochastic(model, z, 0.05, nullptr, o, seed, 104);
    return std::pair{max_abs(a.states.back(), b.states.back()), 0.0};
  });
}

void add_energy(Suite& s) {
  const Experiment& ex = s.ex;
  const auto lat3 = GridFunction::lattice(ex.domain_radius, ex.points, 3);
  const solver::SolverOptions opts = base_options(ex);
  const noise::SpectralMeasure mu = ex.measure;
  const LightCone cone{0.0, ex.cone_radius};

  s.add("energy.free_wave", [](Rng& rng) {
    const GridFunction lat = GridFunction::lattice(6.0, 384, 2);
    double worst = 0.0;
    for (int t = 0; t < 2; ++t) {
      const State z0 = bumps(lat, rng, lat.last_x(), 0.5);
      Trajectory tr;
      for (int m = 0; m <= 128; ++m) {
        tr.times.push_back(m * lat.spacing());
        tr.states.push_back(wave::apply_group_unpadded(z0, {m, lat.spacing()}));
      }
      for (int k : {0, 1}) {
        const auto rep = energy::verify_energy_inequality(tr, energy::Forcing{}, energy::Outer::Identity,
                                                          LightCone{0.2, 2.0}, k);
        worst = std::max(worst, -rep.min_gap());
      }
    }
    return std::pair{worst, 1e-8};
  });
  for (energy::Outer L : {energy::Outer::Identity, energy::Outer::Log1p}) {
    s.add("energy.pathwise_" + energy::to_string(L), [=, seed = ex.seed](Rng&) {
      const Model model = Model::standard("sphere", mu);
      double violations = 0.0;
      for (uint64_t path = 0; path < 2; ++path) {
        const Trajectory tr = solver::solve_stochastic(model, sphere_bump(lat3, 1.0, 0.0), 0.01, nullptr, opts,
                                                       seed, 200 + path);
        violations += energy::verify_energy_inequality(tr, energy::solver_forcing(model, tr), L, cone)
                          .violations.size();
      }
      return std::pair{violations, 0.0};
    });
  }
  s.add("energy.perpendicularity", [=, seed = ex.seed](Rng&) {
    const Model model = Model::standard("sphere", mu);
    solver::SolverOptions o = opts;
    o.record_slopes = true;
    o.record_stride = 8;
    const Trajectory tr = solver::solve_stochastic(model, sphere_bump(lat3, 2.0, 0.0), 0.05, nullptr, o, seed, 210);
    double worst = 0.0;
    for (size_t m = 0; m < tr.states.size(); ++m) {
      const double t = tr.times[m];
      if (t >= cone.horizon) break;
      const double e = energy::energy(t, tr.states[m], cone, 1);
      worst = std::max(worst, energy::perpendicularity_residual(*model.manifold, tr.states[m], t, cone) / (1.0 + e));
      worst = std::max(worst, energy::perpendicularity_residual(*model.manifold, tr.states[m], t, cone,
                                                                &tr.slopes[m]) /
                                  (1.0 + e));
    }
    return std::pair{worst, 1e-8};
  });
  s.add("energy.trace_consistency", [=](Rng&) {
    const Model model = Model::standard("sphere", mu);
    const Control h = wavy(model.basis.dim(), ex.horizon, 4, 0.5);
    const Trajectory tr = solver::solve_skeleton(model, sphere_bump(lat3, 1.0, 0.0), &h, opts);
    const auto rep = energy::verify_energy_inequality(tr, energy::solver_forcing(model, tr), energy::Outer::Identity,
                                                      cone);
    double worst = 0.0;
    for (size_t m = 0; m < rep.e_values.size(); ++m)
      worst = std::max(worst, std::abs(rep.e_values[m] - tr.energy_trace[m]) / (1.0 + tr.energy_trace[m]));
    return std::pair{worst, 1e-12};
  });
}

void add_ldp(Suite& s) {
  const noise::SpectralMeasure mu = s.ex.measure;
  s.add("ldp.control_norm", [](Rng& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const double c = u(rng);
      Control h(0.125, 8, 3);
      for (int b = 0; b < 8; ++b) h.at(b, 1) = c;
      worst = std::max(worst, std::abs(ldp::control_norm(h) - c * c));
    }
    return std::pair{worst, 1e-14};
  });
  s.add("ldp.weak_null", [](Rng&) {
    const Control zero(1.0 / 256, 256, 5);
    double worst = 0.0;
    for (int n : {4, 8, 16, 32, 64}) {
      const Control h = ldp::oscillating_control(zero, 1.0, n, 1.0);
      double sum = 0.0;
      for (int b = 0; b < h.blocks(); ++b) sum += h.at(b, 0) * h.dt;
      worst = std::max({worst, std::abs(sum), std::abs(ldp::control_norm(h) - 0.5)});
    }
    return std::pair{worst, 1e-9};
  });
  s.add("ldp.uncontrolled_rate", [mu](Rng&) {
    const Model model = Model::standard("circle", mu);
    const GridFunction lat = GridFunction::lattice(6.0, 192, 2);
    State z{lat.zeros_like(), lat.zeros_like()};
    for (int i = 0; i < lat.size(); ++i) {
      const double th = 0.5 * std::exp(-lat.x(i) * lat.x(i));
      Vec q(2);
      q << std::cos(th), std::sin(th);
      z.u.set_point(i, q);
    }
    solver::SolverOptions o;
    o.record_stride = 4;
    const Trajectory free = solver::solve_skeleton(model, z, nullptr, o);
    const ldp::RateResult r = ldp::rate_function(model, z, free, o, ldp::RateOptions{});
    return std::pair{r.value, 1e-6};
  });
}

std::vector<Check> run_verify(const Experiment& ex, int threads) {
  Suite suite{ex, {}};
  add_geometry(suite);
  add_function_spaces(suite);
  add_noise(suite);
  add_wave(suite);
  add_solver(suite);
  add_energy(suite);
  add_ldp(suite);
  std::vector<Check> out(suite.groups.size());
  parallel_for(static_cast<int>(suite.groups.size()), threads, [&](int g) {
    const auto& [name, fn] = suite.groups[g];
    Rng rng(ex.seed ^ fnv1a(name));
    Check c{name};
    try {
      std::tie(c.value, c.bound) = fn(rng);
      c.pass = c.value <= c.bound;
    } catch (const Error& e) {
      c.value = c.bound = std::numeric_limits<double>::quiet_NaN();
      std::cerr << name << ": " << e.what() << '\n';
    }
    out[g] = c;
  });
  return out;
}

// ---------------------------------------------------------------- commands

struct Run {
  const Experiment& ex;
  fs::path out;
  int threads = 1;
  std::vector<std::string> outputs;

  std::string path(const std::string& name) {
    outputs.push_back(name);
    return (out / name).string();
  }
  void text(const std::string& name, const std::string& body) { write_file(path(name), body); }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
};

// Every `stride`-th recorded state plus the last one.
Trajectory thinned(const Trajectory& tr, int stride) {
  Trajectory t = tr;
  if (stride <= 1) return t;
  t.times.clear();
  t.states.clear();
  t.slopes.clear();
  for (size_t m = 0; m < tr.states.size(); ++m)
    if (m % stride == 0 || m + 1 == tr.states.size()) {
      t.times.push_back(tr.times[m]);
      t.states.push_back(tr.states[m]);
    }
  return t;
}

Control per_step(const Experiment& ex, const Control& h) {
  const GridFunction lat = ex.lattice();
  const int steps = static_cast<int>(std::lround(ex.horizon / lat.spacing()));
  Control fine(ex.horizon / steps, steps, h.dim);
  for (int b = 0; b < steps; ++b)
    for (int k = 0; k < h.dim; ++k) fine.at(b, k) = h.at(h.block_at((b + 0.5) * fine.dt), k);
  return fine;
}

json report_json(const ldp::ConvergenceReport& r) {
  json j;
  j["name"] = r.name;
  j["params"] = r.params;
  j["metrics"] = r.metrics;
  j["stderrs"] = r.stderrs;
  j["slope"] = number(r.slope);
  j["pass"] = r.pass;
  return j;
}

int cmd_verify(Run& run) {
  const std::vector<Check> checks = run_verify(run.ex, run.threads);
  std::ostringstream csv;
  csv << "group,value,bound,pass\n" << std::setprecision(17);
  json groups = json::array();
  int passed = 0;
  for (const Check& c : checks) {
    csv << c.name << ',' << c.value << ',' << c.bound << ',' << (c.pass ? "true" : "false") << '\n';
    groups.push_back({{"group", c.name}, {"value", number(c.value)}, {"bound", c.bound}, {"pass", c.pass}});
    if (c.pass) ++passed;
    else std::cout << "FAIL " << c.name << " value " << c.value << " bound " << c.bound << '\n';
  }
  run.text("verify.csv", csv.str());
  json j;
  j["groups_total"] = checks.size();
  j["groups_passed"] = passed;
  j["groups"] = groups;
  run.json_file("verify.json", j);
  std::cout << "verify: " << passed << "/" << checks.size() << " invariant groups passed\n";
  return passed == static_cast<int>(checks.size()) ? 0 : 1;
}

int cmd_skeleton(Run& run) {
  const Experiment& ex = run.ex;
  const Model model = Model::standard(ex.manifold, ex.measure);
  solver::SolverOptions o = ex.solver;
  o.record_stride = 1;
  const Control h = ex.control(model.basis.dim());
  const Trajectory tr = solver::solve_skeleton(model, ex.initial_state(), ex.has_control() ? &h : nullptr, o);
  solver::write_trajectory_csv(run.path("trajectory.csv"), thinned(tr, ex.solver.record_stride), *model.manifold);
  run.text("summary.json", solver::trajectory_summary_json(tr) + "\n");
  const LightCone cone{0.0, ex.cone_radius};
  const energy::Forcing f = energy::solver_forcing(model, tr);
  json reports = json::array();
  bool ok = true;
  for (energy::Outer L : {energy::Outer::Identity, energy::Outer::Log1p}) {
    const energy::EnergyReport rep = energy::verify_energy_inequality(tr, f, L, cone);
    if (L == energy::Outer::Identity) energy::write_report_csv(run.path("energy.csv"), rep);
    reports.push_back(json::parse(energy::report_summary_json(rep)));
    ok = ok && rep.ok();
  }
  run.json_file("energy.json", reports);
  std::cout << "skeleton: max constraint residual " << tr.max_constraint_residual << ", energy inequality "
            << (ok ? "holds" : "violated") << '\n';
  return ok ? 0 : 1;
}

int cmd_simulate(Run& run) {
  const Experiment& ex = run.ex;
  const Model model = Model::standard(ex.manifold, ex.measure);
  const double eps = ex.config->get_double("experiment.epsilon");
  const int64_t trials = ex.config->get_int("experiment.trials");
  if (trials < 1) bad_key("experiment.trials", "must be at least 1");
  const Control h = ex.control(model.basis.dim());
  solver::SolverOptions o = ex.solver;
  o.record_stride = 1;
  const State z0 = ex.initial_state();
  const LightCone cone{0.0, ex.cone_radius};
  const int n = static_cast<int>(trials);
  std::vector<json> rows(n);
  std::vector<std::string> csv(n);
  std::vector<int> ok(n, 0);
  Trajectory first;
  parallel_for(n, run.threads, [&](int p) {
    const Trajectory tr = solver::solve_stochastic(model, z0, eps, ex.has_control() ? &h : nullptr, o, ex.seed, p);
    const energy::Forcing f = energy::solver_forcing(model, tr);
    json j;
    j["path"] = p;
    j["tau_n"] = tr.tau_n;
    j["k_final"] = tr.k_final;
    j["k_hits"] = tr.k_hits.size();
    j["max_constraint_residual"] = tr.max_constraint_residual;
    j["renormalizations"] = tr.renormalizations;
    bool good = true;
    for (energy::Outer L : {energy::Outer::Identity, energy::Outer::Log1p}) {
      const energy::EnergyReport rep = energy::verify_energy_inequality(tr, f, L, cone);
      j["energy_" + energy::to_string(L)] = {{"violations", rep.violations.size()},
                                              {"min_gap", number(rep.min_gap())},
                                              {"tol", rep.tol}};
      good = good && rep.ok();
    }
    std::ostringstream os;
    os << std::setprecision(17);
    for (size_t m = 0; m < tr.step_times.size(); ++m)
      os << p << ',' << tr.step_times[m] << ',' << tr.energy_trace[m] << ',' << tr.norm_trace[m] << '\n';
    csv[p] = os.str();
    rows[p] = j;
    ok[p] = good;
    if (p == 0) first = tr;
  });
  std::string all = "path,t,energy,norm\n";
  for (const std::string& s : csv) all += s;
  run.text("paths.csv", all);
  solver::write_trajectory_csv(run.path("trajectory_0.csv"), thinned(first, ex.solver.record_stride),
                               *model.manifold);
  int good = 0;
  for (int g : ok) good += g;
  json j;
  j["epsilon"] = eps;
  j["paths"] = n;
  j["energy_inequality_holds"] = good;
  j["per_path"] = rows;
  run.json_file("summary.json", j);
  std::cout << "simulate: energy inequality holds on " << good << "/" << n << " paths\n";
  return good == n ? 0 : 1;
}

Control planted_control(int dim, const Experiment& ex) {
  const int blocks = static_cast<int>(ex.config->get_int("experiment.rate_blocks"));
  if (blocks < 1) bad_key("experiment.rate_blocks", "must be at least 1");
  const double half = ex.config->get_double("experiment.planted_norm");
  if (!(half >= 0.0)) bad_key("experiment.planted_norm", "must be nonnegative");
  const int seed = static_cast<int>(ex.config->get_int("experiment.planted_seed"));
  Control h(ex.horizon / blocks, blocks, dim);
  for (int b = 0; b < blocks; ++b)
    for (int k = 0; k < dim; ++k) h.at(b, k) = std::sin(1.3 * b + 0.9 * k + seed);
  const double s = half > 0.0 ? std::sqrt(half / (0.5 * ldp::control_norm(h))) : 0.0;
  for (double& c : h.coeffs) c *= s;
  return h;
}

int cmd_rate(Run& run) {
  const Experiment& ex = run.ex;
  const Model model = Model::standard(ex.manifold, ex.measure);
  const Control planted = planted_control(model.basis.dim(), ex);
  solver::SolverOptions o = ex.solver;
  if (o.record_stride == 0) o.record_stride = 1;
  const State z0 = ex.initial_state();
  const Trajectory target = solver::solve_skeleton(model, z0, &planted, o);
  ldp::RateOptions ro;
  ro.blocks = planted.blocks();
  ro.gap_tol = ex.config->get_double("experiment.gap_tol");
  ro.budget = ex.config->get_double("experiment.budget");
  ro.threads = run.threads;
  ro.spsa_seed = ex.seed;
  const ldp::RateResult r = ldp::rate_function(model, z0, target, o, ro);
  json j = json::parse(ldp::rate_result_json(r));
  j["planted_value"] = 0.5 * ldp::control_norm(planted);
  j["certificate_gap"] =
      std::isfinite(r.value) ? number(ldp::path_gap(model, z0, r.argmin, target, o)) : json(nullptr);
  run.json_file("rate.json", j);
  std::cout << "rate: value " << r.value << " (planted " << 0.5 * ldp::control_norm(planted) << "), gap "
            << r.terminal_gap << '\n';
  return 0;
}

int cmd_probe_s1(Run& run) {
  const Experiment& ex = run.ex;
  const Model model = Model::standard(ex.manifold, ex.measure);
  const Control h = per_step(ex, ex.control(model.basis.dim()));
  ldp::Statement1Options so;
  so.n_list.clear();
  for (double n : ex.config->get_doubles("experiment.n_list")) {
    if (n < 1 || n != std::floor(n)) bad_key("experiment.n_list", "entries must be positive integers");
    so.n_list.push_back(static_cast<int>(n));
  }
  for (int n : so.n_list)
    if (4 * n > h.blocks())
      bad_key("experiment.n_list", "n = " + std::to_string(n) + " needs at least 4 time steps per period");
  so.amplitude = ex.config->get_double("experiment.oscillation");
  so.threads = run.threads;
  solver::SolverOptions o = ex.solver;
  if (o.record_stride == 0) o.record_stride = 1;
  const State z0 = ex.initial_state();
  const ldp::ConvergenceReport weak = ldp::statement1_probe(model, z0, h, o, so);
  so.strong = true;
  const ldp::ConvergenceReport strong = ldp::statement1_probe(model, z0, h, o, so);
  ldp::write_report_csv(run.path("probe_s1.csv"), weak);
  ldp::write_report_csv(run.path("probe_s1_strong.csv"), strong);
  run.json_file("probe_s1.json", {{"oscillating", report_json(weak)}, {"strong", report_json(strong)}});
  std::cout << "probe-s1: oscillating " << (weak.pass ? "pass" : "fail") << ", strong control "
            << (strong.pass ? "pass" : "fail") << '\n';
  return weak.pass && strong.pass ? 0 : 1;
}

std::vector<double> eps_list(const Experiment& ex) {
  const std::vector<double> eps = ex.config->get_doubles("experiment.eps_list");
  if (eps.empty()) bad_key("experiment.eps_list", "must not be empty");
  for (double e : eps)
    if (!(e > 0.0)) bad_key("experiment.eps_list", "entries must be positive");
  return eps;
}

int cmd_probe_s2(Run& run) {
  const Experiment& ex = run.ex;
  const Model model = Model::standard(ex.manifold, ex.measure);
  const Control h = ex.control(model.basis.dim());
  ldp::Statement2Options so;
  so.eps_list = eps_list(ex);
  so.trials = static_cast<int>(ex.config->get_int("experiment.trials"));
  so.seed = ex.seed;
  so.threads = run.threads;
  const ldp::Statement2Report rep =
      ldp::statement2_probe(model, ex.initial_state(), ex.has_control() ? &h : nullptr, ex.solver, so);
  ldp::write_report_csv(run.path("probe_s2.csv"), rep.report);
  json j = report_json(rep.report);
  j["level"] = rep.level;
  j["stopped_fraction"] = rep.stopped_fraction;
  run.json_file("probe_s2.json", j);
  std::cout << "probe-s2: slope " << rep.report.slope << (rep.report.pass ? " (pass)" : " (fail)") << '\n';
  return rep.report.pass ? 0 : 1;
}

int cmd_tail(Run& run) {
  const Experiment& ex = run.ex;
  const Model model = Model::standard(ex.manifold, ex.measure);
  const double delta = ex.config->get_double("experiment.delta");
  const int trials = static_cast<int>(ex.config->get_int("experiment.trials"));
  if (trials < 1) bad_key("experiment.trials", "must be at least 1");
  solver::SolverOptions o = ex.solver;
  if (o.record_stride == 0) o.record_stride = 1;
  const auto rows = ldp::tail_estimate(model, ex.initial_state(), delta, eps_list(ex), trials, o, ex.seed, run.threads);
  ldp::write_tail_csv(run.path("tail.csv"), rows);
  json arr = json::array();
  for (const ldp::TailRow& r : rows)
    arr.push_back({{"eps", r.eps}, {"count", r.count}, {"trials", r.trials}, {"p_hat", r.p_hat},
                   {"eps_log_p", number(r.eps_log_p)}});
  run.json_file("tail.json", {{"delta", delta}, {"rows", arr}});
  std::cout << "tail: " << rows.size() << " epsilon levels written\n";
  return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv) {
  CLI::App app{"Stochastic geometric wave equation laboratory"};
  app.set_version_flag("--version", kVersion);
  std::string command, config_path, out_dir;
  std::optional<uint64_t> seed;
  int threads = 1;
  app.add_option("command", command, "verify, skeleton, simulate, rate, probe-s1, probe-s2 or tail")
      ->required()
      ->check(CLI::IsMember({"verify", "skeleton", "simulate", "rate", "probe-s1", "probe-s2", "tail"}));
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "overrides noise.seed");
  app.add_option("--threads", threads, "worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    Config config = Config::load(config_path);
    if (seed) config.set("noise.seed", std::to_string(*seed));
    const Experiment ex = Experiment::from(config);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir + ": " + ec.message());

    Run run{ex, fs::path(out_dir), threads == 0 ? default_threads() : threads, {}};
    int status = 0;
    if (command == "verify") status = cmd_verify(run);
    else if (command == "skeleton") status = cmd_skeleton(run);
    else if (command == "simulate") status = cmd_simulate(run);
    else if (command == "rate") status = cmd_rate(run);
    else if (command == "probe-s1") status = cmd_probe_s1(run);
    else if (command == "probe-s2") status = cmd_probe_s2(run);
    else status = cmd_tail(run);

    const std::string canonical = config.canonical();
    json manifest;
    manifest["command"] = command;
    manifest["version"] = kVersion;
    manifest["config_hash"] = hex64(fnv1a(canonical));
    manifest["seed"] = ex.seed;
    manifest["threads"] = run.threads;
    manifest["exit_code"] = status;
    manifest["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json outputs = json::object();
    for (const std::string& name : run.outputs) outputs[name] = hex64(fnv1a(read_file((run.out / name).string())));
    manifest["outputs"] = outputs;
    manifest["config"] = canonical;
    write_file((run.out / "manifest.json").string(), manifest.dump(2) + "\n");
    return status;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  }
}

}  // namespace geowave::cli
