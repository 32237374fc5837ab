#include "mlop/synthfire.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mlop/error.hpp"
#include "mlop/rng.hpp"

namespace mlop::synth {

using json = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_size(const Vector& v, const Grid2D& g, const char* what) {
  if (v.size() != g.size())
    throw ConfigError(std::string(what) + ": length " + std::to_string(v.size()) + " does not match grid size " +
                      std::to_string(g.size()));
}

double front_cfl(const Vector& s, const Grid2D& g, double dt) {
  return dt * s.maxCoeff() * (1.0 / g.dx + 1.0 / g.dy);
}

double advection_cfl(const Vector& u, const Vector& v, const Grid2D& g, double dt) {
  return dt * (u.cwiseAbs().maxCoeff() / g.dx + v.cwiseAbs().maxCoeff() / g.dy);
}

double diffusion_cfl(double kappa, const Grid2D& g, double dt) {
  return 2.0 * kappa * dt * (1.0 / (g.dx * g.dx) + 1.0 / (g.dy * g.dy));
}

}  // namespace

void FireScenario::validate() const {
  grid.validate();
  require_size(spread_rate, grid, "spread_rate");
  require_size(wind_u, grid, "wind_u");
  require_size(wind_v, grid, "wind_v");
  if (!spread_rate.allFinite() || spread_rate.minCoeff() < 0.0)
    throw ConfigError("spread_rate must be finite and >= 0");
  if (!wind_u.allFinite() || !wind_v.allFinite()) throw ConfigError("wind must be finite");
  if (ignition_x < 0 || ignition_x >= grid.nx || ignition_y < 0 || ignition_y >= grid.ny)
    throw ConfigError("ignition point lies outside the grid");
  if (!(diffusivity >= 0.0) || !(emission_factor >= 0.0)) throw ConfigError("diffusivity and emission must be >= 0");
  if (!(dt > 0.0) || n_steps < 1 || checkpoint_every < 1 || burn_duration < 1)
    throw ConfigError("dt, n_steps, checkpoint_every and burn_duration must be positive");
  if (!(perturbation >= 0.0 && perturbation < 1.0)) throw ConfigError("perturbation must lie in [0, 1)");
  if (!(detection_limit >= 0.0)) throw ConfigError("detection_limit must be >= 0");
  if (front_cfl(spread_rate, grid, dt) > kCflLimit) throw NumericalError("CFL violated by the spread rate");
  if (advection_cfl(wind_u, wind_v, grid, dt) > kCflLimit) throw NumericalError("CFL violated by the wind");
  if (diffusion_cfl(diffusivity, grid, dt) > kCflLimit) throw NumericalError("CFL violated by the diffusivity");
  if (transport_stability_number(wind_u, wind_v, grid, diffusivity, dt, boundary) > 1.0)
    throw NumericalError("combined advection-diffusion step would not preserve positivity");
}

Vector initial_level_set(const Grid2D& grid, std::int64_t ix, std::int64_t iy, double radius) {
  Vector psi(grid.size());
  for (std::int64_t y = 0; y < grid.ny; ++y)
    for (std::int64_t x = 0; x < grid.nx; ++x) {
      const double ddx = static_cast<double>(x - ix) * grid.dx;
      const double ddy = static_cast<double>(y - iy) * grid.dy;
      psi(grid.index(x, y)) = std::hypot(ddx, ddy) - radius;
    }
  return psi;
}

Vector propagate_front(const Vector& psi, const Vector& spread_rate, const Grid2D& grid, double dt) {
  require_size(psi, grid, "psi");
  require_size(spread_rate, grid, "spread_rate");
  if (spread_rate.minCoeff() < 0.0) throw ConfigError("propagate_front: spread rate must be >= 0");
  if (front_cfl(spread_rate, grid, dt) > kCflLimit) throw NumericalError("propagate_front: CFL violated");
  const std::int64_t nx = grid.nx, ny = grid.ny;
  Vector out = psi;
  for (std::int64_t y = 0; y < ny; ++y) {
    for (std::int64_t x = 0; x < nx; ++x) {
      const auto i = grid.index(x, y);
      const double s = spread_rate(i);
      if (s == 0.0) continue;
      const double p = psi(i);
      const double left = x > 0 ? psi(i - 1) : p;
      const double right = x + 1 < nx ? psi(i + 1) : p;
      const double down = y > 0 ? psi(i - nx) : p;
      const double up = y + 1 < ny ? psi(i + nx) : p;
      const double dmx = (p - left) / grid.dx, dpx = (right - p) / grid.dx;
      const double dmy = (p - down) / grid.dy, dpy = (up - p) / grid.dy;
      // Godunov upwind gradient for an outward-moving front.
      const double gx = std::max(dmx, 0.0) * std::max(dmx, 0.0) + std::min(dpx, 0.0) * std::min(dpx, 0.0);
      const double gy = std::max(dmy, 0.0) * std::max(dmy, 0.0) + std::min(dpy, 0.0) * std::min(dpy, 0.0);
      out(i) = p - dt * s * std::sqrt(gx + gy);
    }
  }
  return out;
}

IgnitionClock::IgnitionClock(const Vector& psi0, double t0) : ignition_time_(psi0.size()) {
  for (Eigen::Index i = 0; i < psi0.size(); ++i) ignition_time_(i) = psi0(i) < 0.0 ? t0 : kInf;
}

void IgnitionClock::record(const Vector& psi_old, const Vector& psi_new, double t_old, double dt) {
  for (Eigen::Index i = 0; i < psi_new.size(); ++i) {
    if (ignition_time_(i) != kInf || !(psi_new(i) < 0.0)) continue;
    // psi_old >= 0 here since the cell had not ignited.
    const double w = psi_old(i) / (psi_old(i) - psi_new(i));
    ignition_time_(i) = t_old + dt * std::clamp(w, 0.0, 1.0);
  }
}

Vector time_since_ignition(const Vector& ignition_time, double t) {
  Vector f(ignition_time.size());
  for (Eigen::Index i = 0; i < f.size(); ++i)
    f(i) = ignition_time(i) <= t ? t - ignition_time(i) : 0.0;
  return f;
}

double transport_stability_number(const Vector& wind_u, const Vector& wind_v, const Grid2D& grid,
                                  double diffusivity, double dt, Boundary boundary) {
  const std::int64_t nx = grid.nx, ny = grid.ny;
  const double diff = diffusion_cfl(diffusivity, grid, dt);
  double worst = 0.0;
  for (std::int64_t y = 0; y < ny; ++y) {
    for (std::int64_t x = 0; x < nx; ++x) {
      const auto i = grid.index(x, y);
      const bool open = boundary == Boundary::Outflow;
      const double ur = x + 1 < nx ? 0.5 * (wind_u(i) + wind_u(i + 1)) : (open ? wind_u(i) : 0.0);
      const double ul = x > 0 ? 0.5 * (wind_u(i) + wind_u(i - 1)) : (open ? wind_u(i) : 0.0);
      const double vt = y + 1 < ny ? 0.5 * (wind_v(i) + wind_v(i + nx)) : (open ? wind_v(i) : 0.0);
      const double vb = y > 0 ? 0.5 * (wind_v(i) + wind_v(i - nx)) : (open ? wind_v(i) : 0.0);
      const double out = (std::max(ur, 0.0) + std::max(-ul, 0.0)) / grid.dx +
                         (std::max(vt, 0.0) + std::max(-vb, 0.0)) / grid.dy;
      worst = std::max(worst, dt * out + diff);
    }
  }
  return worst;
}

Vector transport_smoke(const Vector& c, const Vector& wind_u, const Vector& wind_v, const Grid2D& grid,
                       double diffusivity, const Vector& source, double dt, Boundary boundary) {
  require_size(c, grid, "concentration");
  require_size(wind_u, grid, "wind_u");
  require_size(wind_v, grid, "wind_v");
  require_size(source, grid, "source");
  if (advection_cfl(wind_u, wind_v, grid, dt) > kCflLimit || diffusion_cfl(diffusivity, grid, dt) > kCflLimit ||
      transport_stability_number(wind_u, wind_v, grid, diffusivity, dt, boundary) > 1.0)
    throw NumericalError("transport_smoke: CFL violated");

  const std::int64_t nx = grid.nx, ny = grid.ny;
  const bool open = boundary == Boundary::Outflow;
  // Net flux through the face on the high side of each cell (x and y), and
  // through the low boundary faces.
  auto upwind = [](double vel, double lo, double hi) { return vel > 0.0 ? vel * lo : vel * hi; };
  Vector out = c;
  const double rx = dt / grid.dx, ry = dt / grid.dy;
  for (std::int64_t y = 0; y < ny; ++y) {
    for (std::int64_t x = 0; x < nx; ++x) {
      const auto i = grid.index(x, y);
      double fx_hi = 0.0, fx_lo = 0.0, fy_hi = 0.0, fy_lo = 0.0;
      if (x + 1 < nx) {
        const double uf = 0.5 * (wind_u(i) + wind_u(i + 1));
        fx_hi = upwind(uf, c(i), c(i + 1)) - diffusivity * (c(i + 1) - c(i)) / grid.dx;
      } else if (open) {
        fx_hi = upwind(wind_u(i), c(i), 0.0);
      }
      if (x > 0) {
        const double uf = 0.5 * (wind_u(i) + wind_u(i - 1));
        fx_lo = upwind(uf, c(i - 1), c(i)) - diffusivity * (c(i) - c(i - 1)) / grid.dx;
      } else if (open) {
        fx_lo = upwind(wind_u(i), 0.0, c(i));
      }
      if (y + 1 < ny) {
        const double vf = 0.5 * (wind_v(i) + wind_v(i + nx));
        fy_hi = upwind(vf, c(i), c(i + nx)) - diffusivity * (c(i + nx) - c(i)) / grid.dy;
      } else if (open) {
        fy_hi = upwind(wind_v(i), c(i), 0.0);
      }
      if (y > 0) {
        const double vf = 0.5 * (wind_v(i) + wind_v(i - nx));
        fy_lo = upwind(vf, c(i - nx), c(i)) - diffusivity * (c(i) - c(i - nx)) / grid.dy;
      } else if (open) {
        fy_lo = upwind(wind_v(i), 0.0, c(i));
      }
      out(i) = c(i) - rx * (fx_hi - fx_lo) - ry * (fy_hi - fy_lo) + dt * source(i);
    }
  }
  // Rounding can leave -1e-300-sized values where the update weight is exactly 1.
  return out.cwiseMax(0.0);
}

std::vector<FireSmokeSnapshot> run_scenario(const FireScenario& scenario, std::uint64_t seed,
                                            ScenarioDiagnostics* diagnostics) {
  scenario.validate();
  FireScenario s = scenario;
  if (s.randomize && s.perturbation > 0.0) {
    Rng rng(seed);
    s.spread_rate *= 1.0 + s.perturbation * rng.uniform(-1.0, 1.0);
    const double angle = s.perturbation * rng.uniform(-1.0, 1.0);
    const double speed = 1.0 + s.perturbation * rng.uniform(-1.0, 1.0);
    const Vector u = speed * (std::cos(angle) * s.wind_u - std::sin(angle) * s.wind_v);
    const Vector v = speed * (std::sin(angle) * s.wind_u + std::cos(angle) * s.wind_v);
    s.wind_u = u;
    s.wind_v = v;
    s.validate();
  }

  const Grid2D& g = s.grid;
  Vector psi = initial_level_set(g, s.ignition_x, s.ignition_y, 0.5 * std::min(g.dx, g.dy));
  IgnitionClock clock(psi, 0.0);
  Vector c = Vector::Zero(g.size());
  Vector cumulative = Vector::Zero(g.size());
  Vector source(g.size());
  const double window = s.burn_duration * s.dt;
  double emitted = 0.0;
  std::int64_t burning_steps = 0;

  std::vector<FireSmokeSnapshot> snapshots;
  for (int step = 1; step <= s.n_steps; ++step) {
    const double t_old = (step - 1) * s.dt;
    const double t = step * s.dt;
    Vector next = propagate_front(psi, s.spread_rate, g, s.dt);
    clock.record(psi, next, t_old, s.dt);
    psi = std::move(next);

    // A cell emits during every step whose interval (t_old, t] overlaps its
    // burning window [t_ign, t_ign + window].
    const Vector& ign = clock.ignition_time();
    std::int64_t burning = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const bool on = ign(i) <= t && t_old < ign(i) + window;
      source(i) = on ? s.emission_factor : 0.0;
      burning += on ? 1 : 0;
    }
    burning_steps += burning;
    emitted += s.emission_factor * s.dt * static_cast<double>(burning);

    c = transport_smoke(c, s.wind_u, s.wind_v, g, s.diffusivity, source, s.dt, s.boundary);

    if (step % s.checkpoint_every == 0) {
      cumulative += c;
      // Zeroing below a floor is a non-decreasing map, so monotonicity survives.
      const Vector reported = (cumulative.array() >= s.detection_limit).select(cumulative, 0.0);
      snapshots.push_back({time_since_ignition(ign, t), reported, t});
    }
  }
  if (diagnostics) {
    diagnostics->ignition_time = clock.ignition_time();
    diagnostics->emitted_mass = emitted;
    diagnostics->burning_cell_steps = burning_steps;
    diagnostics->final_concentration = c;
  }
  return snapshots;
}

void SamplerConfig::validate() const {
  grid.validate();
  if (!(dt > 0.0) || n_steps < 1 || checkpoint_every < 1 || burn_duration < 1)
    throw ConfigError("sampler: dt, n_steps, checkpoint_every and burn_duration must be positive");
  if (n_steps < checkpoint_every) throw ConfigError("sampler: n_steps shorter than one checkpoint interval");
  if (!(diffusivity >= 0.0) || !(emission_factor >= 0.0) || !(base_spread_rate >= 0.0) || !(spread_floor >= 0.0) ||
      !(detection_limit >= 0.0))
    throw ConfigError("sampler: rates must be >= 0");
  if (n_bumps < 0 || !(bump_amplitude_max >= 0.0) || !(bump_width_min > 0.0) || bump_width_max < bump_width_min)
    throw ConfigError("sampler: invalid spread-rate bump ranges");
  if (!(ignition_margin >= 0.0 && ignition_margin < 0.5)) throw ConfigError("sampler: ignition_margin must lie in [0, 0.5)");
  if (!(wind_spread_factor >= 0.0)) throw ConfigError("sampler: wind_spread_factor must be >= 0");
  if (conditions.empty()) throw ConfigError("sampler: at least one condition is required");
  for (const auto& c : conditions)
    if (c.name.empty() || !(c.emission_multiplier >= 0.0) || !(c.spread_multiplier >= 0.0) ||
        !(c.wind_speed_min >= 0.0) || c.wind_speed_max < c.wind_speed_min)
      throw ConfigError("sampler: invalid condition '" + c.name + "'");
}

json to_json(const SamplerConfig& c) {
  json conds = json::array();
  for (const auto& k : c.conditions)
    conds.push_back({{"name", k.name},
                     {"emission_multiplier", k.emission_multiplier},
                     {"spread_multiplier", k.spread_multiplier},
                     {"wind_speed_min", k.wind_speed_min},
                     {"wind_speed_max", k.wind_speed_max}});
  return {{"grid", mlop::to_json(c.grid)},
          {"dt", c.dt},
          {"n_steps", c.n_steps},
          {"checkpoint_every", c.checkpoint_every},
          {"burn_duration", c.burn_duration},
          {"diffusivity", c.diffusivity},
          {"emission_factor", c.emission_factor},
          {"detection_limit", c.detection_limit},
          {"base_spread_rate", c.base_spread_rate},
          {"spread_floor", c.spread_floor},
          {"n_bumps", c.n_bumps},
          {"bump_amplitude_max", c.bump_amplitude_max},
          {"bump_width_min", c.bump_width_min},
          {"bump_width_max", c.bump_width_max},
          {"ignition_margin", c.ignition_margin},
          {"wind_spread_factor", c.wind_spread_factor},
          {"wind_direction_deg", c.wind_direction_deg},
          {"wind_direction_jitter_deg", c.wind_direction_jitter_deg},
          {"conditions", conds}};
}

SamplerConfig sampler_from_json(const json& j) {
  SamplerConfig c;
  try {
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    c.dt = j.value("dt", c.dt);
    c.n_steps = j.value("n_steps", c.n_steps);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.burn_duration = j.value("burn_duration", c.burn_duration);
    c.diffusivity = j.value("diffusivity", c.diffusivity);
    c.emission_factor = j.value("emission_factor", c.emission_factor);
    c.detection_limit = j.value("detection_limit", c.detection_limit);
    c.base_spread_rate = j.value("base_spread_rate", c.base_spread_rate);
    c.spread_floor = j.value("spread_floor", c.spread_floor);
    c.n_bumps = j.value("n_bumps", c.n_bumps);
    c.bump_amplitude_max = j.value("bump_amplitude_max", c.bump_amplitude_max);
    c.bump_width_min = j.value("bump_width_min", c.bump_width_min);
    c.bump_width_max = j.value("bump_width_max", c.bump_width_max);
    c.ignition_margin = j.value("ignition_margin", c.ignition_margin);
    c.wind_spread_factor = j.value("wind_spread_factor", c.wind_spread_factor);
    c.wind_direction_deg = j.value("wind_direction_deg", c.wind_direction_deg);
    c.wind_direction_jitter_deg = j.value("wind_direction_jitter_deg", c.wind_direction_jitter_deg);
    if (j.contains("conditions")) {
      c.conditions.clear();
      for (const auto& k : j.at("conditions"))
        c.conditions.push_back({k.at("name").get<std::string>(), k.value("emission_multiplier", 1.0),
                                k.value("spread_multiplier", 1.0), k.value("wind_speed_min", 3.0),
                                k.value("wind_speed_max", 5.0)});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sampler config: ") + e.what());
  }
  c.validate();
  return c;
}

FireScenario sample_scenario(const SamplerConfig& config, std::int64_t index, std::uint64_t seed) {
  config.validate();
  const Grid2D& g = config.grid;
  const auto& cond = config.conditions[static_cast<std::size_t>(index) % config.conditions.size()];
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));

  FireScenario s;
  s.grid = g;
  s.condition = cond.name;
  s.dt = config.dt;
  s.n_steps = config.n_steps;
  s.checkpoint_every = config.checkpoint_every;
  s.burn_duration = config.burn_duration;
  s.diffusivity = config.diffusivity;
  s.emission_factor = config.emission_factor * cond.emission_multiplier;
  s.detection_limit = config.detection_limit;

  auto interior = [&](std::int64_t n) {
    const auto lo = std::min(n - 1, static_cast<std::int64_t>(std::floor(config.ignition_margin * n)));
    const auto hi = std::max(lo, n - 1 - lo);
    return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  };
  s.ignition_x = interior(g.nx);
  s.ignition_y = interior(g.ny);

  const double width_x = g.nx * g.dx, width_y = g.ny * g.dy;
  s.spread_rate = Vector::Constant(g.size(), config.spread_floor);
  for (int k = 0; k < config.n_bumps; ++k) {
    const double cx = rng.uniform(0.0, width_x), cy = rng.uniform(0.0, width_y);
    const double amp = rng.uniform(0.0, config.bump_amplitude_max);
    const double w = rng.uniform(config.bump_width_min, config.bump_width_max);
    for (std::int64_t y = 0; y < g.ny; ++y)
      for (std::int64_t x = 0; x < g.nx; ++x) {
        const double px = (x + 0.5) * g.dx - cx, py = (y + 0.5) * g.dy - cy;
        s.spread_rate(g.index(x, y)) += amp * std::exp(-(px * px + py * py) / (2.0 * w * w));
      }
  }
  s.spread_rate *= config.base_spread_rate * cond.spread_multiplier;

  const double deg = config.wind_direction_deg + config.wind_direction_jitter_deg * rng.uniform(-1.0, 1.0);
  const double angle = deg * std::numbers::pi / 180.0;
  const double speed = rng.uniform(cond.wind_speed_min, cond.wind_speed_max);
  if (config.wind_spread_factor > 0.0) {
    for (std::int64_t y = 0; y < g.ny; ++y)
      for (std::int64_t x = 0; x < g.nx; ++x) {
        const double px = static_cast<double>(x - s.ignition_x) * g.dx;
        const double py = static_cast<double>(y - s.ignition_y) * g.dy;
        const double dist = std::hypot(px, py);
        if (dist == 0.0) continue;
        const double align = (px * std::cos(angle) + py * std::sin(angle)) / dist;
        s.spread_rate(g.index(x, y)) *= 1.0 + config.wind_spread_factor * speed * std::max(align, 0.0);
      }
  }
  s.wind_u = Vector::Constant(g.size(), speed * std::cos(angle));
  s.wind_v = Vector::Constant(g.size(), speed * std::sin(angle));
  try {
    s.validate();
  } catch (const NumericalError& e) {
    throw ConfigError(std::string("sampler config produces an unstable scenario: ") + e.what());
  }
  return s;
}

Dataset generate_dataset(std::int64_t n_fires, const SamplerConfig& config, std::uint64_t seed) {
  if (n_fires < 3) throw ConfigError("generate_dataset: need at least 3 fires");
  config.validate();
  const auto per_fire = static_cast<Eigen::Index>(config.n_steps / config.checkpoint_every);
  const Eigen::Index total = per_fire * n_fires;
  Dataset d;
  d.inputs.grid = d.outputs.grid = config.grid;
  d.inputs.data.resize(config.grid.size(), total);
  d.outputs.data.resize(config.grid.size(), total);
  Eigen::Index col = 0;
  for (std::int64_t fire = 0; fire < n_fires; ++fire) {
    const FireScenario s = sample_scenario(config, fire, seed);
    const auto snaps = run_scenario(s, mix_seed(seed, static_cast<std::uint64_t>(fire) + 0x5eed));
    for (std::size_t k = 0; k < snaps.size(); ++k, ++col) {
      d.inputs.data.col(col) = snaps[k].time_since_ignition;
      d.outputs.data.col(col) = snaps[k].cumulative_smoke;
      d.inputs.labels.push_back({fire, static_cast<std::int64_t>(k), s.condition});
    }
  }
  d.outputs.labels = d.inputs.labels;
  return d;
}

}  // namespace mlop::synth
