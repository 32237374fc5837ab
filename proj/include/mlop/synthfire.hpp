#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlop/tensorio.hpp"

namespace mlop::synth {

enum class Boundary {
  Outflow,   // outgoing flux carries the edge value, incoming flux is clean air
  ZeroFlux,  // closed box; used to check conservation
};

/// Everything needed to simulate one fire and its smoke plume.
struct FireScenario {
  Grid2D grid;
  Vector spread_rate;  // m/s, per cell
  std::int64_t ignition_x = 0;
  std::int64_t ignition_y = 0;
  Vector wind_u;  // m/s, per cell
  Vector wind_v;
  double diffusivity = 0.0;      // m^2/s
  double emission_factor = 1.0;  // concentration added per burning cell per second
  double dt = 1.0;
  int n_steps = 1;
  int checkpoint_every = 1;
  int burn_duration = 10;  // steps a cell keeps emitting after ignition
  std::string condition;
  bool randomize = false;
  double perturbation = 0.1;  // relative amplitude of the seeded perturbation
  double detection_limit = 0.0;  // reported cumulative smoke below this is zeroed
  Boundary boundary = Boundary::Outflow;

  /// Shape, sign and stability checks (CFL violations raise NumericalError).
  void validate() const;
};

struct FireSmokeSnapshot {
  Vector time_since_ignition;
  Vector cumulative_smoke;
  double t = 0.0;
};

struct ScenarioDiagnostics {
  Vector ignition_time;  // +inf where unburned
  double emitted_mass = 0.0;
  std::int64_t burning_cell_steps = 0;
  Vector final_concentration;
};

inline constexpr double kCflLimit = 0.9;

/// Signed distance to a disc of `radius` around the centre of cell (ix, iy).
Vector initial_level_set(const Grid2D& grid, std::int64_t ix, std::int64_t iy, double radius);

/// One forward-Euler step of psi_t + S |grad psi| = 0 with a first-order
/// Godunov upwind gradient (S >= 0); zero-gradient boundaries.
Vector propagate_front(const Vector& psi, const Vector& spread_rate, const Grid2D& grid, double dt);

/// Per-cell ignition times, refined by linear interpolation of psi in time.
class IgnitionClock {
 public:
  IgnitionClock(const Vector& psi0, double t0);

  /// Records cells whose psi changed sign during [t_old, t_old + dt].
  void record(const Vector& psi_old, const Vector& psi_new, double t_old, double dt);

  const Vector& ignition_time() const { return ignition_time_; }

 private:
  Vector ignition_time_;
};

/// f = t - t_ign where the cell has ignited (t_ign <= t), else 0.
Vector time_since_ignition(const Vector& ignition_time, double t);

/// One explicit finite-volume step of c_t - kappa lap c + div(u c) = source:
/// upwind advection with face-averaged velocities, centred diffusion.
Vector transport_smoke(const Vector& c, const Vector& wind_u, const Vector& wind_v, const Grid2D& grid,
                       double diffusivity, const Vector& source, double dt,
                       Boundary boundary = Boundary::Outflow);

/// Largest per-cell explicit update weight of transport_smoke; c' >= 0 requires <= 1.
double transport_stability_number(const Vector& wind_u, const Vector& wind_v, const Grid2D& grid,
                                  double diffusivity, double dt, Boundary boundary);

std::vector<FireSmokeSnapshot> run_scenario(const FireScenario& scenario, std::uint64_t seed,
                                            ScenarioDiagnostics* diagnostics = nullptr);

struct ConditionSpec {
  std::string name;
  double emission_multiplier = 1.0;
  double spread_multiplier = 1.0;
  double wind_speed_min = 3.0;
  double wind_speed_max = 5.0;
};

/// Ranges for randomly drawn fires; defaults make a small demo corpus.
struct SamplerConfig {
  Grid2D grid{48, 40, 200.0, 200.0};
  double dt = 10.0;
  int n_steps = 300;
  int checkpoint_every = 60;
  int burn_duration = 10;
  double diffusivity = 50.0;
  double emission_factor = 1.0;
  double detection_limit = 0.1;
  double base_spread_rate = 0.4;
  double spread_floor = 0.3;  // background multiplier under the bumps
  int n_bumps = 4;
  double bump_amplitude_max = 1.5;
  double bump_width_min = 300.0;
  double bump_width_max = 1500.0;
  double ignition_margin = 0.45;  // fraction of the extent kept clear of ignitions
  double wind_direction_deg = 20.0;
  double wind_direction_jitter_deg = 4.0;
  // Downwind spread boost per m/s of wind: S *= 1 + factor * speed * max(0, cos angle),
  // the angle taken between the wind and the ray from the ignition cell.
  double wind_spread_factor = 0.1;
  std::vector<ConditionSpec> conditions{{"low", 0.5, 0.8, 2.0, 4.0},
                                        {"medium", 1.0, 1.0, 3.0, 5.0},
                                        {"high", 2.0, 1.2, 4.0, 6.0}};

  void validate() const;
};

nlohmann::json to_json(const SamplerConfig& c);
/// Missing keys keep their defaults.
SamplerConfig sampler_from_json(const nlohmann::json& j);

/// Draws fire `index` of a corpus (condition = conditions[index % count]).
FireScenario sample_scenario(const SamplerConfig& config, std::int64_t index, std::uint64_t seed);

/// Runs n_fires sampled scenarios and stacks every checkpoint as one column.
Dataset generate_dataset(std::int64_t n_fires, const SamplerConfig& config, std::uint64_t seed);

}  // namespace mlop::synth
