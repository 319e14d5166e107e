#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointda/geo.hpp"
#include "pointda/rng.hpp"

namespace pointda::world {

inline const std::vector<std::string> kVars = {"T", "S", "U", "V", "SSH"};
constexpr int kVarT = 0, kVarS = 1, kVarU = 2, kVarV = 3, kVarSsh = 4;

struct WorldConfig {
  double lat_min = -90, lat_max = 90;
  double lon_min = 0, lon_max = 360;
  bool periodic_lon = true;
  double fine_res = 0.5;
  int coarse_ratio = 4;

  int n_eddies = 160;
  double eddy_amp_min = 0.05, eddy_amp_max = 0.5;       // metres, sign drawn
  double eddy_radius_min = 0.8, eddy_radius_max = 5.0;  // degrees
  double eddy_drift_min = -1.5, eddy_drift_max = -0.4;  // deg/day, westward
  double eddy_lat_min = -65, eddy_lat_max = 65;

  double jet_lat = 35, jet_width = 5, jet_amp = 0.8;

  double alpha = 8.0;    // T change per metre of SSH
  double beta = 2.0;     // S change per metre of SSH (subtracted)
  double g_gain = 0.25;  // collapsed geostrophic constant, (m/s) per (m/deg)
  double eps_f = 0.12;   // equatorial regularization of the Coriolis factor

  double seasonal_ssh_amp = 0.05, seasonal_t_amp = 2.5;
  double season_days = 360;
  double t_eq = 28, t_pole = -1, s0 = 35;

  geo::LandConfig land;
  std::uint64_t seed = 1234;

  geo::GridSpec fine_spec() const;
  geo::GridSpec coarse_spec() const;
  void validate() const;
};

// Analytic landmass layout used by the default configs: two polar caps and
// three continents, leaving a circumpolar ocean band in the southern
// mid-latitudes.
geo::LandConfig default_land(double fine_res);

struct Eddy {
  double amp, lat, lon0, radius, drift;
};

struct EddyState {
  double amp, lat, lon, radius;
};

// The fixed eddy population implied by the config seed.
std::vector<Eddy> eddy_population(const WorldConfig& cfg);

// Smooth additive model-error component (one Gaussian bump). SSH bumps also
// perturb U and V through the geostrophic relation.
struct Bump {
  int var;  // kVarSsh, kVarT or kVarS
  double amp, lat, lon, radius;
};

struct ForecastParams {
  double drift_factor = 1.25;  // multiplies eddy drift speed
  double amp_decay = 0.985;    // eddy amplitude factor per step
  double err_scale_ssh = 0.02;
  double err_scale_t = 0.35;
  double err_scale_s = 0.08;
  double err_corr_deg = 8.0;
  int err_bumps_per_step = 12;
  std::int64_t anchor_day = 0;  // forecast start; decay is measured from here

  bool identity() const {
    return drift_factor == 1.0 && amp_decay == 1.0 && err_scale_ssh == 0.0 &&
           err_scale_t == 0.0 && err_scale_s == 0.0;
  }
  void validate() const;
};

// SSH value and its analytic degree-derivatives at a point, for the truth
// eddy configuration of the given day.
struct SshPoint {
  double ssh, d_lat, d_lon;
};
SshPoint ssh_point(double lat, double lon, std::int64_t day,
                   const WorldConfig& cfg);

// Derived variables from local SSH value/derivatives.
double derive_u(double lat, double d_ssh_dlat, const WorldConfig& cfg);
double derive_v(double lat, double d_ssh_dlon, const WorldConfig& cfg);
double derive_t(double lat, double ssh, std::int64_t day,
                const WorldConfig& cfg);
double derive_s(double ssh, const WorldConfig& cfg);

// Renders the full 5-variable state for an arbitrary eddy configuration on
// an arbitrary grid. The seasonal terms use `day`.
geo::GridField render_state(const geo::GridSpec& spec, std::int64_t day,
                            const std::vector<EddyState>& eddies,
                            const WorldConfig& cfg);

// Ground truth at fine resolution; bit-identical for identical (day, config).
geo::GridField truth_state(std::int64_t day, const WorldConfig& cfg);

// One day of the imperfect toy forecast. The state's day index minus
// fp.anchor_day gives the forecast age, which controls decay and the
// perturbed eddy positions. Noise is keyed by (seed, age).
geo::GridField forecast_step(const geo::GridField& state,
                             const WorldConfig& cfg, const ForecastParams& fp,
                             std::uint64_t seed);

// Runs `lead` forecast steps from truth at (day - lead) and block-averages
// the result onto the coarse grid.
geo::GridField make_background(std::int64_t day, int lead,
                               const WorldConfig& cfg,
                               const ForecastParams& fp);

// Step-by-step forecast driver that reuses the analytic reference field
// between consecutive steps; numerically identical to calling forecast_step
// in a loop.
class ForecastRun {
 public:
  ForecastRun(geo::GridField ic, const WorldConfig& cfg,
              const ForecastParams& fp, std::uint64_t seed);
  void step();
  const geo::GridField& state() const { return state_; }

 private:
  geo::GridField state_;
  geo::GridField ref_;  // analytic reference at the current age
  WorldConfig cfg_;
  ForecastParams fp_;
  std::uint64_t seed_;
  std::int64_t age_;
};

}  // namespace pointda::world
