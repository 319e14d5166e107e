#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointda/geo.hpp"
#include "pointda/world.hpp"

namespace pointda::obs {

enum class Coverage { WideSwath, AlongTrack, PolarGrid, RandomPoints };

Coverage coverage_from_tag(const std::string& tag);
std::string coverage_tag(Coverage c);

// One observation stream: channel layout, sampling geometry and noise model.
struct SourceSchema {
  std::string id;
  std::vector<std::string> channels;
  std::vector<double> noise_std;  // per channel
  Coverage coverage = Coverage::RandomPoints;

  // Sampling spacing in degrees for gridded coverages, or expected point
  // count per day for random points.
  double sample_res = 0.5;
  int random_points_per_day = 1200;

  // wide-swath geometry
  double swath_width = 12.0;
  double swath_period = 36.0;    // spacing between band centers, degrees lon
  double swath_slope = 0.5;      // lon shift per degree lat (diagonal bands)
  double swath_day_shift = 7.0;  // band drift per day, degrees lon

  // along-track geometry
  int n_tracks = 14;
  double track_amp = 70.0;         // max |lat| of the ground track
  double track_wavelength = 140.0; // degrees lon per oscillation
  double track_day_shift = 9.0;

  // polar-grid coverage
  double polar_lat = 55.0;

  // analytic sea-ice model (sigmoid of latitude with a seasonal edge)
  double ice_edge = 66.0, ice_edge_seasonal = 6.0, ice_width = 2.0;

  int n_channels() const { return static_cast<int>(channels.size()); }
  void validate() const;
};

// The default six-stream set. SST is the densest source by construction.
std::vector<SourceSchema> default_schemas(double fine_res);

struct ObservationSet {
  std::string source_id;
  std::vector<std::pair<double, double>> coords;  // (lat, lon)
  std::vector<double> values;                     // n x C, row-major
  int n_channels = 0;
  std::int64_t day = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(coords.size()); }
  double value(std::int64_t i, int c) const {
    return values[static_cast<std::size_t>(i) * n_channels + c];
  }
};

// Reference surface for the sea-level-anomaly channel: the mean SSH over the
// training period, at fine resolution.
struct SlaReference {
  geo::GridField mean_ssh;
  std::int64_t day_begin = 0, day_end = 0;  // inclusive range it was built from
};

SlaReference build_sla_reference(const world::WorldConfig& cfg,
                                 std::int64_t day_begin, std::int64_t day_end);

// Samples one source from the fine-resolution truth. All emitted coordinates
// lie on ocean cells; values carry per-channel Gaussian noise. sla_ref may be
// null for schemas without an "sla" channel.
ObservationSet simulate_source(const geo::GridField& truth_fine,
                               const SourceSchema& schema, std::int64_t day,
                               std::uint64_t seed,
                               const SlaReference* sla_ref = nullptr);

ObservationSet perturb_observations(const ObservationSet& obs,
                                    const std::vector<double>& sigma,
                                    std::uint64_t seed);

// Bins points into target_res cells; each nonempty cell contributes one point
// at the member centroid with channel-mean values.
ObservationSet thin_observations(const ObservationSet& obs, double target_res,
                                 const geo::GridSpec& domain);

void write_obs(const std::string& path, const ObservationSet& obs);
ObservationSet read_obs(const std::string& path);
void write_obs_csv(const std::string& path, const ObservationSet& obs);

}  // namespace pointda::obs
