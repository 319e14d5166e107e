#pragma once

#include <cstdint>
#include <vector>

#include "pointda/geo.hpp"

namespace pointda::part {

// One overlapping sub-region. Longitude bounds may exceed the domain span on
// a periodic axis; membership tests wrap. Interiors (patch minus half the
// overlap per interior side) tile the domain exactly once.
struct PatchSpec {
  int id = 0;
  double lat0 = 0, lat1 = 0;
  double lon0 = 0, lon1 = 0;
  double ilat0 = 0, ilat1 = 0;
  double ilon0 = 0, ilon1 = 0;
  bool at_lat_min = false, at_lat_max = false;
  bool at_lon_min = false, at_lon_max = false;  // non-periodic domains only

  // Index ranges of target-grid cells whose centers fall in the full patch.
  // Longitude indices are stored unwrapped (j0 .. j0+nj-1, modulo w).
  int i0 = 0, ni = 0;
  int j0 = 0, nj = 0;
};

struct PartitionConfig {
  double patch_lat = 10.0, patch_lon = 20.0;
  double overlap_lat = 5.0, overlap_lon = 5.0;
};

// Lat-major list of overlapping patches walking the domain at stride
// patch - overlap per axis. Throws ConfigError when the stride does not tile
// a non-periodic axis or patch bounds do not land on grid cell edges.
std::vector<PatchSpec> partition_domain(const geo::GridSpec& spec,
                                        const PartitionConfig& cfg);

bool point_in_patch(double lat, double lon, const PatchSpec& p,
                    const geo::GridSpec& spec);
bool point_in_interior(double lat, double lon, const PatchSpec& p,
                       const geo::GridSpec& spec);

// Indices of points (rows of coords, as (lat, lon) pairs) inside the patch.
// Boundary rule: inclusive at the min edge, exclusive at the max edge, except
// that a patch edge coinciding with a non-periodic domain edge is inclusive.
std::vector<std::int64_t> assign_points(
    const std::vector<std::pair<double, double>>& coords, const PatchSpec& p,
    const geo::GridSpec& spec);

// Blend weight of a patch at a location: 1 inside the interior, decaying
// linearly to 0 at the patch edge, as a product over the two axes.
double blend_weight(const PatchSpec& p, double lat, double lon,
                    const geo::GridSpec& spec);

// Values for one patch on the target grid: ni x nj cells, n_vars planes,
// flattened as (v * ni + di) * nj + dj. Land cells may hold NaN.
struct PatchOutput {
  int patch_id = 0;
  std::vector<double> values;
};

// Normalized hat-weight blend of per-patch outputs into a single field.
// Cells covered by no patch trigger a DomainError. Land cells get NaN.
geo::GridField stitch(const std::vector<PatchSpec>& patches,
                      const std::vector<PatchOutput>& outputs,
                      const geo::GridSpec& spec,
                      const std::vector<std::string>& vars,
                      const std::vector<std::uint8_t>& mask, std::int64_t day);

// Partition plus the stride bookkeeping needed to route many points to their
// covering patches in one pass.
struct Layout {
  geo::GridSpec spec;
  PartitionConfig cfg;
  int n_lat = 0, n_lon = 0;
  double stride_lat = 0, stride_lon = 0;
  std::vector<PatchSpec> patches;

  static Layout make(const geo::GridSpec& spec, const PartitionConfig& cfg);

  // Per-patch index lists; a point lands in every patch that covers it.
  std::vector<std::vector<std::int64_t>> route(
      const std::vector<std::pair<double, double>>& coords) const;
};

}  // namespace pointda::part
