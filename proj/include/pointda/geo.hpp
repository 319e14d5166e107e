#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pointda/common.hpp"

namespace pointda::geo {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;

// Land cells carry NaN so an accidental read poisons downstream numbers
// instead of silently passing.
inline double land_sentinel() {
  return std::numeric_limits<double>::quiet_NaN();
}

inline double wrap_lon(double lon) {
  double w = std::fmod(lon, 360.0);
  if (w < 0.0) w += 360.0;
  return w;
}

// Shortest signed difference a - b on the 360-degree circle.
inline double wrap_diff(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d < -180.0) d += 360.0;
  return d;
}

struct EncodedCoord {
  double lat_sin, lat_cos, lon_sin, lon_cos;
};

EncodedCoord encode_coord(double lat_deg, double lon_deg);

// Cell-center registered regular grid. Row 0 is the southernmost row.
struct GridSpec {
  double lat_min = -90.0, lat_max = 90.0;
  double lon_min = 0.0, lon_max = 360.0;
  double res = 1.0;
  int h = 0, w = 0;
  bool periodic_lon = true;

  static GridSpec make(double lat_min, double lat_max, double lon_min,
                       double lon_max, double res, bool periodic_lon);

  double lat_center(int i) const { return lat_min + (i + 0.5) * res; }
  double lon_center(int j) const { return lon_min + (j + 0.5) * res; }
  double lat_extent() const { return lat_max - lat_min; }
  double lon_extent() const { return lon_max - lon_min; }
  std::int64_t cells() const {
    return static_cast<std::int64_t>(h) * static_cast<std::int64_t>(w);
  }
  bool operator==(const GridSpec& o) const;
};

std::vector<double> lat_weights(const GridSpec& spec);

// Multi-variable gridded state. Values are stored as per-variable planes of
// h*w doubles; land cells hold NaN on every variable.
struct GridField {
  GridSpec spec;
  std::vector<std::string> vars;
  std::vector<double> values;        // vars.size() * h * w
  std::vector<std::uint8_t> mask;    // h * w, 1 = ocean
  std::int64_t day = 0;

  static GridField zeros(const GridSpec& spec,
                         const std::vector<std::string>& vars,
                         const std::vector<std::uint8_t>& mask,
                         std::int64_t day);

  int var_index(const std::string& name) const;
  std::int64_t n_vars() const { return static_cast<std::int64_t>(vars.size()); }

  double& at(int v, int i, int j) {
    return values[(static_cast<std::int64_t>(v) * spec.h + i) * spec.w + j];
  }
  double at(int v, int i, int j) const {
    return values[(static_cast<std::int64_t>(v) * spec.h + i) * spec.w + j];
  }
  const double* plane(int v) const { return values.data() + v * spec.cells(); }
  double* plane(int v) { return values.data() + v * spec.cells(); }
  bool ocean(int i, int j) const {
    return mask[static_cast<std::size_t>(i) * spec.w + j] != 0;
  }

  // NaN-fills every land cell on all variables.
  void apply_land_sentinel();
};

// Analytic landmass description used by the synthetic world.
struct LandShape {
  enum class Kind { Ellipse, Rect } kind = Kind::Ellipse;
  double lat0 = 0, lon0 = 0;   // ellipse center / rect south-west corner
  double a = 0, b = 0;         // ellipse semi-axes / rect lat,lon extents
};

struct LandConfig {
  std::vector<LandShape> shapes;
  double fine_res = 0.5;  // resolution of the defining center test
};

bool point_on_land(double lat, double lon, const LandConfig& cfg);

// Land mask at the requested resolution. The mask is defined by a
// cell-center containment test at cfg.fine_res; coarser grids are the
// majority downsample of that fine mask, so masks at nested resolutions are
// mutually consistent. Requires 0.5 < ocean fraction < 0.95.
std::vector<std::uint8_t> make_land_mask(const GridSpec& spec,
                                         const LandConfig& cfg);

struct SampleResult {
  double value = 0.0;
  bool valid = false;
};

enum class LandPolicy {
  FlagInvalid,   // all-land neighborhood yields valid = false
  NearestOcean,  // fall back to the nearest ocean cell value
};

// Ocean-aware bilinear interpolation at (lat, lon) for one variable. If any
// of the four surrounding cell centers is land, falls back to
// inverse-distance weighting over the ocean corners.
SampleResult bilinear_sample(const GridField& field, double lat, double lon,
                             int var,
                             LandPolicy policy = LandPolicy::FlagInvalid);

// Interpolates every variable of src onto the target grid. Target land cells
// get the sentinel. Ocean target cells with an all-land source neighborhood
// follow the policy (NearestOcean guarantees a finite value everywhere).
GridField interp_to(const GridField& src, const GridSpec& target,
                    const std::vector<std::uint8_t>& target_mask,
                    LandPolicy policy = LandPolicy::NearestOcean);

// Area-weighted (cos-lat) block average onto a coarser grid whose resolution
// is an integer multiple of src. A coarse cell is land when more than half
// of its fine cells are land; otherwise it averages the ocean fine cells.
GridField block_average(const GridField& src, const GridSpec& coarse);

void write_grid(const std::string& path, const GridField& field);
GridField read_grid(const std::string& path);
std::string grid_header_text(const std::string& path);

}  // namespace pointda::geo
