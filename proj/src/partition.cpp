#include "pointda/partition.hpp"

#include <algorithm>
#include <cmath>

namespace pointda::part {

namespace {

int exact_count(double extent, double patch, double stride, const char* axis) {
  const double q = (extent - patch) / stride;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9 || r < 0)
    throw ConfigError(std::string("patch stride does not tile the ") + axis +
                      " extent");
  return static_cast<int>(r) + 1;
}

void check_grid_aligned(double value, double res, const char* what) {
  const double q = value / res;
  if (std::abs(q - std::round(q)) > 1e-9)
    throw ConfigError(std::string(what) +
                      " must be a multiple of the grid resolution");
}

double axis_weight(double x, double lo, double ilo, double ihi, double hi) {
  if (x < lo || x > hi) return 0.0;
  if (x < ilo) return (x - lo) / (ilo - lo);
  if (x > ihi) return (hi - x) / (hi - ihi);
  return 1.0;
}

}  // namespace

std::vector<PatchSpec> partition_domain(const geo::GridSpec& spec,
                                        const PartitionConfig& cfg) {
  if (cfg.overlap_lat < 0 || cfg.overlap_lon < 0)
    throw ConfigError("patch overlap must be nonnegative");
  if (cfg.patch_lat <= cfg.overlap_lat || cfg.patch_lon <= cfg.overlap_lon)
    throw ConfigError("patch size must exceed the overlap");
  const double stride_lat = cfg.patch_lat - cfg.overlap_lat;
  const double stride_lon = cfg.patch_lon - cfg.overlap_lon;
  check_grid_aligned(cfg.patch_lat, spec.res, "patch latitude size");
  check_grid_aligned(cfg.patch_lon, spec.res, "patch longitude size");
  check_grid_aligned(stride_lat, spec.res, "latitude stride");
  check_grid_aligned(stride_lon, spec.res, "longitude stride");

  const int n_lat = exact_count(spec.lat_extent(), cfg.patch_lat, stride_lat,
                                "latitude");
  int n_lon;
  if (spec.periodic_lon) {
    const double q = spec.lon_extent() / stride_lon;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 || r < 1)
      throw ConfigError("longitude stride does not divide the periodic extent");
    n_lon = static_cast<int>(r);
    if (cfg.patch_lon > spec.lon_extent())
      throw ConfigError("patch wider than the periodic longitude extent");
  } else {
    n_lon = exact_count(spec.lon_extent(), cfg.patch_lon, stride_lon,
                        "longitude");
  }

  const int ni = static_cast<int>(std::round(cfg.patch_lat / spec.res));
  const int nj = static_cast<int>(std::round(cfg.patch_lon / spec.res));

  std::vector<PatchSpec> out;
  out.reserve(static_cast<std::size_t>(n_lat) * n_lon);
  for (int r = 0; r < n_lat; ++r) {
    const double lat0 = spec.lat_min + r * stride_lat;
    for (int c = 0; c < n_lon; ++c) {
      const double lon0 = spec.lon_min + c * stride_lon;
      PatchSpec p;
      p.id = static_cast<int>(out.size());
      p.lat0 = lat0;
      p.lat1 = lat0 + cfg.patch_lat;
      p.lon0 = lon0;
      p.lon1 = lon0 + cfg.patch_lon;
      p.at_lat_min = (r == 0);
      p.at_lat_max = (r == n_lat - 1);
      p.at_lon_min = !spec.periodic_lon && c == 0;
      p.at_lon_max = !spec.periodic_lon && c == n_lon - 1;
      p.ilat0 = p.at_lat_min ? p.lat0 : p.lat0 + cfg.overlap_lat / 2;
      p.ilat1 = p.at_lat_max ? p.lat1 : p.lat1 - cfg.overlap_lat / 2;
      p.ilon0 = p.at_lon_min ? p.lon0 : p.lon0 + cfg.overlap_lon / 2;
      p.ilon1 = p.at_lon_max ? p.lon1 : p.lon1 - cfg.overlap_lon / 2;
      p.i0 = static_cast<int>(std::round((p.lat0 - spec.lat_min) / spec.res));
      p.ni = ni;
      p.j0 = static_cast<int>(std::round((p.lon0 - spec.lon_min) / spec.res));
      p.nj = nj;
      out.push_back(p);
    }
  }
  return out;
}

bool point_in_patch(double lat, double lon, const PatchSpec& p,
                    const geo::GridSpec& spec) {
  if (lat < p.lat0) return false;
  if (lat > p.lat1 || (lat == p.lat1 && !p.at_lat_max)) return false;
  if (spec.periodic_lon) {
    const double u = geo::wrap_lon(lon - p.lon0);
    return u < p.lon1 - p.lon0;
  }
  if (lon < p.lon0) return false;
  if (lon > p.lon1 || (lon == p.lon1 && !p.at_lon_max)) return false;
  return true;
}

bool point_in_interior(double lat, double lon, const PatchSpec& p,
                       const geo::GridSpec& spec) {
  if (lat < p.ilat0) return false;
  if (lat > p.ilat1 || (lat == p.ilat1 && !p.at_lat_max)) return false;
  if (spec.periodic_lon) {
    const double u = geo::wrap_lon(lon - p.ilon0);
    return u < p.ilon1 - p.ilon0;
  }
  if (lon < p.ilon0) return false;
  if (lon > p.ilon1 || (lon == p.ilon1 && !p.at_lon_max)) return false;
  return true;
}

std::vector<std::int64_t> assign_points(
    const std::vector<std::pair<double, double>>& coords, const PatchSpec& p,
    const geo::GridSpec& spec) {
  std::vector<std::int64_t> idx;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    if (!std::isfinite(coords[k].first) || !std::isfinite(coords[k].second))
      throw DomainError("assign_points: non-finite coordinate");
    if (point_in_patch(coords[k].first, coords[k].second, p, spec))
      idx.push_back(static_cast<std::int64_t>(k));
  }
  return idx;
}

double blend_weight(const PatchSpec& p, double lat, double lon,
                    const geo::GridSpec& spec) {
  const double wlat = axis_weight(lat, p.lat0, p.ilat0, p.ilat1, p.lat1);
  double wlon;
  if (spec.periodic_lon) {
    const double u = geo::wrap_lon(lon - p.lon0);
    wlon = axis_weight(u, 0.0, p.ilon0 - p.lon0, p.ilon1 - p.lon0,
                       p.lon1 - p.lon0);
  } else {
    wlon = axis_weight(lon, p.lon0, p.ilon0, p.ilon1, p.lon1);
  }
  return wlat * wlon;
}

Layout Layout::make(const geo::GridSpec& spec, const PartitionConfig& cfg) {
  Layout l;
  l.spec = spec;
  l.cfg = cfg;
  l.stride_lat = cfg.patch_lat - cfg.overlap_lat;
  l.stride_lon = cfg.patch_lon - cfg.overlap_lon;
  l.patches = partition_domain(spec, cfg);
  l.n_lat = static_cast<int>(std::round(
      (spec.lat_extent() - cfg.patch_lat) / l.stride_lat)) + 1;
  l.n_lon = static_cast<int>(l.patches.size()) / l.n_lat;
  return l;
}

std::vector<std::vector<std::int64_t>> Layout::route(
    const std::vector<std::pair<double, double>>& coords) const {
  std::vector<std::vector<std::int64_t>> out(patches.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto [lat, lon] = coords[k];
    if (!std::isfinite(lat) || !std::isfinite(lon))
      throw DomainError("route: non-finite coordinate");
    if (lat < spec.lat_min || lat > spec.lat_max) continue;

    const double a = lat - spec.lat_min;
    int r_lo = static_cast<int>(
                   std::floor((a - cfg.patch_lat) / stride_lat + 1e-12)) + 1;
    int r_hi = static_cast<int>(std::floor(a / stride_lat + 1e-12));
    r_lo = std::max(r_lo, 0);
    r_hi = std::min(r_hi, n_lat - 1);

    double u = lon - spec.lon_min;
    if (spec.periodic_lon) u = geo::wrap_lon(u);
    int c_lo = static_cast<int>(
                   std::floor((u - cfg.patch_lon) / stride_lon + 1e-12)) + 1;
    int c_hi = static_cast<int>(std::floor(u / stride_lon + 1e-12));
    if (!spec.periodic_lon) {
      if (u < 0 || u > spec.lon_extent()) continue;
      c_lo = std::max(c_lo, 0);
      c_hi = std::min(c_hi, n_lon - 1);
    }

    for (int r = r_lo; r <= r_hi; ++r) {
      for (int c = c_lo; c <= c_hi; ++c) {
        const int cc = spec.periodic_lon ? ((c % n_lon) + n_lon) % n_lon : c;
        const auto pid = static_cast<std::size_t>(r) * n_lon + cc;
        if (point_in_patch(lat, lon, patches[pid], spec))
          out[pid].push_back(static_cast<std::int64_t>(k));
      }
    }
  }
  return out;
}

geo::GridField stitch(const std::vector<PatchSpec>& patches,
                      const std::vector<PatchOutput>& outputs,
                      const geo::GridSpec& spec,
                      const std::vector<std::string>& vars,
                      const std::vector<std::uint8_t>& mask,
                      std::int64_t day) {
  const int nv = static_cast<int>(vars.size());
  geo::GridField out = geo::GridField::zeros(spec, vars, mask, day);
  std::vector<double> wsum(static_cast<std::size_t>(spec.cells()), 0.0);

  for (const auto& po : outputs) {
    if (po.patch_id < 0 || po.patch_id >= static_cast<int>(patches.size()))
      throw SchemaError("stitch: unknown patch id");
    const PatchSpec& p = patches[static_cast<std::size_t>(po.patch_id)];
    if (po.values.size() !=
        static_cast<std::size_t>(nv) * p.ni * static_cast<std::size_t>(p.nj))
      throw SchemaError("stitch: patch output size mismatch");
    for (int di = 0; di < p.ni; ++di) {
      const int i = p.i0 + di;
      const double lat = spec.lat_center(i);
      for (int dj = 0; dj < p.nj; ++dj) {
        int j = p.j0 + dj;
        if (spec.periodic_lon) j %= spec.w;
        const std::size_t cell = static_cast<std::size_t>(i) * spec.w + j;
        if (!mask[cell]) continue;
        const double wgt = blend_weight(p, lat, spec.lon_center(j), spec);
        wsum[cell] += wgt;
        for (int v = 0; v < nv; ++v)
          out.at(v, i, j) +=
              wgt * po.values[(static_cast<std::size_t>(v) * p.ni + di) * p.nj +
                              dj];
      }
    }
  }

  for (int i = 0; i < spec.h; ++i)
    for (int j = 0; j < spec.w; ++j) {
      const std::size_t cell = static_cast<std::size_t>(i) * spec.w + j;
      if (!mask[cell]) continue;
      if (wsum[cell] <= 0.0)
        throw DomainError("stitch: cell (" + std::to_string(i) + ", " +
                          std::to_string(j) + ") covered by no patch");
      for (int v = 0; v < nv; ++v) out.at(v, i, j) /= wsum[cell];
    }
  out.apply_land_sentinel();
  return out;
}

}  // namespace pointda::part
