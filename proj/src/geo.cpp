#include "pointda/geo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pointda/binio.hpp"

namespace pointda::geo {

namespace {
constexpr std::uint32_t kGridMagic = 0x31464450;  // "PDF1"
constexpr std::uint32_t kGridVersion = 1;

int exact_cells(double extent, double res, const char* axis) {
  const double q = extent / res;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9 || r < 1)
    throw ConfigError(std::string("grid extent not an integer multiple of the "
                                  "resolution on ") +
                      axis);
  return static_cast<int>(r);
}

std::vector<std::uint8_t> center_test_mask(const GridSpec& spec,
                                           const LandConfig& cfg) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(spec.cells()));
  for (int i = 0; i < spec.h; ++i)
    for (int j = 0; j < spec.w; ++j)
      mask[static_cast<std::size_t>(i) * spec.w + j] =
          point_on_land(spec.lat_center(i), spec.lon_center(j), cfg) ? 0 : 1;
  return mask;
}
}  // namespace

EncodedCoord encode_coord(double lat_deg, double lon_deg) {
  if (!(lat_deg >= -90.0 && lat_deg <= 90.0))
    throw DomainError("encode_coord: latitude out of [-90, 90]: " +
                      std::to_string(lat_deg));
  const double phi = lat_deg * kDegToRad;
  const double lam = wrap_lon(lon_deg) * kDegToRad;
  return {std::sin(phi), std::cos(phi), std::sin(lam), std::cos(lam)};
}

GridSpec GridSpec::make(double lat_min, double lat_max, double lon_min,
                        double lon_max, double res, bool periodic_lon) {
  if (res <= 0.0) throw ConfigError("grid resolution must be positive");
  if (lat_max <= lat_min || lon_max <= lon_min)
    throw ConfigError("grid extents must be nonempty");
  if (lat_min < -90.0 || lat_max > 90.0)
    throw ConfigError("latitude extent outside [-90, 90]");
  GridSpec s;
  s.lat_min = lat_min;
  s.lat_max = lat_max;
  s.lon_min = lon_min;
  s.lon_max = lon_max;
  s.res = res;
  s.periodic_lon = periodic_lon;
  s.h = exact_cells(lat_max - lat_min, res, "latitude");
  s.w = exact_cells(lon_max - lon_min, res, "longitude");
  if (periodic_lon && std::abs(lon_max - lon_min - 360.0) > 1e-9)
    throw ConfigError("periodic longitude requires a 360-degree extent");
  return s;
}

bool GridSpec::operator==(const GridSpec& o) const {
  return lat_min == o.lat_min && lat_max == o.lat_max && lon_min == o.lon_min &&
         lon_max == o.lon_max && res == o.res && h == o.h && w == o.w &&
         periodic_lon == o.periodic_lon;
}

std::vector<double> lat_weights(const GridSpec& spec) {
  std::vector<double> w(spec.h);
  for (int i = 0; i < spec.h; ++i)
    w[i] = std::cos(spec.lat_center(i) * kDegToRad);
  return w;
}

GridField GridField::zeros(const GridSpec& spec,
                           const std::vector<std::string>& vars,
                           const std::vector<std::uint8_t>& mask,
                           std::int64_t day) {
  if (static_cast<std::int64_t>(mask.size()) != spec.cells())
    throw SchemaError("grid field: mask size mismatch");
  GridField f;
  f.spec = spec;
  f.vars = vars;
  f.mask = mask;
  f.day = day;
  f.values.assign(static_cast<std::size_t>(spec.cells()) * vars.size(), 0.0);
  return f;
}

int GridField::var_index(const std::string& name) const {
  for (std::size_t v = 0; v < vars.size(); ++v)
    if (vars[v] == name) return static_cast<int>(v);
  throw SchemaError("grid field has no variable '" + name + "'");
}

void GridField::apply_land_sentinel() {
  const double nan = land_sentinel();
  for (int v = 0; v < n_vars(); ++v) {
    double* p = plane(v);
    for (std::int64_t c = 0; c < spec.cells(); ++c)
      if (!mask[static_cast<std::size_t>(c)]) p[c] = nan;
  }
}

bool point_on_land(double lat, double lon, const LandConfig& cfg) {
  for (const auto& s : cfg.shapes) {
    if (s.kind == LandShape::Kind::Ellipse) {
      const double dlat = (lat - s.lat0) / s.a;
      const double dlon = wrap_diff(lon, s.lon0) / s.b;
      if (dlat * dlat + dlon * dlon <= 1.0) return true;
    } else {
      const double dlon = wrap_lon(lon - s.lon0);
      if (lat >= s.lat0 && lat <= s.lat0 + s.a && dlon <= s.b) return true;
    }
  }
  return false;
}

std::vector<std::uint8_t> make_land_mask(const GridSpec& spec,
                                         const LandConfig& cfg) {
  if (cfg.shapes.empty())
    throw ConfigError("land config must list at least one landmass");
  const double rq = spec.res / cfg.fine_res;
  const int ratio = static_cast<int>(std::round(rq));
  if (std::abs(rq - ratio) > 1e-9 || ratio < 1)
    throw ConfigError("mask resolution must be an integer multiple of the "
                      "defining fine resolution");

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(spec.cells()));
  if (ratio == 1) {
    mask = center_test_mask(spec, cfg);
  } else {
    GridSpec fine = GridSpec::make(spec.lat_min, spec.lat_max, spec.lon_min,
                                   spec.lon_max, cfg.fine_res,
                                   spec.periodic_lon);
    const auto fine_mask = center_test_mask(fine, cfg);
    for (int i = 0; i < spec.h; ++i)
      for (int j = 0; j < spec.w; ++j) {
        int land = 0;
        for (int di = 0; di < ratio; ++di)
          for (int dj = 0; dj < ratio; ++dj)
            land += fine_mask[static_cast<std::size_t>(i * ratio + di) *
                                  fine.w +
                              (j * ratio + dj)]
                        ? 0
                        : 1;
        mask[static_cast<std::size_t>(i) * spec.w + j] =
            (2 * land > ratio * ratio) ? 0 : 1;
      }
  }

  std::int64_t ocean = 0;
  for (auto m : mask) ocean += m;
  const double frac = static_cast<double>(ocean) / spec.cells();
  if (frac <= 0.5 || frac >= 0.95)
    throw ConfigError("land config yields ocean fraction " +
                      std::to_string(frac) + ", outside (0.5, 0.95)");
  return mask;
}

SampleResult bilinear_sample(const GridField& field, double lat, double lon,
                             int var, LandPolicy policy) {
  const GridSpec& s = field.spec;
  if (lat < s.lat_min || lat > s.lat_max)
    throw DomainError("bilinear_sample: latitude " + std::to_string(lat) +
                      " outside grid extent");
  double lx = lon;
  if (s.periodic_lon) {
    lx = s.lon_min + wrap_lon(lon - s.lon_min);
  } else if (lon < s.lon_min || lon > s.lon_max) {
    throw DomainError("bilinear_sample: longitude " + std::to_string(lon) +
                      " outside grid extent");
  }

  // Fractional position in cell-center coordinates.
  const double fy = (lat - s.lat_min) / s.res - 0.5;
  const double fx = (lx - s.lon_min) / s.res - 0.5;
  int i0 = static_cast<int>(std::floor(fy));
  int j0 = static_cast<int>(std::floor(fx));
  double ty = fy - i0;
  double tx = fx - j0;
  // Clamp the poleward / edge half-cell margins to constant extrapolation.
  if (i0 < 0) { i0 = 0; ty = 0.0; }
  if (i0 >= s.h - 1) { i0 = s.h - 1; ty = 0.0; }
  int j1 = j0 + 1;
  if (s.periodic_lon) {
    j0 = ((j0 % s.w) + s.w) % s.w;
    j1 = (j0 + 1) % s.w;
  } else {
    if (j0 < 0) { j0 = 0; tx = 0.0; }
    if (j0 >= s.w - 1) { j0 = s.w - 1; tx = 0.0; }
    j1 = std::min(j0 + 1, s.w - 1);
  }
  const int i1 = std::min(i0 + 1, s.h - 1);

  const int ii[4] = {i0, i0, i1, i1};
  const int jj[4] = {j0, j1, j0, j1};
  const double wt[4] = {(1 - ty) * (1 - tx), (1 - ty) * tx, ty * (1 - tx),
                        ty * tx};

  bool all_ocean = true;
  for (int c = 0; c < 4; ++c)
    if (!field.ocean(ii[c], jj[c])) all_ocean = false;

  if (all_ocean) {
    double v = 0.0;
    for (int c = 0; c < 4; ++c) v += wt[c] * field.at(var, ii[c], jj[c]);
    return {v, true};
  }

  // Inverse-distance over the ocean corners (distances in cell units).
  double num = 0.0, den = 0.0;
  for (int c = 0; c < 4; ++c) {
    if (!field.ocean(ii[c], jj[c])) continue;
    const double dy = ty - (c >= 2 ? 1.0 : 0.0);
    const double dx = tx - ((c == 1 || c == 3) ? 1.0 : 0.0);
    const double d = std::sqrt(dy * dy + dx * dx);
    const double w = 1.0 / (d + 1e-12);
    num += w * field.at(var, ii[c], jj[c]);
    den += w;
  }
  if (den > 0.0) return {num / den, true};

  if (policy == LandPolicy::NearestOcean) {
    // Expanding ring search around (i0, j0).
    for (int r = 1; r < std::max(s.h, s.w); ++r) {
      double best = 0.0, best_d = 1e300;
      bool found = false;
      for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj) {
          if (std::max(std::abs(di), std::abs(dj)) != r) continue;
          const int i = i0 + di;
          if (i < 0 || i >= s.h) continue;
          int j = j0 + dj;
          if (s.periodic_lon) {
            j = ((j % s.w) + s.w) % s.w;
          } else if (j < 0 || j >= s.w) {
            continue;
          }
          if (!field.ocean(i, j)) continue;
          const double dy = fy - i, dx = fx - (j0 + dj);
          const double d = dy * dy + dx * dx;
          if (d < best_d) {
            best_d = d;
            best = field.at(var, i, j);
            found = true;
          }
        }
      }
      if (found) return {best, true};
    }
  }
  return {land_sentinel(), false};
}

GridField interp_to(const GridField& src, const GridSpec& target,
                    const std::vector<std::uint8_t>& target_mask,
                    LandPolicy policy) {
  GridField out = GridField::zeros(target, src.vars, target_mask, src.day);
  for (int v = 0; v < src.n_vars(); ++v) {
    for (int i = 0; i < target.h; ++i) {
      const double lat = target.lat_center(i);
      for (int j = 0; j < target.w; ++j) {
        if (!out.ocean(i, j)) continue;
        const auto r = bilinear_sample(src, lat, target.lon_center(j), v,
                                       policy);
        out.at(v, i, j) = r.value;
      }
    }
  }
  out.apply_land_sentinel();
  return out;
}

GridField block_average(const GridField& src, const GridSpec& coarse) {
  const double rq = coarse.res / src.spec.res;
  const int ratio = static_cast<int>(std::round(rq));
  if (std::abs(rq - ratio) > 1e-9 || ratio < 1)
    throw SchemaError("block_average: resolutions are not nested");
  if (coarse.h * ratio != src.spec.h || coarse.w * ratio != src.spec.w)
    throw SchemaError("block_average: grid shapes are not nested");

  std::vector<std::uint8_t> cmask(static_cast<std::size_t>(coarse.cells()), 0);
  GridField out;
  {
    // Mask first: majority-land blocks become land.
    for (int i = 0; i < coarse.h; ++i)
      for (int j = 0; j < coarse.w; ++j) {
        int land = 0;
        for (int di = 0; di < ratio; ++di)
          for (int dj = 0; dj < ratio; ++dj)
            land += src.ocean(i * ratio + di, j * ratio + dj) ? 0 : 1;
        cmask[static_cast<std::size_t>(i) * coarse.w + j] =
            (2 * land > ratio * ratio) ? 0 : 1;
      }
    out = GridField::zeros(coarse, src.vars, cmask, src.day);
  }

  for (int v = 0; v < src.n_vars(); ++v) {
    for (int i = 0; i < coarse.h; ++i)
      for (int j = 0; j < coarse.w; ++j) {
        if (!out.ocean(i, j)) continue;
        double num = 0.0, den = 0.0;
        for (int di = 0; di < ratio; ++di) {
          const int fi = i * ratio + di;
          const double wlat = std::cos(src.spec.lat_center(fi) * kDegToRad);
          for (int dj = 0; dj < ratio; ++dj) {
            const int fj = j * ratio + dj;
            if (!src.ocean(fi, fj)) continue;
            num += wlat * src.at(v, fi, fj);
            den += wlat;
          }
        }
        out.at(v, i, j) = num / den;
      }
  }
  out.apply_land_sentinel();
  return out;
}

void write_grid(const std::string& path, const GridField& field) {
  BinWriter w(path);
  w.u32(kGridMagic);
  w.u32(kGridVersion);
  w.f64(field.spec.lat_min);
  w.f64(field.spec.lat_max);
  w.f64(field.spec.lon_min);
  w.f64(field.spec.lon_max);
  w.f64(field.spec.res);
  w.u32(static_cast<std::uint32_t>(field.spec.h));
  w.u32(static_cast<std::uint32_t>(field.spec.w));
  w.u32(field.spec.periodic_lon ? 1 : 0);
  w.i64(field.day);
  w.u32(static_cast<std::uint32_t>(field.vars.size()));
  for (const auto& v : field.vars) w.str(v);
  // Mask as a packed bitset.
  std::vector<std::uint8_t> bits((field.mask.size() + 7) / 8, 0);
  for (std::size_t c = 0; c < field.mask.size(); ++c)
    if (field.mask[c]) bits[c / 8] |= static_cast<std::uint8_t>(1u << (c % 8));
  w.u64(field.mask.size());
  w.raw(bits.data(), bits.size());
  std::vector<float> buf(field.values.size());
  for (std::size_t k = 0; k < buf.size(); ++k)
    buf[k] = static_cast<float>(field.values[k]);
  w.f32_array(buf.data(), buf.size());
  w.finish();
}

GridField read_grid(const std::string& path) {
  BinReader r(path);
  if (r.u32() != kGridMagic) throw IoError("not a grid file: " + path);
  if (r.u32() != kGridVersion)
    throw IoError("unsupported grid file version: " + path);
  const double lat_min = r.f64(), lat_max = r.f64();
  const double lon_min = r.f64(), lon_max = r.f64();
  const double res = r.f64();
  const int h = static_cast<int>(r.u32());
  const int w = static_cast<int>(r.u32());
  const bool periodic = r.u32() != 0;
  GridSpec spec = GridSpec::make(lat_min, lat_max, lon_min, lon_max, res,
                                 periodic);
  if (spec.h != h || spec.w != w)
    throw IoError("grid file header is inconsistent: " + path);
  const std::int64_t day = r.i64();
  const auto n_vars = r.u32();
  std::vector<std::string> vars;
  for (std::uint32_t v = 0; v < n_vars; ++v) vars.push_back(r.str());
  const auto mask_len = r.u64();
  if (mask_len != static_cast<std::uint64_t>(spec.cells()))
    throw IoError("grid file mask length mismatch: " + path);
  std::vector<std::uint8_t> bits((mask_len + 7) / 8);
  r.raw(bits.data(), bits.size());
  std::vector<std::uint8_t> mask(mask_len);
  for (std::uint64_t c = 0; c < mask_len; ++c)
    mask[c] = (bits[c / 8] >> (c % 8)) & 1u;
  GridField f = GridField::zeros(spec, vars, mask, day);
  std::vector<float> buf(f.values.size());
  r.f32_array(buf.data(), buf.size());
  for (std::size_t k = 0; k < buf.size(); ++k) f.values[k] = buf[k];
  r.verify_checksum();
  return f;
}

std::string grid_header_text(const std::string& path) {
  GridField f = read_grid(path);
  std::int64_t ocean = 0;
  for (auto m : f.mask) ocean += m;
  std::ostringstream os;
  os << "grid file: " << path << "\n"
     << "lat: [" << f.spec.lat_min << ", " << f.spec.lat_max << "]  lon: ["
     << f.spec.lon_min << ", " << f.spec.lon_max << ")  res: " << f.spec.res
     << "  h x w: " << f.spec.h << " x " << f.spec.w
     << "  periodic_lon: " << (f.spec.periodic_lon ? "yes" : "no") << "\n"
     << "day: " << f.day << "  ocean cells: " << ocean << " / " << f.spec.cells()
     << "\nvariables:";
  for (const auto& v : f.vars) os << " " << v;
  os << "\n";
  return os.str();
}

}  // namespace pointda::geo
