#include "pointda/obs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "pointda/binio.hpp"

namespace pointda::obs {

using geo::GridField;
using geo::GridSpec;

namespace {

constexpr std::uint32_t kObsMagic = 0x314f4450;  // "PDO1"
constexpr std::uint32_t kObsVersion = 1;

bool on_ocean(const GridField& truth, double lat, double lon) {
  const GridSpec& s = truth.spec;
  if (lat <= s.lat_min || lat >= s.lat_max) return false;
  double lx = lon;
  if (s.periodic_lon) {
    lx = s.lon_min + geo::wrap_lon(lon - s.lon_min);
  } else if (lon <= s.lon_min || lon >= s.lon_max) {
    return false;
  }
  const int i = std::min(s.h - 1, static_cast<int>((lat - s.lat_min) / s.res));
  const int j = std::min(s.w - 1, static_cast<int>((lx - s.lon_min) / s.res));
  return truth.ocean(i, j);
}

double ice_fraction(const SourceSchema& sc, double lat, std::int64_t day,
                    double season_days) {
  const double phase = 2.0 * geo::kPi * static_cast<double>(day) / season_days;
  // Ice retreats poleward in the local summer.
  const double edge = lat >= 0
                          ? sc.ice_edge + sc.ice_edge_seasonal * std::sin(phase)
                          : sc.ice_edge - sc.ice_edge_seasonal * std::sin(phase);
  return 1.0 / (1.0 + std::exp(-(std::abs(lat) - edge) / sc.ice_width));
}

// Candidate coordinates for one day, before the ocean filter.
std::vector<std::pair<double, double>> candidate_coords(
    const GridField& truth, const SourceSchema& sc, std::int64_t day,
    Rng& rng) {
  const GridSpec& s = truth.spec;
  std::vector<std::pair<double, double>> pts;

  switch (sc.coverage) {
    case Coverage::WideSwath: {
      const double shift = sc.swath_day_shift * static_cast<double>(day);
      for (double lat = s.lat_min + sc.sample_res / 2; lat < s.lat_max;
           lat += sc.sample_res) {
        for (double lon = s.lon_min + sc.sample_res / 2; lon < s.lon_max;
             lon += sc.sample_res) {
          const double u =
              geo::wrap_lon(lon - sc.swath_slope * (lat - s.lat_min) - shift);
          if (std::fmod(u, sc.swath_period) < sc.swath_width)
            pts.emplace_back(lat, lon);
        }
      }
      break;
    }
    case Coverage::AlongTrack: {
      const double spacing = s.lon_extent() / sc.n_tracks;
      for (int t = 0; t < sc.n_tracks; ++t) {
        const double offset = t * spacing +
                              sc.track_day_shift * static_cast<double>(day);
        for (double lon = s.lon_min + sc.sample_res / 2; lon < s.lon_max;
             lon += sc.sample_res) {
          const double lat =
              sc.track_amp *
              std::sin(2.0 * geo::kPi * (lon - offset) / sc.track_wavelength);
          if (lat > s.lat_min && lat < s.lat_max) pts.emplace_back(lat, lon);
        }
      }
      break;
    }
    case Coverage::PolarGrid: {
      for (double lat = s.lat_min + sc.sample_res / 2; lat < s.lat_max;
           lat += sc.sample_res) {
        if (std::abs(lat) < sc.polar_lat) continue;
        for (double lon = s.lon_min + sc.sample_res / 2; lon < s.lon_max;
             lon += sc.sample_res)
          pts.emplace_back(lat, lon);
      }
      break;
    }
    case Coverage::RandomPoints: {
      const std::int64_t target = sc.random_points_per_day;
      std::int64_t attempts = 0;
      while (static_cast<std::int64_t>(pts.size()) < target &&
             attempts < target * 200) {
        ++attempts;
        const double lat = rng.uniform(s.lat_min, s.lat_max);
        const double lon = rng.uniform(s.lon_min, s.lon_max);
        if (on_ocean(truth, lat, lon)) pts.emplace_back(lat, lon);
      }
      if (static_cast<std::int64_t>(pts.size()) < target)
        throw DomainError("random-points sampling could not reach the target "
                          "count; ocean fraction too small?");
      break;
    }
  }
  return pts;
}

}  // namespace

Coverage coverage_from_tag(const std::string& tag) {
  if (tag == "wide-swath") return Coverage::WideSwath;
  if (tag == "along-track") return Coverage::AlongTrack;
  if (tag == "polar-grid") return Coverage::PolarGrid;
  if (tag == "random-points") return Coverage::RandomPoints;
  throw ConfigError("unknown coverage tag: " + tag);
}

std::string coverage_tag(Coverage c) {
  switch (c) {
    case Coverage::WideSwath: return "wide-swath";
    case Coverage::AlongTrack: return "along-track";
    case Coverage::PolarGrid: return "polar-grid";
    case Coverage::RandomPoints: return "random-points";
  }
  return "?";
}

void SourceSchema::validate() const {
  if (id.empty()) throw SchemaError("source schema needs an id");
  if (channels.empty()) throw SchemaError(id + ": needs at least one channel");
  if (noise_std.size() != channels.size())
    throw SchemaError(id + ": noise list does not match channels");
  for (double s : noise_std)
    if (s < 0) throw SchemaError(id + ": negative noise std");
  if (sample_res <= 0) throw SchemaError(id + ": sample resolution invalid");
  if (coverage == Coverage::RandomPoints && random_points_per_day <= 0)
    throw SchemaError(id + ": random point count invalid");
}

std::vector<SourceSchema> default_schemas(double fine_res) {
  std::vector<SourceSchema> out;

  SourceSchema sst;
  sst.id = "sst";
  sst.channels = {"sst"};
  sst.noise_std = {0.2};
  sst.coverage = Coverage::WideSwath;
  sst.sample_res = fine_res;
  sst.swath_width = 12;
  sst.swath_period = 36;
  sst.swath_slope = 0.5;
  sst.swath_day_shift = 7;
  out.push_back(sst);

  SourceSchema sss;
  sss.id = "sss";
  sss.channels = {"sss"};
  sss.noise_std = {0.15};
  sss.coverage = Coverage::WideSwath;
  sss.sample_res = 2 * fine_res;
  sss.swath_width = 10;
  sss.swath_period = 45;
  sss.swath_slope = -0.4;
  sss.swath_day_shift = 11;
  out.push_back(sss);

  SourceSchema ssw;
  ssw.id = "ssw";
  ssw.channels = {"wspd", "wdir"};
  ssw.noise_std = {0.08, 0.1};
  ssw.coverage = Coverage::WideSwath;
  ssw.sample_res = 2.5 * fine_res;
  ssw.swath_width = 14;
  ssw.swath_period = 40;
  ssw.swath_slope = 0.3;
  ssw.swath_day_shift = 13;
  out.push_back(ssw);

  SourceSchema sic;
  sic.id = "sic";
  sic.channels = {"sic"};
  sic.noise_std = {0.03};
  sic.coverage = Coverage::PolarGrid;
  sic.sample_res = 4 * fine_res;
  sic.polar_lat = 55;
  out.push_back(sic);

  SourceSchema sla;
  sla.id = "sla";
  sla.channels = {"sla"};
  sla.noise_std = {0.02};
  sla.coverage = Coverage::AlongTrack;
  sla.sample_res = 2 * fine_res;
  sla.n_tracks = 14;
  sla.track_amp = 70;
  sla.track_wavelength = 140;
  sla.track_day_shift = 9;
  out.push_back(sla);

  SourceSchema insitu;
  insitu.id = "insitu";
  insitu.channels = {"t", "s"};
  insitu.noise_std = {0.1, 0.05};
  insitu.coverage = Coverage::RandomPoints;
  insitu.random_points_per_day = 1200;
  out.push_back(insitu);

  return out;
}

SlaReference build_sla_reference(const world::WorldConfig& cfg,
                                 std::int64_t day_begin, std::int64_t day_end) {
  if (day_end < day_begin)
    throw DomainError("sla reference: empty day range");
  GridField mean;
  const double n = static_cast<double>(day_end - day_begin + 1);
  for (std::int64_t d = day_begin; d <= day_end; ++d) {
    GridField t = world::truth_state(d, cfg);
    if (d == day_begin) {
      mean = GridField::zeros(t.spec, {"SSH"}, t.mask, 0);
    }
    const double* src = t.plane(world::kVarSsh);
    double* dst = mean.plane(0);
    for (std::int64_t c = 0; c < t.spec.cells(); ++c)
      if (mean.mask[static_cast<std::size_t>(c)]) dst[c] += src[c] / n;
  }
  mean.apply_land_sentinel();
  return {std::move(mean), day_begin, day_end};
}

ObservationSet simulate_source(const GridField& truth_fine,
                               const SourceSchema& schema, std::int64_t day,
                               std::uint64_t seed,
                               const SlaReference* sla_ref) {
  schema.validate();
  for (const auto& ch : schema.channels)
    if (ch == "sla" && sla_ref == nullptr)
      throw SchemaError(schema.id + ": sla channel requires an SLA reference");

  Rng rng(Rng::derive(seed, "obs:" + schema.id, day));
  auto candidates = candidate_coords(truth_fine, schema, day, rng);

  const int iu = truth_fine.var_index("U");
  const int iv = truth_fine.var_index("V");
  const int it = truth_fine.var_index("T");
  const int is = truth_fine.var_index("S");
  const int ih = truth_fine.var_index("SSH");

  ObservationSet out;
  out.source_id = schema.id;
  out.n_channels = schema.n_channels();
  out.day = day;

  std::vector<double> row(schema.channels.size());
  for (const auto& [lat, lon] : candidates) {
    if (!on_ocean(truth_fine, lat, lon)) continue;
    bool ok = true;
    for (std::size_t c = 0; c < schema.channels.size() && ok; ++c) {
      const std::string& ch = schema.channels[c];
      if (ch == "sst" || ch == "t") {
        row[c] = geo::bilinear_sample(truth_fine, lat, lon, it).value;
      } else if (ch == "sss" || ch == "s") {
        row[c] = geo::bilinear_sample(truth_fine, lat, lon, is).value;
      } else if (ch == "wspd" || ch == "wdir") {
        const double u = geo::bilinear_sample(truth_fine, lat, lon, iu).value;
        const double v = geo::bilinear_sample(truth_fine, lat, lon, iv).value;
        row[c] = (ch == "wspd") ? std::hypot(u, v) : std::atan2(v, u);
      } else if (ch == "sla") {
        const double ssh = geo::bilinear_sample(truth_fine, lat, lon, ih).value;
        const auto ref = geo::bilinear_sample(sla_ref->mean_ssh, lat, lon, 0);
        if (!ref.valid) { ok = false; continue; }
        row[c] = ssh - ref.value;
      } else if (ch == "sic") {
        row[c] = ice_fraction(schema, lat, day, 360.0);
      } else {
        throw SchemaError(schema.id + ": unknown channel '" + ch + "'");
      }
      if (!std::isfinite(row[c])) ok = false;
    }
    if (!ok) continue;
    out.coords.emplace_back(lat, lon);
    for (std::size_t c = 0; c < row.size(); ++c) {
      double v = row[c] + rng.normal() * schema.noise_std[c];
      if (schema.channels[c] == "wdir")
        v = std::remainder(v, 2.0 * geo::kPi);
      out.values.push_back(v);
    }
  }
  return out;
}

ObservationSet perturb_observations(const ObservationSet& obs,
                                    const std::vector<double>& sigma,
                                    std::uint64_t seed) {
  if (static_cast<int>(sigma.size()) != obs.n_channels)
    throw SchemaError("perturb_observations: sigma length mismatch");
  for (double s : sigma)
    if (s < 0) throw DomainError("perturb_observations: negative sigma");
  ObservationSet out = obs;
  Rng rng(Rng::derive(seed, "perturb:" + obs.source_id, obs.day));
  for (std::int64_t i = 0; i < obs.size(); ++i)
    for (int c = 0; c < obs.n_channels; ++c)
      out.values[static_cast<std::size_t>(i) * obs.n_channels + c] +=
          rng.normal() * sigma[static_cast<std::size_t>(c)];
  return out;
}

ObservationSet thin_observations(const ObservationSet& obs, double target_res,
                                 const geo::GridSpec& domain) {
  if (target_res <= 0) throw DomainError("thin_observations: bad resolution");
  const int hb = std::max(1, static_cast<int>(std::ceil(
                                 domain.lat_extent() / target_res)));
  const int wb = std::max(1, static_cast<int>(std::ceil(
                                 domain.lon_extent() / target_res)));

  struct Bin {
    std::int64_t count = 0;
    double lat = 0, lon = 0;
    std::vector<double> sum;
  };
  std::map<std::int64_t, Bin> bins;
  for (std::int64_t i = 0; i < obs.size(); ++i) {
    const auto [lat, lon] = obs.coords[static_cast<std::size_t>(i)];
    double lx = lon;
    if (domain.periodic_lon) lx = domain.lon_min + geo::wrap_lon(lon - domain.lon_min);
    const int bi = std::min(hb - 1, std::max(0, static_cast<int>(
                                        (lat - domain.lat_min) / target_res)));
    const int bj = std::min(wb - 1, std::max(0, static_cast<int>(
                                        (lx - domain.lon_min) / target_res)));
    Bin& b = bins[static_cast<std::int64_t>(bi) * wb + bj];
    if (b.sum.empty()) b.sum.assign(obs.n_channels, 0.0);
    b.count += 1;
    b.lat += lat;
    b.lon += lx;
    for (int c = 0; c < obs.n_channels; ++c)
      b.sum[static_cast<std::size_t>(c)] += obs.value(i, c);
  }

  ObservationSet out;
  out.source_id = obs.source_id;
  out.n_channels = obs.n_channels;
  out.day = obs.day;
  for (const auto& [key, b] : bins) {
    out.coords.emplace_back(b.lat / b.count, b.lon / b.count);
    for (int c = 0; c < obs.n_channels; ++c)
      out.values.push_back(b.sum[static_cast<std::size_t>(c)] / b.count);
  }
  return out;
}

void write_obs(const std::string& path, const ObservationSet& obs) {
  BinWriter w(path);
  w.u32(kObsMagic);
  w.u32(kObsVersion);
  w.str(obs.source_id);
  w.i64(obs.day);
  w.u32(static_cast<std::uint32_t>(obs.n_channels));
  w.u64(static_cast<std::uint64_t>(obs.size()));
  for (const auto& [lat, lon] : obs.coords) {
    w.f64(lat);
    w.f64(lon);
  }
  std::vector<float> buf(obs.values.size());
  for (std::size_t k = 0; k < buf.size(); ++k)
    buf[k] = static_cast<float>(obs.values[k]);
  w.f32_array(buf.data(), buf.size());
  w.finish();
}

ObservationSet read_obs(const std::string& path) {
  BinReader r(path);
  if (r.u32() != kObsMagic) throw IoError("not an observation file: " + path);
  if (r.u32() != kObsVersion)
    throw IoError("unsupported observation file version: " + path);
  ObservationSet obs;
  obs.source_id = r.str();
  obs.day = r.i64();
  obs.n_channels = static_cast<int>(r.u32());
  const auto n = r.u64();
  obs.coords.resize(n);
  for (auto& [lat, lon] : obs.coords) {
    lat = r.f64();
    lon = r.f64();
  }
  std::vector<float> buf(n * obs.n_channels);
  r.f32_array(buf.data(), buf.size());
  obs.values.assign(buf.begin(), buf.end());
  r.verify_checksum();
  return obs;
}

void write_obs_csv(const std::string& path, const ObservationSet& obs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "lat,lon";
  for (int c = 0; c < obs.n_channels; ++c) out << ",ch" << c;
  out << "\n";
  char buf[64];
  for (std::int64_t i = 0; i < obs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.8g,%.8g", obs.coords[i].first,
                  obs.coords[i].second);
    out << buf;
    for (int c = 0; c < obs.n_channels; ++c) {
      std::snprintf(buf, sizeof(buf), ",%.8g", obs.value(i, c));
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace pointda::obs
