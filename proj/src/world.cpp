#include "pointda/world.hpp"

#include <algorithm>
#include <cmath>

namespace pointda::world {

using geo::GridField;
using geo::GridSpec;
using geo::kDegToRad;

namespace {

constexpr double kTwoPi = 2.0 * geo::kPi;
constexpr double kEddyCutoffSigmas = 8.0;  // tail below 1e-13 of the peak

struct SshPlanes {
  std::vector<double> ssh, d_lat, d_lon;
};

// Visits every grid cell within the cutoff radius of one Gaussian and hands
// the callback the local value and its degree-derivatives.
template <typename Fn>
void for_gaussian_cells(const GridSpec& spec, double amp, double lat_c,
                        double lon_c, double radius, Fn&& fn) {
  const double cphi = std::cos(lat_c * kDegToRad);
  const double reach = kEddyCutoffSigmas * radius;
  const double inv_r2 = 1.0 / (radius * radius);

  const int i_lo = std::max(
      0, static_cast<int>(std::floor((lat_c - reach - spec.lat_min) / spec.res)));
  const int i_hi = std::min(
      spec.h - 1,
      static_cast<int>(std::ceil((lat_c + reach - spec.lat_min) / spec.res)));

  int j_lo = 0, j_hi = spec.w - 1;
  bool wrap = false;
  const double lon_reach = (cphi > 1e-6) ? reach / cphi : 360.0;
  if (lon_reach * 2.0 < spec.lon_extent()) {
    wrap = spec.periodic_lon;
    j_lo = static_cast<int>(std::floor((lon_c - lon_reach - spec.lon_min) /
                                       spec.res));
    j_hi = static_cast<int>(std::ceil((lon_c + lon_reach - spec.lon_min) /
                                      spec.res));
    if (!wrap) {
      j_lo = std::max(0, j_lo);
      j_hi = std::min(spec.w - 1, j_hi);
    }
  }

  for (int i = i_lo; i <= i_hi; ++i) {
    const double dphi = spec.lat_center(i) - lat_c;
    for (int jr = j_lo; jr <= j_hi; ++jr) {
      const int j = wrap ? ((jr % spec.w) + spec.w) % spec.w : jr;
      const double dlam = geo::wrap_diff(spec.lon_center(j), lon_c);
      const double d2 = dphi * dphi + dlam * cphi * dlam * cphi;
      if (d2 > reach * reach) continue;
      const double g = amp * std::exp(-0.5 * d2 * inv_r2);
      fn(i, j, g, -g * dphi * inv_r2, -g * dlam * cphi * cphi * inv_r2);
    }
  }
}

void accumulate_gaussian(SshPlanes& p, const GridSpec& spec, double amp,
                         double lat_c, double lon_c, double radius) {
  for_gaussian_cells(spec, amp, lat_c, lon_c, radius,
                     [&](int i, int j, double g, double gdlat, double gdlon) {
                       const std::size_t c =
                           static_cast<std::size_t>(i) * spec.w + j;
                       p.ssh[c] += g;
                       p.d_lat[c] += gdlat;
                       p.d_lon[c] += gdlon;
                     });
}

double seasonal_phase(std::int64_t day, const WorldConfig& cfg) {
  return std::sin(kTwoPi * static_cast<double>(day) / cfg.season_days);
}

}  // namespace

GridSpec WorldConfig::fine_spec() const {
  return GridSpec::make(lat_min, lat_max, lon_min, lon_max, fine_res,
                        periodic_lon);
}

GridSpec WorldConfig::coarse_spec() const {
  return GridSpec::make(lat_min, lat_max, lon_min, lon_max,
                        fine_res * coarse_ratio, periodic_lon);
}

void WorldConfig::validate() const {
  if (coarse_ratio < 2) throw ConfigError("coarse ratio must be >= 2");
  if (eddy_amp_max < eddy_amp_min || eddy_amp_min < 0)
    throw ConfigError("eddy amplitude range invalid");
  if (eddy_radius_min <= 0 || eddy_radius_max < eddy_radius_min)
    throw ConfigError("eddy radius range invalid");
  if (eps_f <= 0) throw ConfigError("eps_f must be positive");
  if (season_days <= 0) throw ConfigError("season length must be positive");
  fine_spec();
  coarse_spec();
}

geo::LandConfig default_land(double fine_res) {
  geo::LandConfig land;
  land.fine_res = fine_res;
  using geo::LandShape;
  auto rect = [](double lat0, double dlat, double lon0, double dlon) {
    LandShape s;
    s.kind = LandShape::Kind::Rect;
    s.lat0 = lat0;
    s.a = dlat;
    s.lon0 = lon0;
    s.b = dlon;
    return s;
  };
  auto ellipse = [](double lat, double lon, double a, double b) {
    LandShape s;
    s.kind = LandShape::Kind::Ellipse;
    s.lat0 = lat;
    s.lon0 = lon;
    s.a = a;
    s.b = b;
    return s;
  };
  land.shapes.push_back(rect(84, 6, 0, 360));     // north polar cap
  land.shapes.push_back(rect(-90, 6, 0, 360));    // south polar cap
  land.shapes.push_back(ellipse(45, 255, 28, 40));   // northern continent
  land.shapes.push_back(ellipse(-8, 300, 25, 18));   // tropical continent
  land.shapes.push_back(ellipse(20, 60, 22, 30));    // second northern landmass
  land.shapes.push_back(ellipse(68, 10, 10, 35));    // high-latitude island
  return land;
}

std::vector<Eddy> eddy_population(const WorldConfig& cfg) {
  Rng rng(Rng::derive(cfg.seed, "eddies"));
  std::vector<Eddy> eddies;
  eddies.reserve(cfg.n_eddies);
  for (int e = 0; e < cfg.n_eddies; ++e) {
    Eddy ed;
    const double mag = rng.uniform(cfg.eddy_amp_min, cfg.eddy_amp_max);
    ed.amp = rng.uniform() < 0.5 ? mag : -mag;
    ed.lat = rng.uniform(cfg.eddy_lat_min, cfg.eddy_lat_max);
    ed.lon0 = rng.uniform(cfg.lon_min, cfg.lon_max);
    ed.radius = rng.uniform(cfg.eddy_radius_min, cfg.eddy_radius_max);
    ed.drift = rng.uniform(cfg.eddy_drift_min, cfg.eddy_drift_max);
    eddies.push_back(ed);
  }
  return eddies;
}

SshPoint ssh_point(double lat, double lon, std::int64_t day,
                   const WorldConfig& cfg) {
  SshPoint out{0, 0, 0};
  for (const auto& e : eddy_population(cfg)) {
    const double lon_c = geo::wrap_lon(e.lon0 + e.drift * day);
    const double cphi = std::cos(e.lat * kDegToRad);
    const double dphi = lat - e.lat;
    const double dlam = geo::wrap_diff(lon, lon_c);
    const double d2 = dphi * dphi + dlam * cphi * dlam * cphi;
    const double reach = kEddyCutoffSigmas * e.radius;
    if (d2 > reach * reach) continue;
    const double inv_r2 = 1.0 / (e.radius * e.radius);
    const double g = e.amp * std::exp(-0.5 * d2 * inv_r2);
    out.ssh += g;
    out.d_lat += -g * dphi * inv_r2;
    out.d_lon += -g * dlam * cphi * cphi * inv_r2;
  }
  const double tj = std::tanh((lat - cfg.jet_lat) / cfg.jet_width);
  out.ssh += -cfg.jet_amp * tj;
  out.d_lat += -cfg.jet_amp * (1.0 - tj * tj) / cfg.jet_width;
  const double season = seasonal_phase(day, cfg);
  out.ssh += cfg.seasonal_ssh_amp * season * std::sin(lat * kDegToRad);
  out.d_lat +=
      cfg.seasonal_ssh_amp * season * std::cos(lat * kDegToRad) * kDegToRad;
  return out;
}

double derive_u(double lat, double d_ssh_dlat, const WorldConfig& cfg) {
  const double s = std::sin(lat * kDegToRad);
  const double invf = s / (s * s + cfg.eps_f * cfg.eps_f);
  return -cfg.g_gain * invf * d_ssh_dlat;
}

double derive_v(double lat, double d_ssh_dlon, const WorldConfig& cfg) {
  const double s = std::sin(lat * kDegToRad);
  const double invf = s / (s * s + cfg.eps_f * cfg.eps_f);
  return cfg.g_gain * invf * d_ssh_dlon / std::cos(lat * kDegToRad);
}

double derive_t(double lat, double ssh, std::int64_t day,
                const WorldConfig& cfg) {
  const double c = std::cos(lat * kDegToRad);
  const double t0 = cfg.t_pole + (cfg.t_eq - cfg.t_pole) * c * c;
  return t0 + cfg.alpha * ssh +
         cfg.seasonal_t_amp * seasonal_phase(day, cfg) *
             std::sin(lat * kDegToRad);
}

double derive_s(double ssh, const WorldConfig& cfg) {
  return cfg.s0 - cfg.beta * ssh;
}

GridField render_state(const GridSpec& spec, std::int64_t day,
                       const std::vector<EddyState>& eddies,
                       const WorldConfig& cfg) {
  SshPlanes p;
  const std::size_t n = static_cast<std::size_t>(spec.cells());
  p.ssh.assign(n, 0.0);
  p.d_lat.assign(n, 0.0);
  p.d_lon.assign(n, 0.0);
  for (const auto& e : eddies)
    accumulate_gaussian(p, spec, e.amp, e.lat, e.lon, e.radius);

  const double season = seasonal_phase(day, cfg);
  GridField f = GridField::zeros(spec, kVars,
                                 geo::make_land_mask(spec, cfg.land), day);
  for (int i = 0; i < spec.h; ++i) {
    const double lat = spec.lat_center(i);
    const double tj = std::tanh((lat - cfg.jet_lat) / cfg.jet_width);
    const double jet = -cfg.jet_amp * tj;
    const double jet_dlat = -cfg.jet_amp * (1.0 - tj * tj) / cfg.jet_width;
    const double seas = cfg.seasonal_ssh_amp * season * std::sin(lat * kDegToRad);
    const double seas_dlat =
        cfg.seasonal_ssh_amp * season * std::cos(lat * kDegToRad) * kDegToRad;
    for (int j = 0; j < spec.w; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * spec.w + j;
      const double ssh = p.ssh[c] + jet + seas;
      const double d_lat = p.d_lat[c] + jet_dlat + seas_dlat;
      const double d_lon = p.d_lon[c];
      f.at(kVarSsh, i, j) = ssh;
      f.at(kVarU, i, j) = derive_u(lat, d_lat, cfg);
      f.at(kVarV, i, j) = derive_v(lat, d_lon, cfg);
      f.at(kVarT, i, j) = derive_t(lat, ssh, day, cfg);
      f.at(kVarS, i, j) = derive_s(ssh, cfg);
    }
  }
  f.apply_land_sentinel();
  return f;
}

GridField truth_state(std::int64_t day, const WorldConfig& cfg) {
  if (day < 0) throw DomainError("truth_state: day must be >= 0");
  std::vector<EddyState> states;
  for (const auto& e : eddy_population(cfg))
    states.push_back({e.amp, e.lat,
                      geo::wrap_lon(e.lon0 + e.drift * static_cast<double>(day)),
                      e.radius});
  return render_state(cfg.fine_spec(), day, states, cfg);
}

void ForecastParams::validate() const {
  if (drift_factor <= 0) throw ConfigError("drift factor must be positive");
  if (amp_decay <= 0 || amp_decay > 1)
    throw ConfigError("amplitude decay must be in (0, 1]");
  if (err_scale_ssh < 0 || err_scale_t < 0 || err_scale_s < 0)
    throw ConfigError("error scales must be nonnegative");
  if (err_corr_deg <= 0) throw ConfigError("error correlation length invalid");
}

namespace {

// Eddy configuration of the imperfect model at a given forecast age.
std::vector<EddyState> model_eddies(const WorldConfig& cfg,
                                    const ForecastParams& fp,
                                    std::int64_t age) {
  const double decay = std::pow(fp.amp_decay, static_cast<double>(age));
  std::vector<EddyState> states;
  for (const auto& e : eddy_population(cfg)) {
    const double t = static_cast<double>(fp.anchor_day) +
                     fp.drift_factor * static_cast<double>(age);
    states.push_back(
        {e.amp * decay, e.lat, geo::wrap_lon(e.lon0 + e.drift * t), e.radius});
  }
  return states;
}

std::vector<Bump> draw_bumps(const WorldConfig& cfg, const ForecastParams& fp,
                             std::uint64_t seed, std::int64_t age) {
  Rng rng(Rng::derive(seed, "fcerr", age));
  std::vector<Bump> bumps;
  const double scales[3] = {fp.err_scale_ssh, fp.err_scale_t, fp.err_scale_s};
  const int vars[3] = {kVarSsh, kVarT, kVarS};
  for (int k = 0; k < 3; ++k) {
    for (int b = 0; b < fp.err_bumps_per_step; ++b) {
      Bump bp;
      bp.var = vars[k];
      bp.lat = rng.uniform(cfg.lat_min + 8.0, cfg.lat_max - 8.0);
      bp.lon = rng.uniform(cfg.lon_min, cfg.lon_max);
      bp.radius = fp.err_corr_deg * rng.uniform(0.75, 1.25);
      bp.amp = rng.normal() * scales[k];
      bumps.push_back(bp);
    }
  }
  return bumps;
}

void add_bumps(GridField& x, const std::vector<Bump>& bumps,
               const WorldConfig& cfg) {
  const GridSpec& spec = x.spec;
  for (const auto& b : bumps) {
    for_gaussian_cells(
        spec, b.amp, b.lat, b.lon, b.radius,
        [&](int i, int j, double g, double gdlat, double gdlon) {
          if (!x.ocean(i, j)) return;
          if (b.var == kVarSsh) {
            const double lat = spec.lat_center(i);
            x.at(kVarSsh, i, j) += g;
            x.at(kVarU, i, j) += derive_u(lat, gdlat, cfg);
            x.at(kVarV, i, j) += derive_v(lat, gdlon, cfg);
          } else {
            x.at(b.var, i, j) += g;
          }
        });
  }
}

// x(age+1) = x(age) + [ref(age+1) - ref(age)] + noise(age).
void apply_step(GridField& x, const GridField& ref_now, const GridField& ref_next,
                const std::vector<Bump>& bumps, const WorldConfig& cfg) {
  for (int v = 0; v < x.n_vars(); ++v) {
    double* xp = x.plane(v);
    const double* a = ref_now.plane(v);
    const double* b = ref_next.plane(v);
    for (std::int64_t c = 0; c < x.spec.cells(); ++c)
      if (x.mask[static_cast<std::size_t>(c)]) xp[c] += b[c] - a[c];
  }
  add_bumps(x, bumps, cfg);
  x.day += 1;
}

}  // namespace

GridField forecast_step(const GridField& state, const WorldConfig& cfg,
                        const ForecastParams& fp, std::uint64_t seed) {
  fp.validate();
  const std::int64_t age = state.day - fp.anchor_day;
  if (age < 0)
    throw DomainError("forecast_step: state precedes the forecast anchor");
  const GridField ref_now =
      render_state(state.spec, state.day, model_eddies(cfg, fp, age), cfg);
  const GridField ref_next = render_state(
      state.spec, state.day + 1, model_eddies(cfg, fp, age + 1), cfg);
  GridField out = state;
  apply_step(out, ref_now, ref_next, draw_bumps(cfg, fp, seed, age), cfg);
  return out;
}

ForecastRun::ForecastRun(GridField ic, const WorldConfig& cfg,
                         const ForecastParams& fp, std::uint64_t seed)
    : state_(std::move(ic)), cfg_(cfg), fp_(fp), seed_(seed) {
  fp_.validate();
  age_ = state_.day - fp_.anchor_day;
  if (age_ < 0)
    throw DomainError("forecast: initial state precedes the anchor day");
  ref_ = render_state(state_.spec, state_.day, model_eddies(cfg_, fp_, age_),
                      cfg_);
}

void ForecastRun::step() {
  GridField ref_next = render_state(
      state_.spec, state_.day + 1, model_eddies(cfg_, fp_, age_ + 1), cfg_);
  apply_step(state_, ref_, ref_next, draw_bumps(cfg_, fp_, seed_, age_), cfg_);
  ref_ = std::move(ref_next);
  age_ += 1;
}

GridField make_background(std::int64_t day, int lead, const WorldConfig& cfg,
                          const ForecastParams& fp) {
  if (day < lead)
    throw DomainError("make_background: day " + std::to_string(day) +
                      " precedes the lead time " + std::to_string(lead));
  ForecastParams anchored = fp;
  anchored.anchor_day = day - lead;
  const std::uint64_t seed = Rng::derive(cfg.seed, "background", day);
  ForecastRun run(truth_state(day - lead, cfg), cfg, anchored, seed);
  for (int s = 0; s < lead; ++s) run.step();
  return geo::block_average(run.state(), cfg.coarse_spec());
}

}  // namespace pointda::world
