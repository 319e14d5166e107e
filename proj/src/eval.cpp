#include "pointda/eval.hpp"

#include <algorithm>
#include <cmath>

namespace pointda::eval {

using geo::GridField;
using geo::GridSpec;

namespace {

void check_compatible(const GridField& a, const GridField& b) {
  if (!(a.spec == b.spec)) throw SchemaError("fields on different grids");
  if (a.vars != b.vars) throw SchemaError("fields with different variables");
  if (a.mask != b.mask) throw SchemaError("fields with different land masks");
}

}  // namespace

Climatology::Climatology(std::vector<std::int64_t> train_days,
                         std::function<GridField(std::int64_t)> loader,
                         int period)
    : train_days_(std::move(train_days)), loader_(std::move(loader)),
      period_(period) {
  if (train_days_.empty()) throw ConfigError("climatology: no training days");
}

int Climatology::day_of_year(std::int64_t day, int period) {
  return static_cast<int>((day - 1) % period) + 1;
}

const GridField& Climatology::field(int doy) const {
  auto it = cache_.find(doy);
  if (it != cache_.end()) return it->second;
  std::vector<std::int64_t> match;
  for (auto d : train_days_)
    if (day_of_year(d, period_) == doy) match.push_back(d);
  if (match.empty())
    throw DomainError("climatology has no training sample for day-of-year " +
                      std::to_string(doy));
  GridField mean = loader_(match[0]);
  if (match.size() > 1) {
    for (std::size_t k = 1; k < match.size(); ++k) {
      const GridField f = loader_(match[k]);
      for (std::size_t c = 0; c < mean.values.size(); ++c)
        mean.values[c] += f.values[c];
    }
    const double inv = 1.0 / static_cast<double>(match.size());
    for (auto& v : mean.values) v *= inv;
  }
  if (cache_.size() >= 3) {
    cache_.erase(cache_order_.front());
    cache_order_.erase(cache_order_.begin());
  }
  cache_order_.push_back(doy);
  return cache_.emplace(doy, std::move(mean)).first->second;
}

std::vector<double> rmse_latweighted(const GridField& pred,
                                     const GridField& ref) {
  check_compatible(pred, ref);
  const GridSpec& s = pred.spec;
  const auto w = geo::lat_weights(s);
  std::vector<double> out;
  for (int v = 0; v < pred.n_vars(); ++v) {
    double num = 0, den = 0;
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j) {
        if (!pred.ocean(i, j)) continue;
        const double d = pred.at(v, i, j) - ref.at(v, i, j);
        num += w[static_cast<std::size_t>(i)] * d * d;
        den += w[static_cast<std::size_t>(i)];
      }
    if (den <= 0) throw DomainError("rmse: no ocean cells");
    out.push_back(std::sqrt(num / den));
  }
  return out;
}

MaeResult mae(const GridField& pred, const GridField& ref) {
  check_compatible(pred, ref);
  const GridSpec& s = pred.spec;
  MaeResult r;
  r.abs_error = GridField::zeros(s, pred.vars, pred.mask, pred.day);
  for (int v = 0; v < pred.n_vars(); ++v) {
    double sum = 0;
    std::int64_t n = 0;
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j) {
        if (!pred.ocean(i, j)) continue;
        const double d = std::abs(pred.at(v, i, j) - ref.at(v, i, j));
        r.abs_error.at(v, i, j) = d;
        sum += d;
        n += 1;
      }
    if (n == 0) throw DomainError("mae: no ocean cells");
    r.mae.push_back(sum / static_cast<double>(n));
  }
  r.abs_error.apply_land_sentinel();
  return r;
}

std::vector<AccValue> acc_latweighted(const GridField& pred,
                                      const GridField& ref,
                                      const Climatology& clim,
                                      std::int64_t day) {
  check_compatible(pred, ref);
  const GridField& c = clim.field(Climatology::day_of_year(day, clim.period()));
  check_compatible(pred, c);
  const GridSpec& s = pred.spec;
  const auto w = geo::lat_weights(s);
  std::vector<AccValue> out;
  for (int v = 0; v < pred.n_vars(); ++v) {
    double cov = 0, var_p = 0, var_r = 0;
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j) {
        if (!pred.ocean(i, j)) continue;
        const double ap = pred.at(v, i, j) - c.at(v, i, j);
        const double ar = ref.at(v, i, j) - c.at(v, i, j);
        cov += w[static_cast<std::size_t>(i)] * ap * ar;
        var_p += w[static_cast<std::size_t>(i)] * ap * ap;
        var_r += w[static_cast<std::size_t>(i)] * ar * ar;
      }
    AccValue a;
    if (var_p <= 0 || var_r <= 0) {
      a.value = std::numeric_limits<double>::quiet_NaN();
      a.defined = false;
    } else {
      a.value = cov / std::sqrt(var_p * var_r);
      a.defined = true;
    }
    out.push_back(a);
  }
  return out;
}

void SkillAccumulator::add_day(const GridField& pred, const GridField& ref,
                               const Climatology* clim) {
  const auto r = rmse_latweighted(pred, ref);
  const auto m = mae(pred, ref);
  if (n_days_ == 0) {
    vars_ = pred.vars;
    rmse_.resize(vars_.size());
    mae_.resize(vars_.size());
    acc_.resize(vars_.size());
    accdef_.resize(vars_.size());
    mae_sum_ = GridField::zeros(pred.spec, pred.vars, pred.mask, 0);
  }
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    rmse_[v].push_back(r[v]);
    mae_[v].push_back(m.mae[v]);
  }
  if (clim) {
    const auto a = acc_latweighted(pred, ref, *clim, pred.day);
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      acc_[v].push_back(a[v].value);
      accdef_[v].push_back(a[v].defined ? 1 : 0);
    }
  }
  for (std::size_t c = 0; c < mae_sum_.values.size(); ++c)
    if (mae_sum_.mask[c % static_cast<std::size_t>(mae_sum_.spec.cells())])
      mae_sum_.values[c] += m.abs_error.values[c];
  n_days_ += 1;
}

SkillAccumulator::Report SkillAccumulator::finalize() const {
  if (n_days_ == 0) throw DomainError("skill report: no days accumulated");
  Report rep;
  rep.vars = vars_;
  rep.n_days = n_days_;
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    rep.rmse.push_back(mean(rmse_[v]));
    rep.mae.push_back(mean(mae_[v]));
    bool all_defined = !acc_[v].empty();
    for (auto d : accdef_[v])
      if (!d) all_defined = false;
    rep.acc_defined.push_back(all_defined ? 1 : 0);
    rep.acc.push_back(all_defined
                          ? mean(acc_[v])
                          : std::numeric_limits<double>::quiet_NaN());
  }
  rep.mae_map = mae_sum_;
  for (auto& x : rep.mae_map.values) x /= static_cast<double>(n_days_);
  rep.mae_map.apply_land_sentinel();
  return rep;
}

SkillRatios skill_ratios(const SkillAccumulator::Report& analysis,
                         const SkillAccumulator::Report& background) {
  if (analysis.vars != background.vars)
    throw SchemaError("skill_ratios: variable mismatch");
  if (!(analysis.mae_map.spec == background.mae_map.spec) ||
      analysis.mae_map.mask != background.mae_map.mask)
    throw SchemaError("skill_ratios: reports on different grids");
  SkillRatios sr;
  sr.vars = analysis.vars;
  const std::size_t nv = analysis.vars.size();
  for (std::size_t v = 0; v < nv; ++v) {
    const bool rmse_ok = background.rmse[v] != 0.0;
    sr.rmse_defined.push_back(rmse_ok ? 1 : 0);
    sr.rmse_reduction.push_back(
        rmse_ok ? (background.rmse[v] - analysis.rmse[v]) / background.rmse[v]
                : std::numeric_limits<double>::quiet_NaN());
    const bool acc_ok = analysis.acc_defined[v] && background.acc_defined[v] &&
                        background.acc[v] != 0.0;
    sr.acc_defined.push_back(acc_ok ? 1 : 0);
    sr.acc_improvement.push_back(
        acc_ok ? (analysis.acc[v] - background.acc[v]) / background.acc[v]
               : std::numeric_limits<double>::quiet_NaN());
  }

  const GridField& am = analysis.mae_map;
  const GridField& bm = background.mae_map;
  sr.mae_diff_map = GridField::zeros(am.spec, am.vars, am.mask, 0);
  sr.frac_mae_reduced.assign(nv, 0.0);
  std::int64_t ocean = 0;
  for (std::int64_t c = 0; c < am.spec.cells(); ++c)
    if (am.mask[static_cast<std::size_t>(c)]) ocean += 1;
  for (std::size_t v = 0; v < nv; ++v) {
    std::int64_t reduced = 0;
    const double* a = am.plane(static_cast<int>(v));
    const double* b = bm.plane(static_cast<int>(v));
    double* d = sr.mae_diff_map.plane(static_cast<int>(v));
    for (std::int64_t c = 0; c < am.spec.cells(); ++c) {
      if (!am.mask[static_cast<std::size_t>(c)]) continue;
      d[c] = a[c] - b[c];
      if (d[c] < 0.0) reduced += 1;
    }
    sr.frac_mae_reduced[v] =
        ocean ? static_cast<double>(reduced) / static_cast<double>(ocean) : 0.0;
  }
  sr.mae_diff_map.apply_land_sentinel();
  return sr;
}

PsdCurve psd_zonal(const GridField& field, double lat_lo, double lat_hi,
                   int var) {
  const GridSpec& s = field.spec;
  if (lat_hi <= lat_lo) throw DomainError("psd_zonal: empty latitude band");
  std::vector<int> rows;
  int skipped = 0;
  for (int i = 0; i < s.h; ++i) {
    const double lat = s.lat_center(i);
    if (lat < lat_lo || lat > lat_hi) continue;
    bool clean = true;
    for (int j = 0; j < s.w; ++j)
      if (!field.ocean(i, j)) { clean = false; break; }
    if (clean) rows.push_back(i);
    else ++skipped;
  }
  if (static_cast<int>(rows.size()) < 4)
    throw DomainError("psd_zonal: fewer than 4 fully-ocean rows in the band (" +
                      std::to_string(rows.size()) + " usable, " +
                      std::to_string(skipped) + " with land)");

  const int w = s.w;
  const int n_freq = w / 2 + 1;
  PsdCurve out;
  out.rows_used = static_cast<int>(rows.size());
  out.rows_skipped = skipped;
  out.power.assign(static_cast<std::size_t>(n_freq), 0.0);
  const double k_scale = 360.0 / s.lon_extent();
  for (int k = 0; k < n_freq; ++k)
    out.wavenumber.push_back(k * k_scale);

  // Direct DFT with precomputed twiddles; W is a few hundred at most.
  std::vector<double> cosw(static_cast<std::size_t>(w) * n_freq),
      sinw(static_cast<std::size_t>(w) * n_freq);
  for (int k = 0; k < n_freq; ++k)
    for (int j = 0; j < w; ++j) {
      const double ang = 2.0 * geo::kPi * k * j / w;
      cosw[static_cast<std::size_t>(k) * w + j] = std::cos(ang);
      sinw[static_cast<std::size_t>(k) * w + j] = std::sin(ang);
    }

  std::vector<double> row(static_cast<std::size_t>(w));
  for (int i : rows) {
    double window_ms = 0.0;
    if (s.periodic_lon) {
      for (int j = 0; j < w; ++j) row[static_cast<std::size_t>(j)] = field.at(var, i, j);
      window_ms = 1.0;
    } else {
      double mean = 0;
      for (int j = 0; j < w; ++j) mean += field.at(var, i, j);
      mean /= w;
      for (int j = 0; j < w; ++j) {
        const double hann =
            0.5 * (1.0 - std::cos(2.0 * geo::kPi * j / (w - 1)));
        row[static_cast<std::size_t>(j)] = (field.at(var, i, j) - mean) * hann;
        window_ms += hann * hann;
      }
      window_ms /= w;  // compensates the taper's mean-square loss
    }
    for (int k = 0; k < n_freq; ++k) {
      double re = 0, im = 0;
      const double* ck = &cosw[static_cast<std::size_t>(k) * w];
      const double* sk = &sinw[static_cast<std::size_t>(k) * w];
      for (int j = 0; j < w; ++j) {
        re += row[static_cast<std::size_t>(j)] * ck[j];
        im -= row[static_cast<std::size_t>(j)] * sk[j];
      }
      const double two_sided = (re * re + im * im) /
                               (static_cast<double>(w) * w * window_ms);
      const bool edge = (k == 0) || (w % 2 == 0 && k == w / 2);
      out.power[static_cast<std::size_t>(k)] += (edge ? 1.0 : 2.0) * two_sided;
    }
  }
  for (auto& p : out.power) p /= static_cast<double>(rows.size());
  return out;
}

ForecastSkill forecast_rmse_reduction(
    const std::vector<GridField>& candidate_ics,
    const std::vector<GridField>& baseline_ics, int horizon,
    const world::WorldConfig& cfg, const world::ForecastParams& fp,
    const std::function<GridField(std::int64_t)>& truth_loader,
    std::int64_t max_truth_day) {
  if (candidate_ics.size() != baseline_ics.size() || candidate_ics.empty())
    throw SchemaError("forecast verification needs matched, nonempty IC sets");
  if (horizon < 0) throw DomainError("forecast horizon must be >= 0");
  for (const auto& ic : candidate_ics)
    if (ic.day + horizon > max_truth_day)
      throw DomainError("forecast horizon exceeds the generated truth (start " +
                        std::to_string(ic.day) + " + " +
                        std::to_string(horizon) + " > " +
                        std::to_string(max_truth_day) + ")");

  const std::size_t nv = candidate_ics[0].vars.size();
  ForecastSkill out;
  out.vars = candidate_ics[0].vars;
  for (int l = 0; l <= horizon; ++l) out.leads.push_back(l);
  std::vector<std::vector<double>> sum_ic(nv), sum_base(nv);
  for (auto& v : sum_ic) v.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  for (auto& v : sum_base) v.assign(static_cast<std::size_t>(horizon) + 1, 0.0);

  for (std::size_t k = 0; k < candidate_ics.size(); ++k) {
    if (baseline_ics[k].day != candidate_ics[k].day)
      throw SchemaError("forecast verification: IC day mismatch");
    world::ForecastParams anchored = fp;
    anchored.anchor_day = candidate_ics[k].day;
    // Both runs share the model-error draws; only the ICs differ.
    const std::uint64_t seed =
        Rng::derive(cfg.seed, "verify", candidate_ics[k].day);
    world::ForecastRun run_ic(candidate_ics[k], cfg, anchored, seed);
    world::ForecastRun run_base(baseline_ics[k], cfg, anchored, seed);
    for (int l = 0; l <= horizon; ++l) {
      const GridField truth = truth_loader(candidate_ics[k].day + l);
      const auto r_ic = rmse_latweighted(run_ic.state(), truth);
      const auto r_base = rmse_latweighted(run_base.state(), truth);
      for (std::size_t v = 0; v < nv; ++v) {
        sum_ic[v][static_cast<std::size_t>(l)] += r_ic[v];
        sum_base[v][static_cast<std::size_t>(l)] += r_base[v];
      }
      if (l < horizon) {
        run_ic.step();
        run_base.step();
      }
    }
  }

  const double n = static_cast<double>(candidate_ics.size());
  out.rmse_ic.resize(nv);
  out.rmse_baseline.resize(nv);
  out.reduction.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    for (int l = 0; l <= horizon; ++l) {
      const double a = sum_ic[v][static_cast<std::size_t>(l)] / n;
      const double b = sum_base[v][static_cast<std::size_t>(l)] / n;
      out.rmse_ic[v].push_back(a);
      out.rmse_baseline[v].push_back(b);
      out.reduction[v].push_back((a - b) / b);
    }
  }
  return out;
}

}  // namespace pointda::eval
