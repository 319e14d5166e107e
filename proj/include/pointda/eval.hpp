#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pointda/geo.hpp"
#include "pointda/world.hpp"

namespace pointda::eval {

// Day-of-year climatology over the training period, materialized lazily from
// a truth loader so a full year never has to be resident.
class Climatology {
 public:
  Climatology(std::vector<std::int64_t> train_days,
              std::function<geo::GridField(std::int64_t)> loader,
              int period = 360);

  static int day_of_year(std::int64_t day, int period = 360);

  // Mean over training days sharing the day-of-year. Throws DomainError when
  // the training period has no sample for it.
  const geo::GridField& field(int doy) const;

  const std::vector<std::int64_t>& train_days() const { return train_days_; }
  int period() const { return period_; }

 private:
  std::vector<std::int64_t> train_days_;
  std::function<geo::GridField(std::int64_t)> loader_;
  int period_;
  mutable std::map<int, geo::GridField> cache_;
  mutable std::vector<int> cache_order_;
};

// Latitude-weighted RMSE per variable over ocean cells.
std::vector<double> rmse_latweighted(const geo::GridField& pred,
                                     const geo::GridField& ref);

struct MaeResult {
  std::vector<double> mae;  // per variable, unweighted ocean mean
  geo::GridField abs_error; // per-cell |error| on every variable
};
MaeResult mae(const geo::GridField& pred, const geo::GridField& ref);

struct AccValue {
  double value = 0;
  bool defined = false;  // false when either anomaly field has zero variance
};
std::vector<AccValue> acc_latweighted(const geo::GridField& pred,
                                      const geo::GridField& ref,
                                      const Climatology& clim,
                                      std::int64_t day);

// Multi-day aggregation: metrics are averaged across days, the MAE map is
// the per-cell mean absolute error.
class SkillAccumulator {
 public:
  void add_day(const geo::GridField& pred, const geo::GridField& ref,
               const Climatology* clim = nullptr);
  struct Report {
    std::vector<std::string> vars;
    std::vector<double> rmse, mae, acc;
    std::vector<std::uint8_t> acc_defined;
    geo::GridField mae_map;
    int n_days = 0;
  };
  Report finalize() const;

 private:
  std::vector<std::vector<double>> rmse_, mae_, acc_;
  std::vector<std::vector<std::uint8_t>> accdef_;
  geo::GridField mae_sum_;
  std::vector<std::string> vars_;
  int n_days_ = 0;
};

struct SkillRatios {
  std::vector<std::string> vars;
  std::vector<double> acc_improvement;   // (acc_a - acc_b) / acc_b
  std::vector<double> rmse_reduction;    // (rmse_b - rmse_a) / rmse_b
  std::vector<std::uint8_t> acc_defined, rmse_defined;
  geo::GridField mae_diff_map;           // analysis - background, per cell
  std::vector<double> frac_mae_reduced;  // strictly negative cells, per var
};

SkillRatios skill_ratios(const SkillAccumulator::Report& analysis,
                         const SkillAccumulator::Report& background);

struct PsdCurve {
  std::vector<double> wavenumber;  // cycles per 360 degrees of longitude
  std::vector<double> power;      // one-sided; sums to the row mean square
  int rows_used = 0;
  int rows_skipped = 0;  // rows in the band containing land
};

// Zonal power spectra averaged over the fully-ocean rows of a latitude band.
// Periodic rows transform directly; non-periodic rows are mean-removed and
// Hann-tapered. Requires at least 4 usable rows.
PsdCurve psd_zonal(const geo::GridField& field, double lat_lo, double lat_hi,
                   int var);

struct ForecastSkill {
  std::vector<int> leads;
  std::vector<std::string> vars;
  // indexed [var][lead]
  std::vector<std::vector<double>> rmse_ic, rmse_baseline, reduction;
};

// Paired toy forecasts from two IC sets (matched by day), verified against
// truth. reduction = (rmse_ic - rmse_baseline) / rmse_baseline from RMSE
// averaged over start days; negative values mean the candidate ICs win.
ForecastSkill forecast_rmse_reduction(
    const std::vector<geo::GridField>& candidate_ics,
    const std::vector<geo::GridField>& baseline_ics, int horizon,
    const world::WorldConfig& cfg, const world::ForecastParams& fp,
    const std::function<geo::GridField(std::int64_t)>& truth_loader,
    std::int64_t max_truth_day);

}  // namespace pointda::eval
