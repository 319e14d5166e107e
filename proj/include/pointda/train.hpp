#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <string>
#include <vector>

#include "pointda/model.hpp"
#include "pointda/obs.hpp"
#include "pointda/partition.hpp"
#include "pointda/stats.hpp"

namespace pointda::train {

// Everything one day contributes: fine truth, coarse background, and the
// observation sets in schema order.
struct DayData {
  geo::GridField truth_fine;
  geo::GridField background;
  std::vector<obs::ObservationSet> sources;
};

using DayLoader = std::function<DayData(std::int64_t)>;

// Lazily loaded sample universe: one sample per (day, patch).
struct Dataset {
  std::vector<std::int64_t> days;
  part::Layout layout;  // partition of the fine target grid
  std::vector<obs::SourceSchema> schemas;
  DayLoader loader;

  std::int64_t size() const {
    return static_cast<std::int64_t>(days.size()) *
           static_cast<std::int64_t>(layout.patches.size());
  }
};

Dataset build_dataset(const std::vector<std::int64_t>& days,
                      const geo::GridSpec& fine_spec,
                      const part::PartitionConfig& partition,
                      const std::vector<obs::SourceSchema>& schemas,
                      DayLoader loader);

void check_disjoint(const std::vector<std::int64_t>& a,
                    const std::vector<std::int64_t>& b, const char* what);

// Per-day cache of everything sample construction needs: the loaded data,
// the interpolated background base, the normalized increment target and the
// per-patch observation routing.
class DayCache {
 public:
  DayCache(const Dataset& ds, const NormStats& norm, std::size_t capacity = 4);

  struct Entry {
    DayData data;
    geo::GridField base;  // background interpolated to the fine grid
    std::vector<std::vector<std::vector<std::int64_t>>> routed;  // [src][patch]
  };

  const Entry& get(std::int64_t day);

 private:
  const Dataset& ds_;
  const NormStats& norm_;
  std::size_t capacity_;
  std::list<std::int64_t> order_;
  std::map<std::int64_t, Entry> entries_;
};

// One materialized training sample. Queries cover the requested subset of
// the patch's fine ocean cells; targets are normalized increments there.
struct TrainSample {
  std::int64_t day = 0;
  int patch_id = 0;
  model::PatchInputs inputs;
  nd::Mat target;
};

// query_count <= 0 keeps every ocean cell in the patch. dropped[j] forces
// source j absent.
TrainSample build_sample(const DayCache::Entry& e, const Dataset& ds,
                         const NormStats& norm, int patch_id, int query_count,
                         std::uint64_t query_seed,
                         const std::vector<std::uint8_t>& dropped);

// Z-score statistics over the training days (ocean cells / all points).
NormStats fit_norm_stats(const Dataset& ds);

struct TrainConfig {
  int epochs = 30;
  double base_lr = 2e-3;
  std::vector<double> milestone_fracs = {0.4, 0.8, 1.0};
  double lr_gamma = 0.5;
  int batch_patches = 16;
  std::int64_t patches_per_epoch = 512;
  std::int64_t val_patches = 128;
  int query_subsample = 512;
  double dropout_p = 0.2;
  int early_stop_patience = 0;  // 0 disables early stopping
  model::ModelDims dims;
  std::uint64_t seed = 7;
  int threads = 0;

  void validate() const;
  nd::LrSchedule schedule() const;
};

struct EpochRow {
  int epoch = 0;
  double lr = 0, train_loss = 0, val_loss = 0;
};

struct TrainResult {
  model::AssimModel best;
  model::AssimModel final;
  double init_val_loss = 0;
  double best_val_loss = 0;
  int best_epoch = -1;  // -1 = initialization retained
  std::vector<EpochRow> history;
};

struct TrainHooks {
  // Called after every epoch with the incumbent best model.
  std::function<void(const EpochRow&, const model::AssimModel& best)> on_epoch;
};

// Minimizes the masked increment MSE with per-source dropout. Deterministic
// for a fixed seed at any thread count; throws NumericError on a non-finite
// loss or gradient (the hook has the last good model).
TrainResult train(const TrainConfig& cfg, const Dataset& train_ds,
                  const Dataset& val_ds, const NormStats& norm,
                  std::uint64_t world_hash, const TrainHooks& hooks = {});

}  // namespace pointda::train
