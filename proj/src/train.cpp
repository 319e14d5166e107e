#include "pointda/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pointda/parallel.hpp"

namespace pointda::train {

using geo::GridField;
using geo::GridSpec;
using model::AssimModel;
using nd::Mat;

Dataset build_dataset(const std::vector<std::int64_t>& days,
                      const GridSpec& fine_spec,
                      const part::PartitionConfig& partition,
                      const std::vector<obs::SourceSchema>& schemas,
                      DayLoader loader) {
  if (days.empty()) throw ConfigError("dataset: empty day list");
  Dataset ds;
  ds.days = days;
  ds.layout = part::Layout::make(fine_spec, partition);
  ds.schemas = schemas;
  ds.loader = std::move(loader);
  return ds;
}

void check_disjoint(const std::vector<std::int64_t>& a,
                    const std::vector<std::int64_t>& b, const char* what) {
  std::set<std::int64_t> sa(a.begin(), a.end());
  for (auto d : b)
    if (sa.count(d))
      throw ConfigError(std::string(what) + ": day " + std::to_string(d) +
                        " appears in both splits");
}

DayCache::DayCache(const Dataset& ds, const NormStats& norm,
                   std::size_t capacity)
    : ds_(ds), norm_(norm), capacity_(capacity) {}

const DayCache::Entry& DayCache::get(std::int64_t day) {
  auto it = entries_.find(day);
  if (it != entries_.end()) return it->second;
  if (entries_.size() >= capacity_) {
    entries_.erase(order_.front());
    order_.pop_front();
  }
  Entry e;
  e.data = ds_.loader(day);
  e.base = geo::interp_to(e.data.background, ds_.layout.spec,
                          e.data.truth_fine.mask,
                          geo::LandPolicy::NearestOcean);
  for (const auto& set : e.data.sources)
    e.routed.push_back(ds_.layout.route(set.coords));
  order_.push_back(day);
  return entries_.emplace(day, std::move(e)).first->second;
}

TrainSample build_sample(const DayCache::Entry& e, const Dataset& ds,
                         const NormStats& norm, int patch_id, int query_count,
                         std::uint64_t query_seed,
                         const std::vector<std::uint8_t>& dropped) {
  const auto& patch = ds.layout.patches[static_cast<std::size_t>(patch_id)];
  const GridSpec& spec = ds.layout.spec;
  const GridField& truth = e.data.truth_fine;

  TrainSample s;
  s.day = truth.day;
  s.patch_id = patch_id;
  s.inputs.bg_points =
      model::background_points(e.data.background, patch, norm);
  for (std::size_t j = 0; j < ds.schemas.size(); ++j) {
    const bool drop = j < dropped.size() && dropped[j];
    s.inputs.src_points.push_back(
        drop ? Mat(0, 4 + static_cast<Eigen::Index>(
                              model::encoder_channels(ds.schemas[j]).size()))
             : model::observation_points(e.data.sources[j], ds.schemas[j],
                                         e.routed[j][static_cast<std::size_t>(
                                             patch_id)],
                                         norm));
  }

  std::vector<std::pair<int, int>> cells;
  for (int di = 0; di < patch.ni; ++di) {
    const int i = patch.i0 + di;
    for (int dj = 0; dj < patch.nj; ++dj) {
      int j = patch.j0 + dj;
      if (spec.periodic_lon) j %= spec.w;
      if (truth.ocean(i, j)) cells.emplace_back(i, j);
    }
  }
  if (query_count > 0 &&
      static_cast<std::size_t>(query_count) < cells.size()) {
    // Partial Fisher-Yates: the first query_count entries become the sample.
    Rng rng(query_seed);
    for (int k = 0; k < query_count; ++k) {
      const auto pick = static_cast<std::size_t>(rng.uniform_int(
          k, static_cast<std::int64_t>(cells.size()) - 1));
      std::swap(cells[static_cast<std::size_t>(k)], cells[pick]);
    }
    cells.resize(static_cast<std::size_t>(query_count));
  }

  const int nv = static_cast<int>(truth.n_vars());
  s.inputs.queries.resize(static_cast<Eigen::Index>(cells.size()), 4);
  s.target.resize(static_cast<Eigen::Index>(cells.size()), nv);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto [i, j] = cells[r];
    const auto ec = geo::encode_coord(spec.lat_center(i), spec.lon_center(j));
    s.inputs.queries(r, 0) = ec.lat_sin;
    s.inputs.queries(r, 1) = ec.lat_cos;
    s.inputs.queries(r, 2) = ec.lon_sin;
    s.inputs.queries(r, 3) = ec.lon_cos;
    for (int v = 0; v < nv; ++v)
      s.target(static_cast<Eigen::Index>(r), v) =
          norm.norm_inc(v, truth.at(v, i, j) - e.base.at(v, i, j));
  }
  return s;
}

namespace {

struct Moments {
  double sum = 0, sumsq = 0;
  std::int64_t n = 0;
  void add(double x) {
    sum += x;
    sumsq += x * x;
    n += 1;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double sd() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = sumsq / static_cast<double>(n) - m * m;
    return var > 0 ? std::sqrt(var) : 0.0;
  }
};

}  // namespace

NormStats fit_norm_stats(const Dataset& ds) {
  if (ds.days.empty()) throw ConfigError("fit_norm_stats: empty training set");
  const int nv = 5;
  std::vector<Moments> bg(nv), inc(nv), field(nv);
  std::map<std::string, std::vector<Moments>> ch, raw;
  for (const auto& sc : ds.schemas) {
    ch[sc.id].resize(model::encoder_channels(sc).size());
    raw[sc.id].resize(sc.channels.size());
  }

  for (auto day : ds.days) {
    const DayData data = ds.loader(day);
    const GridField base = geo::interp_to(data.background, ds.layout.spec,
                                          data.truth_fine.mask,
                                          geo::LandPolicy::NearestOcean);
    const GridSpec& cs = data.background.spec;
    for (int v = 0; v < nv; ++v) {
      for (int i = 0; i < cs.h; ++i)
        for (int j = 0; j < cs.w; ++j)
          if (data.background.ocean(i, j))
            bg[v].add(data.background.at(v, i, j));
      const GridSpec& fs = ds.layout.spec;
      for (int i = 0; i < fs.h; ++i)
        for (int j = 0; j < fs.w; ++j)
          if (data.truth_fine.ocean(i, j)) {
            field[v].add(data.truth_fine.at(v, i, j));
            inc[v].add(data.truth_fine.at(v, i, j) - base.at(v, i, j));
          }
    }
    for (std::size_t j = 0; j < ds.schemas.size(); ++j) {
      const auto& sc = ds.schemas[j];
      const auto& set = data.sources[j];
      auto& moms = ch[sc.id];
      auto& rmoms = raw[sc.id];
      for (std::int64_t p = 0; p < set.size(); ++p) {
        int k = 0;
        for (int c = 0; c < set.n_channels; ++c) {
          const double x = set.value(p, c);
          rmoms[static_cast<std::size_t>(c)].add(x);
          if (sc.channels[static_cast<std::size_t>(c)] == "wdir") {
            moms[k++].add(std::sin(x));
            moms[k++].add(std::cos(x));
          } else {
            moms[k++].add(x);
          }
        }
      }
    }
  }

  NormStats ns;
  ns.day_begin = *std::min_element(ds.days.begin(), ds.days.end());
  ns.day_end = *std::max_element(ds.days.begin(), ds.days.end());
  for (int v = 0; v < nv; ++v) {
    ns.bg_mean.push_back(bg[v].mean());
    ns.bg_std.push_back(bg[v].sd());
    ns.inc_mean.push_back(inc[v].mean());
    ns.inc_std.push_back(inc[v].sd());
    ns.field_mean.push_back(field[v].mean());
    ns.field_std.push_back(field[v].sd());
  }
  for (const auto& sc : ds.schemas) {
    const auto names = model::encoder_channels(sc);
    auto& mean = ns.ch_mean[sc.id];
    auto& sd = ns.ch_std[sc.id];
    for (std::size_t c = 0; c < names.size(); ++c) {
      mean.push_back(ch[sc.id][c].mean());
      sd.push_back(ch[sc.id][c].sd());
      if (ch[sc.id][c].sd() <= 0)
        throw ConfigError("fit_norm_stats: zero-variance channel '" +
                          names[c] + "' of source '" + sc.id + "'");
    }
    for (std::size_t c = 0; c < sc.channels.size(); ++c) {
      ns.raw_mean[sc.id].push_back(raw[sc.id][c].mean());
      ns.raw_std[sc.id].push_back(raw[sc.id][c].sd());
    }
  }
  ns.validate(nv);
  return ns;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (base_lr <= 0) throw ConfigError("train: base_lr must be positive");
  if (batch_patches < 1) throw ConfigError("train: batch size must be >= 1");
  if (patches_per_epoch < 1)
    throw ConfigError("train: patches_per_epoch must be >= 1");
  if (dropout_p < 0 || dropout_p >= 1)
    throw ConfigError("train: dropout probability must be in [0, 1)");
  for (double f : milestone_fracs)
    if (f <= 0 || f > 1) throw ConfigError("train: milestone fractions in (0,1]");
}

nd::LrSchedule TrainConfig::schedule() const {
  nd::LrSchedule s;
  s.base_lr = base_lr;
  s.gamma = lr_gamma;
  for (double f : milestone_fracs) {
    const int m = static_cast<int>(std::lround(f * epochs));
    if (m > 0 && (s.milestones.empty() || m > s.milestones.back()))
      s.milestones.push_back(m);
  }
  return s;
}

namespace {

struct OptStates {
  nd::AdamState bg;
  std::vector<nd::AdamState> srcs;
  nd::AdamState dec;

  static OptStates zeros_like(const AssimModel& m) {
    OptStates s;
    s.bg = nd::AdamState::zeros_like(m.background_enc);
    for (const auto& e : m.source_encs)
      s.srcs.push_back(nd::AdamState::zeros_like(e));
    s.dec = nd::AdamState::zeros_like(m.decoder);
    return s;
  }
};

struct Pair {
  std::int64_t day;
  int patch;
};

std::vector<Pair> sample_pairs(const Dataset& ds, std::int64_t count,
                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    const auto di = rng.uniform_int(0, static_cast<std::int64_t>(
                                           ds.days.size()) - 1);
    const auto pi = rng.uniform_int(0, static_cast<std::int64_t>(
                                           ds.layout.patches.size()) - 1);
    pairs.push_back({ds.days[static_cast<std::size_t>(di)],
                     static_cast<int>(pi)});
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.day < b.day; });
  return pairs;
}

double evaluate_loss(const AssimModel& m, const Dataset& ds, DayCache& cache,
                     const std::vector<Pair>& pairs, int query_subsample,
                     std::uint64_t seed, int threads) {
  // Samples are materialized day-by-day (the cache is single-threaded); the
  // forward passes run in parallel with an ordered reduction.
  std::vector<TrainSample> samples;
  samples.reserve(pairs.size());
  const std::vector<std::uint8_t> no_drop(ds.schemas.size(), 0);
  for (const auto& pr : pairs) {
    const auto& e = cache.get(pr.day);
    samples.push_back(build_sample(
        e, ds, m.norm, pr.patch, query_subsample,
        Rng::derive(seed, "val-queries", pr.day, pr.patch), no_drop));
  }
  std::vector<double> losses(samples.size(), 0.0);
  parallel_for(static_cast<std::int64_t>(samples.size()), threads,
               [&](std::int64_t k) {
                 const auto& s = samples[static_cast<std::size_t>(k)];
                 if (s.inputs.queries.rows() == 0) return;
                 const Mat pred = model::patch_forward(m, s.inputs, nullptr);
                 losses[static_cast<std::size_t>(k)] =
                     (pred - s.target).squaredNorm() /
                     static_cast<double>(pred.size());
               });
  double total = 0;
  std::int64_t used = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].inputs.queries.rows() == 0) continue;
    total += losses[k];
    used += 1;
  }
  if (used == 0) throw DomainError("validation set has no ocean queries");
  return total / static_cast<double>(used);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_ds,
                  const Dataset& val_ds, const NormStats& norm,
                  std::uint64_t world_hash, const TrainHooks& hooks) {
  cfg.validate();
  check_disjoint(train_ds.days, val_ds.days, "train/val split");

  AssimModel m = AssimModel::init(train_ds.schemas, cfg.dims, norm, cfg.seed);
  m.world_hash = world_hash;
  m.train_dropout = cfg.dropout_p;
  OptStates opt = OptStates::zeros_like(m);
  const nd::LrSchedule schedule = cfg.schedule();

  DayCache train_cache(train_ds, norm, 4);
  DayCache val_cache(val_ds, norm, 2);
  const auto val_pairs =
      sample_pairs(val_ds, std::min<std::int64_t>(cfg.val_patches,
                                                  val_ds.size()),
                   Rng::derive(cfg.seed, "val-pairs"));

  TrainResult res;
  res.init_val_loss = evaluate_loss(m, val_ds, val_cache, val_pairs,
                                    cfg.query_subsample, cfg.seed, cfg.threads);
  res.best = m;
  res.best_val_loss = res.init_val_loss;
  res.best_epoch = -1;

  const int n_src = static_cast<int>(train_ds.schemas.size());
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nd::lr_at(schedule, epoch);
    const auto pairs =
        sample_pairs(train_ds, std::min<std::int64_t>(cfg.patches_per_epoch,
                                                      train_ds.size()),
                     Rng::derive(cfg.seed, "epoch-pairs", epoch));

    double epoch_loss = 0;
    std::int64_t epoch_samples = 0;

    for (std::size_t b0 = 0; b0 < pairs.size();
         b0 += static_cast<std::size_t>(cfg.batch_patches)) {
      const std::size_t b1 = std::min(
          pairs.size(), b0 + static_cast<std::size_t>(cfg.batch_patches));

      std::vector<TrainSample> batch;
      for (std::size_t k = b0; k < b1; ++k) {
        std::vector<std::uint8_t> dropped(static_cast<std::size_t>(n_src), 0);
        Rng drop_rng(Rng::derive(cfg.seed, "dropout", epoch,
                                 static_cast<std::int64_t>(k)));
        for (int j = 0; j < n_src; ++j)
          dropped[static_cast<std::size_t>(j)] =
              drop_rng.uniform() < cfg.dropout_p ? 1 : 0;
        const auto& e = train_cache.get(pairs[k].day);
        batch.push_back(build_sample(
            e, train_ds, norm, pairs[k].patch, cfg.query_subsample,
            Rng::derive(cfg.seed, "queries", epoch,
                        static_cast<std::int64_t>(k)),
            dropped));
      }

      std::vector<model::ModelGrads> grads(batch.size());
      std::vector<double> losses(batch.size(), 0.0);
      std::vector<std::uint8_t> used(batch.size(), 0);
      parallel_for(static_cast<std::int64_t>(batch.size()), cfg.threads,
                   [&](std::int64_t k) {
        const auto& s = batch[static_cast<std::size_t>(k)];
        if (s.inputs.queries.rows() == 0) return;
        model::PatchTape tape;
        const Mat pred = model::patch_forward(m, s.inputs, &tape);
        const double n = static_cast<double>(pred.size());
        losses[static_cast<std::size_t>(k)] =
            (pred - s.target).squaredNorm() / n;
        const Mat up = 2.0 / n * (pred - s.target);
        auto g = model::ModelGrads::zeros_like(m);
        model::patch_backward(m, s.inputs, tape, up, g);
        grads[static_cast<std::size_t>(k)] = std::move(g);
        used[static_cast<std::size_t>(k)] = 1;
      });

      auto total = model::ModelGrads::zeros_like(m);
      std::int64_t n_used = 0;
      double batch_loss = 0;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        if (!used[k]) continue;
        total.accumulate(grads[k]);
        batch_loss += losses[k];
        n_used += 1;
      }
      if (n_used == 0) continue;
      if (!std::isfinite(batch_loss))
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch));
      total.scale(1.0 / static_cast<double>(n_used));
      nd::adam_step(opt.bg, m.background_enc, total.background_enc, lr);
      for (int j = 0; j < n_src; ++j)
        nd::adam_step(opt.srcs[static_cast<std::size_t>(j)],
                      m.source_encs[static_cast<std::size_t>(j)],
                      total.source_encs[static_cast<std::size_t>(j)], lr);
      nd::adam_step(opt.dec, m.decoder, total.decoder, lr);
      epoch_loss += batch_loss;
      epoch_samples += n_used;
    }

    EpochRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss =
        epoch_samples ? epoch_loss / static_cast<double>(epoch_samples) : 0.0;
    row.val_loss = evaluate_loss(m, val_ds, val_cache, val_pairs,
                                 cfg.query_subsample, cfg.seed, cfg.threads);
    if (!std::isfinite(row.val_loss))
      throw NumericError("train: non-finite validation loss at epoch " +
                         std::to_string(epoch));
    res.history.push_back(row);

    if (row.val_loss <= res.best_val_loss) {
      res.best_val_loss = row.val_loss;
      res.best = m;
      res.best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      epochs_since_best += 1;
    }
    if (hooks.on_epoch) hooks.on_epoch(row, res.best);
    if (cfg.early_stop_patience > 0 &&
        epochs_since_best >= cfg.early_stop_patience)
      break;
  }

  res.final = std::move(m);
  return res;
}

}  // namespace pointda::train
