#include "pointda/analyze.hpp"

#include <cmath>

namespace pointda::analyze {

using geo::GridField;
using model::AssimModel;

ContributionTable contribution_analysis(const AssimModel& m,
                                        const std::vector<std::int64_t>& days,
                                        const train::DayLoader& loader,
                                        const model::AssimOptions& opt) {
  if (days.empty()) throw DomainError("contribution analysis: no eval days");

  ContributionTable table;
  for (const auto& sc : m.schemas) table.sources.push_back(sc.id);
  table.n_days = static_cast<int>(days.size());
  table.out_of_distribution = m.train_dropout <= 0.0;

  const int n_src = m.n_sources();
  std::vector<std::vector<double>> sum_without(
      static_cast<std::size_t>(n_src));
  std::vector<double> sum_all;

  for (auto day : days) {
    const train::DayData data = loader(day);
    const geo::GridSpec target = data.truth_fine.spec;
    const auto& mask = data.truth_fine.mask;

    const GridField all = model::assimilate(m, data.background, data.sources,
                                            target, mask, opt);
    const auto mae_all = eval::mae(all, data.truth_fine).mae;
    if (table.vars.empty()) {
      table.vars = data.truth_fine.vars;
      sum_all.assign(table.vars.size(), 0.0);
      for (auto& v : sum_without) v.assign(table.vars.size(), 0.0);
    }
    for (std::size_t v = 0; v < sum_all.size(); ++v) sum_all[v] += mae_all[v];

    for (int j = 0; j < n_src; ++j) {
      model::AssimOptions excl = opt;
      excl.exclude_sources.push_back(m.schemas[static_cast<std::size_t>(j)].id);
      const GridField without = model::assimilate(
          m, data.background, data.sources, target, mask, excl);
      const auto mae_wo = eval::mae(without, data.truth_fine).mae;
      for (std::size_t v = 0; v < sum_all.size(); ++v)
        sum_without[static_cast<std::size_t>(j)][v] += mae_wo[v];
    }
  }

  const double n = static_cast<double>(days.size());
  for (auto& v : sum_all) v /= n;
  table.mae_all = sum_all;
  for (int j = 0; j < n_src; ++j) {
    auto& row = sum_without[static_cast<std::size_t>(j)];
    for (auto& v : row) v /= n;
    table.mae_without.push_back(row);
    std::vector<double> contrib;
    for (std::size_t v = 0; v < row.size(); ++v)
      contrib.push_back((row[v] - table.mae_all[v]) / table.mae_all[v]);
    table.contribution.push_back(contrib);
  }
  return table;
}

SensitivityMap sensitivity_analysis(const AssimModel& m,
                                    const train::DayData& data,
                                    const std::string& source_id,
                                    int n_members, std::uint64_t seed,
                                    const model::AssimOptions& opt,
                                    const std::vector<double>& sigma_override) {
  if (n_members < 2)
    throw DomainError("sensitivity analysis needs at least 2 members");
  int src_idx = -1;
  for (int j = 0; j < m.n_sources(); ++j)
    if (m.schemas[static_cast<std::size_t>(j)].id == source_id) src_idx = j;
  if (src_idx < 0)
    throw SchemaError("sensitivity analysis: unknown source '" + source_id +
                      "'");

  std::vector<double> sigma = sigma_override;
  if (sigma.empty()) {
    const auto it = m.norm.raw_std.find(source_id);
    if (it == m.norm.raw_std.end())
      throw SchemaError("no training stats for source '" + source_id + "'");
    sigma = it->second;
  }

  const geo::GridSpec target = data.truth_fine.spec;
  const auto& mask = data.truth_fine.mask;

  // Welford over members, per cell and variable.
  GridField mean = GridField::zeros(target, data.truth_fine.vars, mask, 0);
  GridField m2 = GridField::zeros(target, data.truth_fine.vars, mask, 0);

  for (int k = 0; k < n_members; ++k) {
    auto sources = data.sources;
    sources[static_cast<std::size_t>(src_idx)] = obs::perturb_observations(
        sources[static_cast<std::size_t>(src_idx)], sigma,
        Rng::derive(seed, "member", k));
    const GridField analysis = model::assimilate(m, data.background, sources,
                                                 target, mask, opt);
    const double inv = 1.0 / static_cast<double>(k + 1);
    for (std::size_t c = 0; c < mean.values.size(); ++c) {
      const std::size_t cell = c % static_cast<std::size_t>(target.cells());
      if (!mask[cell]) continue;
      const double x = analysis.values[c];
      const double d = x - mean.values[c];
      mean.values[c] += d * inv;
      m2.values[c] += d * (x - mean.values[c]);
    }
  }

  SensitivityMap out;
  out.source = source_id;
  out.members = n_members;
  out.std_map = GridField::zeros(target, data.truth_fine.vars, mask, data.background.day);
  for (int v = 0; v < out.std_map.n_vars(); ++v) {
    const double clim_std = m.norm.field_std[static_cast<std::size_t>(v)];
    const double* src = m2.plane(v);
    double* dst = out.std_map.plane(v);
    for (std::int64_t c = 0; c < target.cells(); ++c) {
      if (!mask[static_cast<std::size_t>(c)]) continue;
      dst[c] = std::sqrt(src[c] / static_cast<double>(n_members)) / clim_std;
    }
  }
  out.std_map.apply_land_sentinel();
  return out;
}

ResolutionImpact resolution_impact(
    const std::vector<std::pair<std::string, eval::SkillAccumulator::Report>>&
        tier_reports,
    const std::string& origin_tier) {
  const eval::SkillAccumulator::Report* origin = nullptr;
  for (const auto& [name, rep] : tier_reports)
    if (name == origin_tier) origin = &rep;
  if (!origin)
    throw SchemaError("resolution impact: origin tier '" + origin_tier +
                      "' not among the reports");

  ResolutionImpact out;
  out.vars = origin->vars;
  out.rmse_origin = origin->rmse;
  for (const auto& [name, rep] : tier_reports) {
    if (name == origin_tier) continue;
    if (rep.vars != origin->vars)
      throw SchemaError("resolution impact: variable mismatch in tier " + name);
    out.tiers.push_back(name);
    out.rmse_lr.push_back(rep.rmse);
    std::vector<double> red;
    for (std::size_t v = 0; v < rep.rmse.size(); ++v)
      red.push_back((rep.rmse[v] - origin->rmse[v]) / rep.rmse[v]);
    out.reduction.push_back(red);
  }
  return out;
}

}  // namespace pointda::analyze
