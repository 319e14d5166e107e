#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pointda/eval.hpp"
#include "pointda/model.hpp"
#include "pointda/train.hpp"

namespace pointda::analyze {

struct ContributionTable {
  std::vector<std::string> sources;  // row order = schema order
  std::vector<std::string> vars;
  std::vector<double> mae_all;                   // per variable
  std::vector<std::vector<double>> mae_without;  // [source][variable]
  std::vector<std::vector<double>> contribution; // (without - all) / all
  bool out_of_distribution = false;  // model trained without source dropout
  int n_days = 0;
};

// Leave-one-out observation impact: the "all" scenario against one
// assimilation per source with that source's latent forced absent. MAE is
// the mean over eval days of the daily global MAE against fine truth.
ContributionTable contribution_analysis(
    const model::AssimModel& m, const std::vector<std::int64_t>& days,
    const train::DayLoader& loader, const model::AssimOptions& opt);

struct SensitivityMap {
  std::string source;
  geo::GridField std_map;  // per-member std, normalized by the training std
  int members = 0;
};

// Appendix-style ensemble sensitivity: the chosen source is perturbed
// n_members times with per-channel sigma equal to its training-period std
// (sigma_override replaces it when nonempty), everything else held fixed;
// the per-cell std over the member analyses is normalized by each analysis
// variable's training-period std.
SensitivityMap sensitivity_analysis(const model::AssimModel& m,
                                    const train::DayData& data,
                                    const std::string& source_id,
                                    int n_members, std::uint64_t seed,
                                    const model::AssimOptions& opt,
                                    const std::vector<double>& sigma_override = {});

struct ResolutionImpact {
  std::vector<std::string> tiers;  // coarsened tiers, e.g. "2x", "4x"
  std::vector<std::string> vars;
  std::vector<double> rmse_origin;             // per variable
  std::vector<std::vector<double>> rmse_lr;    // [tier][variable]
  std::vector<std::vector<double>> reduction;  // (lr - origin) / lr
};

// Ratio table from per-tier skill reports; "origin" names the
// full-resolution tier.
ResolutionImpact resolution_impact(
    const std::vector<std::pair<std::string, eval::SkillAccumulator::Report>>&
        tier_reports,
    const std::string& origin_tier);

}  // namespace pointda::analyze
