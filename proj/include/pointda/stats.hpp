#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pointda/common.hpp"

namespace pointda {

// Z-score statistics gathered from the training period only. Channel stats
// are keyed by source id and indexed by encoder channel (wind direction is
// expanded to sin/cos before normalization).
struct NormStats {
  std::vector<double> bg_mean, bg_std;        // coarse background, per variable
  std::vector<double> inc_mean, inc_std;      // fine increments, per variable
  std::vector<double> field_mean, field_std;  // fine truth, per variable
  std::map<std::string, std::vector<double>> ch_mean, ch_std;
  // Same statistics on the public observation channels (no expansion); the
  // perturbation protocols draw their sigmas from raw_std.
  std::map<std::string, std::vector<double>> raw_mean, raw_std;
  std::int64_t day_begin = 0, day_end = 0;

  void validate(std::size_t n_vars) const;

  double norm_bg(int v, double x) const {
    return (x - bg_mean[v]) / bg_std[v];
  }
  double norm_inc(int v, double x) const {
    return (x - inc_mean[v]) / inc_std[v];
  }
  double denorm_inc(int v, double z) const {
    return z * inc_std[v] + inc_mean[v];
  }
};

}  // namespace pointda
