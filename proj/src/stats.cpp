#include "pointda/stats.hpp"

namespace pointda {

void NormStats::validate(std::size_t n_vars) const {
  auto check = [&](const std::vector<double>& v, const char* name) {
    if (v.size() != n_vars)
      throw SchemaError(std::string("norm stats: ") + name +
                        " has wrong arity");
  };
  check(bg_mean, "bg_mean");
  check(bg_std, "bg_std");
  check(inc_mean, "inc_mean");
  check(inc_std, "inc_std");
  check(field_mean, "field_mean");
  check(field_std, "field_std");
  for (std::size_t v = 0; v < n_vars; ++v)
    if (bg_std[v] <= 0 || inc_std[v] <= 0 || field_std[v] <= 0)
      throw ConfigError("norm stats: non-positive std for variable " +
                        std::to_string(v));
  for (const auto& [id, stds] : ch_std)
    for (std::size_t c = 0; c < stds.size(); ++c)
      if (stds[c] <= 0)
        throw ConfigError("norm stats: zero-variance channel " +
                          std::to_string(c) + " of source '" + id + "'");
}

}  // namespace pointda
