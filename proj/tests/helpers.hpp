#pragma once

#include <string>
#include <vector>

#include "positivity/dataset.hpp"

namespace testutil {

inline std::string data_path(const std::string& name) {
  return std::string(POSITIVITY_DATA_DIR) + "/" + name;
}

inline positivity::ColumnSchema vw_schema() {
  positivity::ColumnSchema s;
  s.covariates = {"V", "W"};
  return s;
}

inline positivity::Dataset load_table1() {
  return positivity::load_csv(data_path("table1.csv"), vw_schema());
}

inline bool not_origin(const positivity::Pattern& z) { return !(z[0] == 0 && z[1] == 0); }

inline positivity::Dataset table1_restricted() {
  return positivity::restrict(load_table1(), not_origin, "restrict: !(V=0&W=0)");
}

/// Hand-built dataset: `count` copies of (z, a, y) appended per call; call
/// finalize() once all units are in.
struct DatasetBuilder {
  positivity::Dataset d;

  explicit DatasetBuilder(std::vector<std::string> names) { d.covariate_names = std::move(names); }

  DatasetBuilder& add(positivity::Pattern z, int a, double y, std::int64_t count = 1) {
    for (std::int64_t i = 0; i < count; ++i) d.records.push_back({z, a, y});
    return *this;
  }

  positivity::Dataset finalize() {
    positivity::detail::finalize_metadata(d);
    return d;
  }
};

}  // namespace testutil
