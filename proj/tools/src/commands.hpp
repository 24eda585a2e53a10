#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ebtrend/linmodel.hpp"
#include "ebtrend/pipeline.hpp"
#include "ebtrend/pvalues.hpp"

namespace ebtrend::cli {

struct DataArgs {
  std::string matrix;
  std::string design;
  std::string groups;
  std::string contrast;
  std::string side = "intensity";
  unsigned threads = 0;
};

struct ContrastSpec {
  std::string name;
  std::vector<double> weights;
};

struct SideSpec {
  SideMode mode = SideMode::AverageIntensity;
  std::string column;  // for External
};

struct LoadedData {
  std::optional<Design> design;
  Contrast theta;
  std::string contrast_name;
  AnalysisInput input;
  std::vector<std::string> unit_ids;
};

/// Sorted by output column order, duplicates removed.
std::vector<MethodId> parse_methods(const std::string& csv);
ContrastSpec parse_contrast(const std::string& text);
SideSpec parse_side(const std::string& text);
std::pair<int, int> parse_groups(const std::string& text);

/// `samples` are the matrix column names (empty: no matching).
Design load_design(const DataArgs& args, const std::vector<std::string>& samples);
Contrast load_contrast(const DataArgs& args, const Design& design, std::string* name);
LoadedData load_data(const DataArgs& args);

int cmd_diagnose(const DataArgs& args, const std::string& methods_csv, const std::string& out_dir,
                 std::ostream& out, std::ostream& err);

}  // namespace ebtrend::cli
