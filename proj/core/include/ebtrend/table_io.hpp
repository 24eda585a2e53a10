#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ebtrend {

/// Delimited numeric table: a header row and one labelled row per record.
struct LabelledMatrix {
  std::string corner;                 ///< first header cell
  std::vector<std::string> columns;   ///< remaining header cells
  std::vector<std::string> rows;      ///< first cell of each record
  Eigen::MatrixXd values;             ///< rows x columns
};

/// Parse CSV or TSV (tab if the header holds one, comma otherwise). Blank
/// lines are skipped; every cell after the first must parse as a finite
/// number. Errors throw ParseError with 1-based line and column.
LabelledMatrix parse_labelled_matrix(std::istream& in);
LabelledMatrix read_labelled_matrix(const std::string& path);

/// Design matrix: header names the covariates. A first column that is not
/// numeric is taken as sample identifiers.
struct DesignTable {
  std::vector<std::string> covariates;
  std::vector<std::string> samples;  ///< empty when the file carries no identifiers
  Eigen::MatrixXd x;
};

DesignTable parse_design_table(std::istream& in);
DesignTable read_design_table(const std::string& path);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace ebtrend
