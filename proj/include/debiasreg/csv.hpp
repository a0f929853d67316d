#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace debiasreg {

// Shortest round-trip decimal rendering of a double (via std::to_chars).
std::string format_double(double value);

// Reads a numeric CSV with a single header row. Every data row must have
// exactly as many fields as the header. Decimal point is '.', rows end in LF
// (a trailing CR is tolerated on input).
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

CsvTable read_csv(const std::string& path);

// Reads an n x p design matrix; the header is checked to be x1..xp.
Eigen::MatrixXd read_design_csv(const std::string& path);

// Reads a single-column CSV with header "y" (or any one-column header).
Eigen::VectorXd read_vector_csv(const std::string& path);

// Reads a square matrix CSV (header row ignored beyond the column count).
Eigen::MatrixXd read_square_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);

void write_vector_csv(const std::string& path, const std::string& name,
                      const Eigen::VectorXd& values);

}  // namespace debiasreg
