#include "debiasreg/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace debiasreg {

std::string format_double(double value) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  if (res.ec != std::errc()) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_field(const std::string& field, const std::string& path,
                   std::size_t line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc()) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": cannot parse numeric field '" + field + "'");
  }
  return value;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (line_no == 1) {
      table.header = fields;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " +
                               std::to_string(table.header.size()) +
                               " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      row[j] = parse_field(fields[j], path, line_no);
    }
    rows.push_back(std::move(row));
  }
  if (table.header.empty()) {
    throw std::runtime_error(path + ": missing header row");
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.values(static_cast<Eigen::Index>(i),
                   static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

Eigen::MatrixXd read_design_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const std::string expected = "x" + std::to_string(j + 1);
    if (table.header[j] != expected) {
      throw std::runtime_error(path + ": design header must be x1..xp, got '" +
                               table.header[j] + "' in column " +
                               std::to_string(j + 1));
    }
  }
  return table.values;
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  if (table.header.size() != 1) {
    throw std::runtime_error(path + ": expected a single column");
  }
  return table.values.col(0);
}

Eigen::MatrixXd read_square_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  if (table.values.rows() != table.values.cols()) {
    throw std::runtime_error(path + ": expected a square matrix");
  }
  return table.values;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values) {
  if (header.size() != static_cast<std::size_t>(values.cols())) {
    throw std::invalid_argument("write_csv: header/column mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_vector_csv(const std::string& path, const std::string& name,
                      const Eigen::VectorXd& values) {
  write_csv(path, {name}, values);
}

}  // namespace debiasreg
