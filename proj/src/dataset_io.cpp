#include "mtgpk/dataset_io.hpp"

#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace mtgpk {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& raw, long row, size_t col) {
  std::string s = trim(raw);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    // from_chars accepts "nan"/"inf"; anything else is a parse failure.
    raise(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " +
                                     std::to_string(col + 1) +
                                     ": cannot parse '" + s + "' as a number");
  }
  return v;
}

long parse_task(const std::string& raw, long row, size_t col) {
  std::string s = trim(raw);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 0)
    raise(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " +
                                     std::to_string(col + 1) +
                                     ": task must be a non-negative integer, got '" +
                                     s + "'");
  return v;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ParseError, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    raise(ErrorCode::ParseError, "'" + path + "' is empty");
  auto header = split_csv_line(line);
  if (header.size() < 3)
    raise(ErrorCode::ParseError, "header needs at least x0,task,y");
  const size_t d = header.size() - 2;
  for (size_t j = 0; j < d; ++j)
    if (trim(header[j]) != "x" + std::to_string(j))
      raise(ErrorCode::ParseError,
            "header column " + std::to_string(j + 1) + " must be x" +
                std::to_string(j) + ", got '" + trim(header[j]) + "'");
  if (trim(header[d]) != "task" || trim(header[d + 1]) != "y")
    raise(ErrorCode::ParseError, "header must end with task,y");

  std::vector<std::vector<double>> xs;
  std::vector<TaskId> tasks;
  std::vector<double> ys;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != d + 2)
      raise(ErrorCode::ParseError, "row " + std::to_string(row) + ": expected " +
                                       std::to_string(d + 2) + " fields, got " +
                                       std::to_string(fields.size()));
    std::vector<double> x(d);
    for (size_t j = 0; j < d; ++j) {
      x[j] = parse_double(fields[j], row, j);
      if (!std::isfinite(x[j]))
        raise(ErrorCode::NonFiniteValue,
              "row " + std::to_string(row) + ": non-finite input value");
    }
    long task = parse_task(fields[d], row, d);
    double y = parse_double(fields[d + 1], row, d + 1);
    if (!std::isfinite(y))
      raise(ErrorCode::NonFiniteValue,
            "row " + std::to_string(row) + ": non-finite target");
    xs.push_back(std::move(x));
    tasks.push_back(static_cast<TaskId>(task));
    ys.push_back(y);
  }
  if (xs.empty())
    raise(ErrorCode::ParseError, "'" + path + "' has a header but no data rows");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()),
                    static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(ys.size()));
  for (size_t i = 0; i < xs.size(); ++i) {
    for (size_t j = 0; j < d; ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
    y[static_cast<Eigen::Index>(i)] = ys[i];
  }
  return Dataset::create(std::move(X), std::move(tasks), std::move(y),
                         Eigen::VectorXd());
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::ParseError, "cannot open '" + path + "' for writing");
  for (Eigen::Index j = 0; j < ds.dim(); ++j) out << "x" << j << ",";
  out << "task,y\n";
  char buf[64];
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.X(i, j));
      out << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", ds.y[i]);
    out << ds.tasks[static_cast<size_t>(i)] << "," << buf << "\n";
  }
}

}  // namespace mtgpk
