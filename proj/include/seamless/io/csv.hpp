#pragma once

// Patient CSV files: comma-separated, header row first, UTF-8, '.' decimal
// separator, no quoting. The header holds every schema variable plus a group
// column ("dose" for Phase I, "arm" for Phase II) and a 0/1 "response"
// column, in any order.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seamless/analysis.hpp"
#include "seamless/covariates.hpp"
#include "seamless/error.hpp"

namespace seamless {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

inline std::vector<PatientRecord> parse_patient_csv(const std::string& text,
                                                    const CovariateSchema& schema,
                                                    const std::string& group_column) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto where = [&] { return "line " + std::to_string(line_no) + ": "; };

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  require(!header.empty(), ErrorCode::SchemaMismatch, "CSV has no header row");
  if (header.front().rfind("\xEF\xBB\xBF", 0) == 0) header.front().erase(0, 3);

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    require(col.emplace(header[i], i).second, ErrorCode::SchemaMismatch,
            where() + "duplicate column '" + header[i] + "'");
  }
  std::vector<std::string> required;
  for (const auto& v : schema.variables()) required.push_back(v.name);
  required.push_back(group_column);
  required.push_back("response");
  for (const auto& r : required)
    require(col.count(r) > 0, ErrorCode::SchemaMismatch, "CSV header lacks column '" + r + "'");
  require(col.size() == required.size(), ErrorCode::SchemaMismatch,
          "CSV header has columns outside the schema");

  std::vector<PatientRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() == header.size(), ErrorCode::SchemaMismatch,
            where() + "expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(cells.size()));
    PatientRecord p;
    for (const auto& var : schema.variables()) {
      const auto& cell = cells[col[var.name]];
      require(!cell.empty(), ErrorCode::SchemaMismatch, where() + "missing value for '" + var.name + "'");
      if (var.kind == VariableKind::Categorical) {
        p.covariates.values.emplace_back(cell);
      } else {
        double x = 0.0;
        require(detail::parse_double(cell, x), ErrorCode::SchemaMismatch,
                where() + "'" + var.name + "' is not a number: '" + cell + "'");
        p.covariates.values.emplace_back(x);
      }
    }
    p.group = cells[col[group_column]];
    require(!p.group.empty(), ErrorCode::SchemaMismatch, where() + "empty '" + group_column + "'");
    const auto& resp = cells[col["response"]];
    require(resp == "0" || resp == "1", ErrorCode::SchemaMismatch,
            where() + "response must be 0 or 1, got '" + resp + "'");
    p.response = resp == "1";
    try {
      Eigen::RowVectorXd row(static_cast<Eigen::Index>(schema.encoded_dim()));
      encode_record(schema, p.covariates, row);
    } catch (const Error& e) {
      fail(e.code(), where() + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::vector<PatientRecord> read_patient_csv(const std::string& path,
                                                   const CovariateSchema& schema,
                                                   const std::string& group_column) {
  try {
    return parse_patient_csv(read_text_file(path), schema, group_column);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    fail(e.code(), path + ": " + e.what());
  }
}

}  // namespace seamless
