#pragma once

// Patient covariate schemas, one-hot encoding and pooled standardization.
//
// Continuous columns are standardized with mean and sd computed over the
// concatenation of both samples; indicator columns (binary and one-hot
// categorical levels) pass through untouched.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "seamless/error.hpp"

namespace seamless {

enum class VariableKind { Continuous, Binary, Categorical };

struct Variable {
  std::string name;
  VariableKind kind = VariableKind::Continuous;
  std::vector<std::string> levels;  // Categorical only

  static Variable continuous(std::string name) {
    return {std::move(name), VariableKind::Continuous, {}};
  }
  static Variable binary(std::string name) {
    return {std::move(name), VariableKind::Binary, {}};
  }
  static Variable categorical(std::string name, std::vector<std::string> levels) {
    return {std::move(name), VariableKind::Categorical, std::move(levels)};
  }
};

/// One encoded column: continuous columns are standardizable, indicators are not.
struct Column {
  std::string name;
  bool indicator = false;

  bool operator==(const Column&) const = default;
};

class CovariateSchema {
 public:
  CovariateSchema() = default;

  explicit CovariateSchema(std::vector<Variable> variables)
      : variables_(std::move(variables)) {
    std::set<std::string> seen;
    for (const auto& v : variables_) {
      require(!v.name.empty(), ErrorCode::SchemaMismatch, "empty variable name");
      require(seen.insert(v.name).second, ErrorCode::SchemaMismatch,
              "duplicate variable name '" + v.name + "'");
      if (v.kind == VariableKind::Categorical) {
        require(v.levels.size() >= 2, ErrorCode::SchemaMismatch,
                "categorical '" + v.name + "' needs at least 2 levels");
        std::set<std::string> lv(v.levels.begin(), v.levels.end());
        require(lv.size() == v.levels.size(), ErrorCode::SchemaMismatch,
                "categorical '" + v.name + "' has duplicate levels");
      }
    }
    for (const auto& v : variables_) {
      switch (v.kind) {
        case VariableKind::Continuous: columns_.push_back({v.name, false}); break;
        case VariableKind::Binary: columns_.push_back({v.name, true}); break;
        case VariableKind::Categorical:
          for (const auto& l : v.levels) columns_.push_back({v.name + "=" + l, true});
          break;
      }
    }
  }

  const std::vector<Variable>& variables() const { return variables_; }
  std::size_t size() const { return variables_.size(); }
  std::size_t encoded_dim() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i)
      if (variables_[i].name == name) return i;
    fail(ErrorCode::SchemaMismatch, "unknown variable '" + name + "'");
  }

  bool operator==(const CovariateSchema& o) const { return columns_ == o.columns_; }

 private:
  std::vector<Variable> variables_;
  std::vector<Column> columns_;
};

/// Age, sex, ECOG performance status and tumor stage: the baseline
/// characteristics used by the simulation engine and the conduct service.
inline CovariateSchema oncology_baseline_schema() {
  return CovariateSchema({Variable::continuous("age"), Variable::binary("woman"),
                          Variable::binary("ecog1"),
                          Variable::categorical("stage", {"IIA", "III", "IV"})});
}

/// Real for Continuous, 0/1 for Binary, level label for Categorical.
using CovariateValue = std::variant<double, std::string>;

struct RawRecord {
  std::vector<CovariateValue> values;

  bool operator==(const RawRecord&) const = default;
};

struct EncodedSample {
  Eigen::MatrixXd matrix;  // n x d, row per patient
  std::vector<Column> columns;
  bool standardized = false;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index dim() const { return matrix.cols(); }
};

struct ColumnScaling {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
  bool degenerate = false;  // zero pooled sd; column dropped
};

struct StandardizationParams {
  std::vector<ColumnScaling> continuous;
  std::vector<std::string> dropped;

  bool has_degenerate() const { return !dropped.empty(); }
};

inline void encode_record(const CovariateSchema& schema, const RawRecord& rec,
                          Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  require(rec.values.size() == schema.size(), ErrorCode::SchemaMismatch,
          "record has " + std::to_string(rec.values.size()) + " values, schema has " +
              std::to_string(schema.size()));
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& var = schema.variables()[i];
    const auto& val = rec.values[i];
    switch (var.kind) {
      case VariableKind::Continuous: {
        const double* x = std::get_if<double>(&val);
        require(x != nullptr, ErrorCode::SchemaMismatch,
                "'" + var.name + "' expects a number");
        require(std::isfinite(*x), ErrorCode::SchemaMismatch,
                "'" + var.name + "' is missing or not finite");
        out(col++) = *x;
        break;
      }
      case VariableKind::Binary: {
        const double* x = std::get_if<double>(&val);
        require(x != nullptr && (*x == 0.0 || *x == 1.0), ErrorCode::SchemaMismatch,
                "'" + var.name + "' expects 0 or 1");
        out(col++) = *x;
        break;
      }
      case VariableKind::Categorical: {
        const std::string* s = std::get_if<std::string>(&val);
        require(s != nullptr, ErrorCode::SchemaMismatch,
                "'" + var.name + "' expects a level label");
        bool found = false;
        for (const auto& level : var.levels) {
          const bool hit = level == *s;
          found = found || hit;
          out(col++) = hit ? 1.0 : 0.0;
        }
        require(found, ErrorCode::SchemaMismatch,
                "'" + var.name + "' has undeclared level '" + *s + "'");
        break;
      }
    }
  }
}

inline EncodedSample encode(const CovariateSchema& schema,
                            const std::vector<RawRecord>& records) {
  EncodedSample out;
  out.columns = schema.columns();
  out.matrix.resize(static_cast<Eigen::Index>(records.size()),
                    static_cast<Eigen::Index>(schema.encoded_dim()));
  for (std::size_t r = 0; r < records.size(); ++r)
    encode_record(schema, records[r], out.matrix.row(static_cast<Eigen::Index>(r)));
  return out;
}

struct StandardizedPair {
  EncodedSample first;
  EncodedSample second;
  StandardizationParams params;
};

/// Standardizes continuous columns of both samples with pooled mean and sd
/// (denominator n_total - 1). Zero-variance continuous columns are dropped
/// from both outputs and listed in `params.dropped`.
inline StandardizedPair pooled_standardize(const EncodedSample& a, const EncodedSample& b) {
  require(a.columns == b.columns, ErrorCode::SchemaMismatch,
          "samples were encoded with different schemas");
  require(a.rows() >= 1 && b.rows() >= 1, ErrorCode::InsufficientSample,
          "each sample needs at least one row");
  const Eigen::Index n = a.rows() + b.rows();
  require(n >= 2, ErrorCode::InsufficientSample, "pooled sample needs at least two rows");

  StandardizedPair out;
  std::vector<Eigen::Index> keep;
  std::vector<std::pair<double, double>> scale;  // per kept column; indicator -> (0,1)
  for (Eigen::Index c = 0; c < a.dim(); ++c) {
    const auto& col = a.columns[static_cast<std::size_t>(c)];
    if (col.indicator) {
      keep.push_back(c);
      scale.emplace_back(0.0, 1.0);
      continue;
    }
    const double mean = (a.matrix.col(c).sum() + b.matrix.col(c).sum()) / double(n);
    const double ss = (a.matrix.col(c).array() - mean).square().sum() +
                      (b.matrix.col(c).array() - mean).square().sum();
    const double sd = std::sqrt(ss / double(n - 1));
    ColumnScaling cs{col.name, mean, sd, false};
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      cs.degenerate = true;
      out.params.dropped.push_back(col.name);
    } else {
      keep.push_back(c);
      scale.emplace_back(mean, sd);
    }
    out.params.continuous.push_back(cs);
  }

  auto apply = [&](const EncodedSample& s) {
    EncodedSample r;
    r.standardized = true;
    r.matrix.resize(s.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const auto c = keep[k];
      r.columns.push_back(s.columns[static_cast<std::size_t>(c)]);
      r.matrix.col(static_cast<Eigen::Index>(k)) =
          (s.matrix.col(c).array() - scale[k].first) / scale[k].second;
    }
    return r;
  };
  out.first = apply(a);
  out.second = apply(b);
  return out;
}

}  // namespace seamless
