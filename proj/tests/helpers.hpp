#pragma once

#include <Eigen/Core>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "seamless/covariates.hpp"

namespace testing_helpers {

inline Eigen::MatrixXd to_matrix(const oracle::Points& p) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(p.size()),
                    p.empty() ? 0 : static_cast<Eigen::Index>(p[0].size()));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p[i][j];
  return m;
}

inline seamless::EncodedSample continuous_sample(const oracle::Points& p) {
  seamless::EncodedSample s;
  s.matrix = to_matrix(p);
  for (Eigen::Index j = 0; j < s.matrix.cols(); ++j) s.columns.push_back({"x" + std::to_string(j), false});
  return s;
}

inline oracle::Points normal_points(std::mt19937_64& g, std::size_t n, std::size_t d, double mean = 0.0) {
  std::normal_distribution<double> nd(mean, 1.0);
  oracle::Points p(n, std::vector<double>(d));
  for (auto& row : p)
    for (auto& v : row) v = nd(g);
  return p;
}

}  // namespace testing_helpers
