#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace lyacert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Strict lexicographic order on coordinate vectors (total order used to make
/// parallel results reproducible).
inline bool lex_less(const Vector& a, const Vector& b) {
  const Eigen::Index n = std::min(a.size(), b.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return a.size() < b.size();
}

inline bool exactly_equal(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace lyacert
