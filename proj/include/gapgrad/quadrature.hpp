#pragma once

#include <vector>

namespace gapgrad {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes by Newton iteration on P_n; cached per order, thread-safe.
const GaussRule& gauss_legendre(int n);

}  // namespace gapgrad
