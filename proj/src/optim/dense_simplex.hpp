#pragma once

#include <vector>

#include "evagg/optim.hpp"

namespace evagg::detail {

// Row-major copy of a LinearProgram. Branch and bound rewrites only the
// bound vectors between nodes.
struct DenseProblem {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;
  std::vector<Relation> relation;
  std::vector<double> rhs;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> cost;
};

DenseProblem densify(const LinearProgram& lp);

LpSolution solve_dense(const DenseProblem& problem);

}  // namespace evagg::detail
