#include <cmath>
#include <cstdint>
#include <utility>

#include "dense_simplex.hpp"

namespace evagg {
namespace {

struct Node {
  std::vector<std::int8_t> fixed;  // per binary: -1 free, else 0/1
  LpSolution relaxation;
};

class BranchAndBound {
 public:
  BranchAndBound(const LinearProgram& lp, const MilpOptions& options)
      : base_(detail::densify(lp)), options_(options) {
    for (std::size_t j = 0; j < lp.variable_count(); ++j) {
      if (lp.variable(j).binary) binaries_.push_back(j);
    }
  }

  LpSolution run() {
    Node root{std::vector<std::int8_t>(binaries_.size(), -1), {}};
    root.relaxation = relax(root.fixed);
    if (root.relaxation.status != SolveStatus::optimal) return root.relaxation;

    best_ = options_.cutoff;
    std::vector<Node> stack;
    stack.push_back(std::move(root));
    while (!stack.empty()) {
      Node node = std::move(stack.back());
      stack.pop_back();
      if (node.relaxation.objective <= best_ + kPruneGap) continue;

      const std::ptrdiff_t k = first_fractional(node.relaxation);
      if (k < 0) {
        incumbent_ = std::move(node.relaxation);
        best_ = incumbent_.objective;
        continue;
      }

      Node down{node.fixed, {}};
      Node up{node.fixed, {}};
      down.fixed[static_cast<std::size_t>(k)] = 0;
      up.fixed[static_cast<std::size_t>(k)] = 1;
      down.relaxation = relax(down.fixed);
      up.relaxation = relax(up.fixed);

      const bool down_ok = viable(down.relaxation);
      const bool up_ok = viable(up.relaxation);
      if (down_ok && up_ok) {
        // The child with the better bound is explored first.
        if (up.relaxation.objective >= down.relaxation.objective) {
          stack.push_back(std::move(down));
          stack.push_back(std::move(up));
        } else {
          stack.push_back(std::move(up));
          stack.push_back(std::move(down));
        }
      } else if (down_ok) {
        stack.push_back(std::move(down));
      } else if (up_ok) {
        stack.push_back(std::move(up));
      }
    }

    if (incumbent_.status != SolveStatus::optimal) {
      LpSolution none;
      none.status = std::isfinite(options_.cutoff) ? SolveStatus::cutoff : SolveStatus::infeasible;
      return none;
    }
    snap(incumbent_);
    return incumbent_;
  }

 private:
  LpSolution relax(const std::vector<std::int8_t>& fixed) {
    if (++nodes_ > options_.node_limit) {
      LpSolution inc = incumbent_;
      if (inc.status == SolveStatus::optimal) snap(inc);
      throw NodeLimitError(nodes_ - 1, std::move(inc));
    }
    detail::DenseProblem p = base_;
    for (std::size_t b = 0; b < binaries_.size(); ++b) {
      if (fixed[b] < 0) continue;
      p.lower[binaries_[b]] = fixed[b];
      p.upper[binaries_[b]] = fixed[b];
    }
    return detail::solve_dense(p);
  }

  bool viable(const LpSolution& s) const {
    return s.status == SolveStatus::optimal && s.objective > best_ + kPruneGap;
  }

  std::ptrdiff_t first_fractional(const LpSolution& s) const {
    for (std::size_t b = 0; b < binaries_.size(); ++b) {
      const double v = s.values[binaries_[b]];
      if (std::abs(v - std::round(v)) > kIntegralityTol) return static_cast<std::ptrdiff_t>(b);
    }
    return -1;
  }

  void snap(LpSolution& s) const {
    for (std::size_t j : binaries_) s.values[j] = std::round(s.values[j]);
  }

  detail::DenseProblem base_;
  MilpOptions options_;
  std::vector<std::size_t> binaries_;
  LpSolution incumbent_;
  double best_ = 0.0;
  std::size_t nodes_ = 0;
};

}  // namespace

LpSolution solve_milp(const LinearProgram& lp, const MilpOptions& options) {
  return BranchAndBound(lp, options).run();
}

}  // namespace evagg
