#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evagg {

enum class Relation { less_equal, equal, greater_equal };

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  bool binary = false;
};

struct Term {
  std::size_t var;
  double coef;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Relation relation = Relation::less_equal;
  double rhs = 0.0;
};

/// Declarative maximization problem over finitely bounded variables.
///
/// Every variable must carry finite bounds; binaries are declared with
/// bounds {0,1}. The objective is always maximized.
class LinearProgram {
 public:
  std::size_t add_variable(std::string name, double lower, double upper);
  std::size_t add_binary(std::string name);

  void set_bounds(std::size_t var, double lower, double upper);
  void set_objective(std::size_t var, double coef);
  void add_constraint(std::string name, std::vector<Term> terms, Relation relation, double rhs);

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const std::vector<double>& objective() const { return objective_; }
  const Variable& variable(std::size_t i) const { return variables_.at(i); }

  std::size_t variable_count() const { return variables_.size(); }
  std::size_t constraint_count() const { return constraints_.size(); }
  std::size_t binary_count() const;

  std::optional<std::size_t> find(std::string_view name) const;

  /// Objective value of an arbitrary assignment.
  double evaluate(const std::vector<double>& values) const;

  /// Largest bound or constraint violation of `values`, each scaled by 1+|rhs|.
  double max_violation(const std::vector<double>& values) const;

  /// CPLEX-style LP text, for cross-checking with external solvers.
  std::string to_lp_text() const;

 private:
  std::vector<Variable> variables_;
  std::vector<double> objective_;
  std::vector<Constraint> constraints_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class SolveStatus { optimal, infeasible, unbounded, cutoff };

std::string_view to_string(SolveStatus status);

struct LpSolution {
  SolveStatus status = SolveStatus::infeasible;
  double objective = 0.0;
  std::vector<double> values;

  bool optimal() const { return status == SolveStatus::optimal; }
  double value(const LinearProgram& lp, std::string_view name) const;
  std::unordered_map<std::string, double> assignment(const LinearProgram& lp) const;
};

inline constexpr double kFeasibilityTol = 1e-7;
inline constexpr double kIntegralityTol = 1e-7;
inline constexpr double kPruneGap = 1e-9;

/// Bounded-variable primal simplex on a dense tableau. Binary flags are
/// ignored, so calling this on a mixed program solves its LP relaxation.
LpSolution solve_lp(const LinearProgram& lp);

struct MilpOptions {
  std::size_t node_limit = 200000;
  /// Only solutions with objective strictly above the cutoff are of interest.
  /// When the root relaxation cannot beat it the solve stops with
  /// SolveStatus::cutoff.
  double cutoff = -std::numeric_limits<double>::infinity();
};

class NodeLimitError : public std::runtime_error {
 public:
  NodeLimitError(std::size_t nodes, LpSolution incumbent);
  const LpSolution& incumbent() const { return incumbent_; }

 private:
  LpSolution incumbent_;
};

/// Depth-first branch and bound over the binary variables.
LpSolution solve_milp(const LinearProgram& lp, const MilpOptions& options = {});

}  // namespace evagg
