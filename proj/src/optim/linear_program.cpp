#include "evagg/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace evagg {

std::size_t LinearProgram::add_variable(std::string name, double lower, double upper) {
  if (!std::isfinite(lower) || !std::isfinite(upper)) {
    throw std::invalid_argument("variable '" + name + "' must have finite bounds");
  }
  if (index_.count(name) != 0) {
    throw std::invalid_argument("duplicate variable name '" + name + "'");
  }
  const std::size_t id = variables_.size();
  index_.emplace(name, id);
  variables_.push_back(Variable{std::move(name), lower, upper, false});
  objective_.push_back(0.0);
  return id;
}

std::size_t LinearProgram::add_binary(std::string name) {
  const std::size_t id = add_variable(std::move(name), 0.0, 1.0);
  variables_[id].binary = true;
  return id;
}

void LinearProgram::set_bounds(std::size_t var, double lower, double upper) {
  if (!std::isfinite(lower) || !std::isfinite(upper)) {
    throw std::invalid_argument("bounds must be finite");
  }
  auto& v = variables_.at(var);
  v.lower = lower;
  v.upper = upper;
}

void LinearProgram::set_objective(std::size_t var, double coef) { objective_.at(var) = coef; }

void LinearProgram::add_constraint(std::string name, std::vector<Term> terms, Relation relation,
                                   double rhs) {
  for (const auto& t : terms) {
    if (t.var >= variables_.size()) {
      throw std::out_of_range("constraint '" + name + "' references unknown variable");
    }
  }
  constraints_.push_back(Constraint{std::move(name), std::move(terms), relation, rhs});
}

std::size_t LinearProgram::binary_count() const {
  return static_cast<std::size_t>(
      std::count_if(variables_.begin(), variables_.end(), [](const Variable& v) { return v.binary; }));
}

std::optional<std::size_t> LinearProgram::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double LinearProgram::evaluate(const std::vector<double>& values) const {
  double total = 0.0;
  for (std::size_t j = 0; j < objective_.size(); ++j) total += objective_[j] * values.at(j);
  return total;
}

double LinearProgram::max_violation(const std::vector<double>& values) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < variables_.size(); ++j) {
    const auto& v = variables_[j];
    const double x = values.at(j);
    worst = std::max(worst, (v.lower - x) / (1.0 + std::abs(v.lower)));
    worst = std::max(worst, (x - v.upper) / (1.0 + std::abs(v.upper)));
    if (v.binary) worst = std::max(worst, std::abs(x - std::round(x)));
  }
  for (const auto& c : constraints_) {
    double lhs = 0.0;
    for (const auto& t : c.terms) lhs += t.coef * values.at(t.var);
    const double scale = 1.0 + std::abs(c.rhs);
    switch (c.relation) {
      case Relation::less_equal: worst = std::max(worst, (lhs - c.rhs) / scale); break;
      case Relation::greater_equal: worst = std::max(worst, (c.rhs - lhs) / scale); break;
      case Relation::equal: worst = std::max(worst, std::abs(lhs - c.rhs) / scale); break;
    }
  }
  return worst;
}

namespace {

void write_expression(std::ostringstream& out, const LinearProgram& lp,
                      const std::vector<Term>& terms) {
  bool first = true;
  for (const auto& t : terms) {
    if (t.coef == 0.0) continue;
    if (!first || t.coef < 0.0) out << (t.coef < 0.0 ? " - " : " + ");
    else out << ' ';
    out << std::abs(t.coef) << ' ' << lp.variable(t.var).name;
    first = false;
  }
  if (first) out << " 0";
}

}  // namespace

std::string LinearProgram::to_lp_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "\\ evagg linear program\nMaximize\n obj:";
  std::vector<Term> obj;
  for (std::size_t j = 0; j < objective_.size(); ++j) {
    if (objective_[j] != 0.0) obj.push_back(Term{j, objective_[j]});
  }
  write_expression(out, *this, obj);
  out << "\nSubject To\n";
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    const auto& c = constraints_[i];
    out << ' ' << (c.name.empty() ? "c" + std::to_string(i) : c.name) << ':';
    write_expression(out, *this, c.terms);
    switch (c.relation) {
      case Relation::less_equal: out << " <= "; break;
      case Relation::greater_equal: out << " >= "; break;
      case Relation::equal: out << " = "; break;
    }
    out << c.rhs << '\n';
  }
  out << "Bounds\n";
  for (const auto& v : variables_) {
    if (v.binary) continue;
    out << ' ' << v.lower << " <= " << v.name << " <= " << v.upper << '\n';
  }
  out << "Binaries\n";
  for (const auto& v : variables_) {
    if (v.binary) out << ' ' << v.name << '\n';
  }
  out << "End\n";
  return out.str();
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::cutoff: return "cutoff";
  }
  return "unknown";
}

double LpSolution::value(const LinearProgram& lp, std::string_view name) const {
  auto idx = lp.find(name);
  if (!idx) throw std::out_of_range("unknown variable '" + std::string(name) + "'");
  return values.at(*idx);
}

std::unordered_map<std::string, double> LpSolution::assignment(const LinearProgram& lp) const {
  std::unordered_map<std::string, double> out;
  for (std::size_t j = 0; j < values.size() && j < lp.variable_count(); ++j) {
    out.emplace(lp.variable(j).name, values[j]);
  }
  return out;
}

NodeLimitError::NodeLimitError(std::size_t nodes, LpSolution incumbent)
    : std::runtime_error("branch and bound node limit reached after " + std::to_string(nodes) +
                         " nodes"),
      incumbent_(std::move(incumbent)) {}

}  // namespace evagg
