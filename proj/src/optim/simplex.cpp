#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dense_simplex.hpp"

namespace evagg {
namespace detail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr double kTieTol = 1e-12;
constexpr int kDegenerateBeforeBland = 50;

// Bounded-variable primal simplex. Structural variables are shifted so every
// column has bounds [0, upper]; slacks have upper = inf; artificials are
// driven out in phase one and then pinned to [0, 0].
class Tableau {
 public:
  explicit Tableau(const DenseProblem& p);

  LpSolution solve();

 private:
  enum class Outcome { optimal, unbounded };

  double& at(std::size_t i, std::size_t j) { return t_[i * width_ + j]; }
  double at(std::size_t i, std::size_t j) const { return t_[i * width_ + j]; }

  void price(const std::vector<double>& cost);
  Outcome run();
  std::ptrdiff_t choose_entering(bool bland) const;
  void pivot(std::size_t row, std::size_t col);
  double column_value(std::size_t j) const;

  const DenseProblem& p_;
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::size_t width_ = 0;
  std::size_t art_begin_ = 0;
  std::vector<double> t_;
  std::vector<double> x_;
  std::vector<std::size_t> basis_;
  std::vector<std::ptrdiff_t> row_of_;
  std::vector<double> upper_;
  std::vector<bool> at_upper_;
  std::vector<double> cost_;
  std::vector<double> d_;
  double rhs_scale_ = 1.0;
};

Tableau::Tableau(const DenseProblem& p) : p_(p), m_(p.rows), n_(p.cols) {
  std::vector<double> b(m_);
  std::vector<double> sign(m_, 1.0);
  std::vector<bool> has_slack(m_, false);
  std::size_t slacks = 0;
  for (std::size_t i = 0; i < m_; ++i) {
    double r = p.rhs[i];
    for (std::size_t j = 0; j < n_; ++j) r -= p.a[i * n_ + j] * p.lower[j];
    if (p.relation[i] == Relation::greater_equal) sign[i] = -1.0;
    b[i] = sign[i] * r;
    if (p.relation[i] != Relation::equal) {
      has_slack[i] = true;
      ++slacks;
    }
    rhs_scale_ = std::max(rhs_scale_, std::abs(b[i]));
  }

  std::vector<bool> needs_art(m_, false);
  std::size_t arts = 0;
  for (std::size_t i = 0; i < m_; ++i) {
    if (!has_slack[i] || b[i] < 0.0) {
      needs_art[i] = true;
      ++arts;
    }
  }

  art_begin_ = n_ + slacks;
  width_ = art_begin_ + arts;
  t_.assign(m_ * width_, 0.0);
  x_.assign(m_, 0.0);
  basis_.assign(m_, 0);
  row_of_.assign(width_, -1);
  upper_.assign(width_, kInf);
  at_upper_.assign(width_, false);
  for (std::size_t j = 0; j < n_; ++j) upper_[j] = std::max(0.0, p.upper[j] - p.lower[j]);

  std::size_t slack_col = n_;
  std::size_t art_col = art_begin_;
  for (std::size_t i = 0; i < m_; ++i) {
    // Rows needing an artificial are flipped so the artificial enters with +1
    // and a non-negative value.
    const double flip = (needs_art[i] && b[i] < 0.0) ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n_; ++j) at(i, j) = flip * sign[i] * p.a[i * n_ + j];
    if (has_slack[i]) at(i, slack_col) = flip;
    x_[i] = flip * b[i];
    if (needs_art[i]) {
      at(i, art_col) = 1.0;
      basis_[i] = art_col++;
    } else {
      basis_[i] = slack_col;
    }
    if (has_slack[i]) ++slack_col;
    row_of_[basis_[i]] = static_cast<std::ptrdiff_t>(i);
  }
}

void Tableau::price(const std::vector<double>& cost) {
  cost_ = cost;
  d_ = cost;
  for (std::size_t i = 0; i < m_; ++i) {
    const double cb = cost_[basis_[i]];
    if (cb == 0.0) continue;
    const double* row = &t_[i * width_];
    for (std::size_t j = 0; j < width_; ++j) d_[j] -= cb * row[j];
  }
}

std::ptrdiff_t Tableau::choose_entering(bool bland) const {
  std::ptrdiff_t best = -1;
  double best_score = 0.0;
  for (std::size_t j = 0; j < width_; ++j) {
    if (row_of_[j] >= 0 || upper_[j] <= 0.0) continue;
    const double dj = d_[j];
    const bool improving = at_upper_[j] ? dj > kCostTol : dj < -kCostTol;
    if (!improving) continue;
    if (bland) return static_cast<std::ptrdiff_t>(j);
    const double score = std::abs(dj);
    if (score > best_score) {
      best_score = score;
      best = static_cast<std::ptrdiff_t>(j);
    }
  }
  return best;
}

void Tableau::pivot(std::size_t row, std::size_t col) {
  double* prow = &t_[row * width_];
  const double inv = 1.0 / prow[col];
  for (std::size_t j = 0; j < width_; ++j) prow[j] *= inv;
  prow[col] = 1.0;
  for (std::size_t i = 0; i < m_; ++i) {
    if (i == row) continue;
    double* r = &t_[i * width_];
    const double f = r[col];
    if (f == 0.0) continue;
    for (std::size_t j = 0; j < width_; ++j) r[j] -= f * prow[j];
    r[col] = 0.0;
  }
  const double f = d_[col];
  if (f != 0.0) {
    for (std::size_t j = 0; j < width_; ++j) d_[j] -= f * prow[j];
    d_[col] = 0.0;
  }
}

Tableau::Outcome Tableau::run() {
  const std::size_t limit = 50 * (m_ + width_) + 1000;
  int degenerate = 0;
  for (std::size_t iter = 0; iter < limit; ++iter) {
    const bool bland = degenerate > kDegenerateBeforeBland;
    const std::ptrdiff_t entering = choose_entering(bland);
    if (entering < 0) return Outcome::optimal;
    const auto j = static_cast<std::size_t>(entering);
    const double dir = at_upper_[j] ? -1.0 : 1.0;

    double theta = upper_[j];
    std::ptrdiff_t leave = -1;
    bool leave_to_upper = false;
    double leave_alpha = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double alpha = dir * at(i, j);
      double lim;
      bool to_upper;
      if (alpha > kPivotTol) {
        lim = x_[i] / alpha;
        to_upper = false;
      } else if (alpha < -kPivotTol && std::isfinite(upper_[basis_[i]])) {
        lim = (upper_[basis_[i]] - x_[i]) / -alpha;
        to_upper = true;
      } else {
        continue;
      }
      lim = std::max(lim, 0.0);
      bool take = false;
      if (lim < theta - kTieTol) {
        take = true;
      } else if (leave >= 0 && lim <= theta + kTieTol) {
        take = bland ? basis_[i] < basis_[static_cast<std::size_t>(leave)]
                     : std::abs(alpha) > std::abs(leave_alpha);
      }
      if (take) {
        theta = lim;
        leave = static_cast<std::ptrdiff_t>(i);
        leave_to_upper = to_upper;
        leave_alpha = alpha;
      }
    }
    if (!std::isfinite(theta)) return Outcome::unbounded;

    degenerate = theta < kTieTol ? degenerate + 1 : 0;
    const double entering_value = (at_upper_[j] ? upper_[j] : 0.0) + dir * theta;
    if (theta > 0.0) {
      for (std::size_t i = 0; i < m_; ++i) x_[i] -= dir * at(i, j) * theta;
    }
    if (leave < 0) {
      at_upper_[j] = !at_upper_[j];
      continue;
    }
    const auto r = static_cast<std::size_t>(leave);
    const std::size_t out = basis_[r];
    row_of_[out] = -1;
    at_upper_[out] = leave_to_upper;
    basis_[r] = j;
    row_of_[j] = static_cast<std::ptrdiff_t>(r);
    at_upper_[j] = false;
    x_[r] = entering_value;
    pivot(r, j);
  }
  throw std::runtime_error("simplex iteration limit exceeded");
}

double Tableau::column_value(std::size_t j) const {
  if (row_of_[j] >= 0) return x_[static_cast<std::size_t>(row_of_[j])];
  return at_upper_[j] ? upper_[j] : 0.0;
}

LpSolution Tableau::solve() {
  LpSolution out;
  for (std::size_t j = 0; j < n_; ++j) {
    if (p_.lower[j] > p_.upper[j] + kFeasibilityTol * (1.0 + std::abs(p_.upper[j]))) {
      out.status = SolveStatus::infeasible;
      return out;
    }
  }

  if (art_begin_ < width_) {
    std::vector<double> phase1(width_, 0.0);
    for (std::size_t j = art_begin_; j < width_; ++j) phase1[j] = 1.0;
    price(phase1);
    run();
    double infeasibility = 0.0;
    for (std::size_t j = art_begin_; j < width_; ++j) infeasibility += column_value(j);
    if (infeasibility > kFeasibilityTol * rhs_scale_) {
      out.status = SolveStatus::infeasible;
      return out;
    }
    for (std::size_t j = art_begin_; j < width_; ++j) {
      upper_[j] = 0.0;
      at_upper_[j] = false;
    }
  }

  std::vector<double> phase2(width_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) phase2[j] = -p_.cost[j];
  price(phase2);
  if (run() == Outcome::unbounded) {
    out.status = SolveStatus::unbounded;
    return out;
  }

  out.status = SolveStatus::optimal;
  out.values.resize(n_);
  out.objective = 0.0;
  for (std::size_t j = 0; j < n_; ++j) {
    double v = p_.lower[j] + column_value(j);
    v = std::clamp(v, p_.lower[j], std::max(p_.lower[j], p_.upper[j]));
    out.values[j] = v;
    out.objective += p_.cost[j] * v;
  }
  return out;
}

}  // namespace

DenseProblem densify(const LinearProgram& lp) {
  DenseProblem p;
  p.rows = lp.constraint_count();
  p.cols = lp.variable_count();
  p.a.assign(p.rows * p.cols, 0.0);
  p.relation.reserve(p.rows);
  p.rhs.reserve(p.rows);
  for (std::size_t i = 0; i < p.rows; ++i) {
    const auto& c = lp.constraints()[i];
    for (const auto& t : c.terms) p.a[i * p.cols + t.var] += t.coef;
    p.relation.push_back(c.relation);
    p.rhs.push_back(c.rhs);
  }
  for (const auto& v : lp.variables()) {
    p.lower.push_back(v.lower);
    p.upper.push_back(v.upper);
  }
  p.cost = lp.objective();
  return p;
}

LpSolution solve_dense(const DenseProblem& problem) { return Tableau(problem).solve(); }

}  // namespace detail

LpSolution solve_lp(const LinearProgram& lp) { return detail::solve_dense(detail::densify(lp)); }

}  // namespace evagg
