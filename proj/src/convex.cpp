#include "gasjitter/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gasjitter/errors.hpp"

namespace gasjitter {

double AffineForm::eval(const Vec& y) const {
  double v = constant;
  for (const auto& [i, c] : coeffs) v += c * y[i];
  return v;
}

double LogSumExp::eval(const Vec& y) const {
  if (terms.size() == 1) return terms[0].eval(y);
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) mx = std::max(mx, t.eval(y));
  double s = 0.0;
  for (const auto& t : terms) s += std::exp(t.eval(y) - mx);
  return mx + std::log(s);
}

double LogSumExp::eval_grad(const Vec& y, Vec& grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (terms.size() == 1) {
    for (const auto& [i, c] : terms[0].coeffs) grad[i] += c;
    return terms[0].eval(y);
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) mx = std::max(mx, t.eval(y));
  double s = 0.0;
  std::vector<double> w(terms.size());
  for (size_t k = 0; k < terms.size(); ++k) {
    w[k] = std::exp(terms[k].eval(y) - mx);
    s += w[k];
  }
  for (size_t k = 0; k < terms.size(); ++k) {
    double wk = w[k] / s;
    for (const auto& [i, c] : terms[k].coeffs) grad[i] += wk * c;
  }
  return mx + std::log(s);
}

void LogSumExp::add_hessian(const Vec& y, double scale, Vec& hess, int dim) const {
  if (terms.size() == 1) return;  // affine, zero curvature
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) mx = std::max(mx, t.eval(y));
  double s = 0.0;
  std::vector<double> w(terms.size());
  for (size_t k = 0; k < terms.size(); ++k) {
    w[k] = std::exp(terms[k].eval(y) - mx);
    s += w[k];
  }
  Vec g(dim, 0.0);
  for (size_t k = 0; k < terms.size(); ++k) {
    double wk = w[k] / s;
    for (const auto& [i, c] : terms[k].coeffs) g[i] += wk * c;
    // sum_k w_k a_k a_k^T
    for (const auto& [i, ci] : terms[k].coeffs)
      for (const auto& [j, cj] : terms[k].coeffs)
        hess[i * dim + j] += scale * wk * ci * cj;
  }
  // - g g^T
  for (int i = 0; i < dim; ++i) {
    if (g[i] == 0.0) continue;
    for (int j = 0; j < dim; ++j) hess[i * dim + j] -= scale * g[i] * g[j];
  }
}

namespace {

// In-place Cholesky solve of H x = -g with escalating ridge regularization.
bool solve_newton_system(Vec H, Vec g, int dim, Vec& dy) {
  double trace = 0.0;
  for (int i = 0; i < dim; ++i) trace += H[i * dim + i];
  double ridge = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Vec L = H;
    if (ridge > 0)
      for (int i = 0; i < dim; ++i) L[i * dim + i] += ridge;
    bool ok = true;
    for (int i = 0; i < dim && ok; ++i) {
      for (int j = 0; j <= i; ++j) {
        double sum = L[i * dim + j];
        for (int k = 0; k < j; ++k) sum -= L[i * dim + k] * L[j * dim + k];
        if (i == j) {
          if (sum <= 0.0 || !std::isfinite(sum)) {
            ok = false;
            break;
          }
          L[i * dim + i] = std::sqrt(sum);
        } else {
          L[i * dim + j] = sum / L[j * dim + j];
        }
      }
    }
    if (!ok) {
      ridge = ridge == 0.0 ? std::max(1e-12 * trace, 1e-14) : ridge * 100.0;
      continue;
    }
    // forward/back substitution on -g
    dy.assign(dim, 0.0);
    for (int i = 0; i < dim; ++i) {
      double sum = -g[i];
      for (int k = 0; k < i; ++k) sum -= L[i * dim + k] * dy[k];
      dy[i] = sum / L[i * dim + i];
    }
    for (int i = dim - 1; i >= 0; --i) {
      double sum = dy[i];
      for (int k = i + 1; k < dim; ++k) sum -= L[k * dim + i] * dy[k];
      dy[i] = sum / L[i * dim + i];
    }
    return true;
  }
  return false;
}

struct CenteringProblem {
  const LogSumExp* objective;
  const std::vector<LogSumExp>* constraints;
  int dim;
  bool phase1 = false;  // appends slack variable s: constraints f_k(y) - s <= 0

  int total_dim() const { return phase1 ? dim + 1 : dim; }

  double constraint_value(size_t k, const Vec& y) const {
    double v = (*constraints)[k].eval(y);
    return phase1 ? v - y[dim] : v;
  }

  double objective_value(const Vec& y) const {
    return phase1 ? y[dim] : objective->eval(y);
  }

  bool strictly_feasible(const Vec& y) const {
    for (size_t k = 0; k < constraints->size(); ++k)
      if (!(constraint_value(k, y) < 0.0)) return false;
    return true;
  }

  // t * f0 + barrier
  double merit(double t, const Vec& y) const {
    double v = t * objective_value(y);
    for (size_t k = 0; k < constraints->size(); ++k) {
      double f = constraint_value(k, y);
      if (f >= 0.0) return std::numeric_limits<double>::infinity();
      v -= std::log(-f);
    }
    return v;
  }
};

// One Newton centering pass, capped per call; imperfect centers are accepted
// (the next barrier stage re-centers). Returns false only when the Newton
// system itself cannot be solved.
bool center(const CenteringProblem& prob, double t, Vec& y, int& newton_budget,
            double newton_tol, int per_center_cap = 80) {
  const int n = prob.total_dim();
  Vec grad(n), g_k(n), H(static_cast<size_t>(n) * n);
  int taken = 0;
  while (newton_budget > 0 && taken < per_center_cap) {
    --newton_budget;
    ++taken;
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(H.begin(), H.end(), 0.0);

    if (prob.phase1) {
      grad[n - 1] += t;  // objective is s
    } else {
      Vec og(n, 0.0);
      prob.objective->eval_grad(y, og);
      for (int i = 0; i < n; ++i) grad[i] += t * og[i];
      prob.objective->add_hessian(y, t, H, n);
    }

    for (size_t k = 0; k < prob.constraints->size(); ++k) {
      const LogSumExp& f = (*prob.constraints)[k];
      double v = f.eval_grad(y, g_k);
      if (prob.phase1) {
        g_k[n - 1] = -1.0;
        v -= y[n - 1];
      }
      double inv = 1.0 / (-v);  // v < 0 inside the domain
      for (int i = 0; i < n; ++i) grad[i] += inv * g_k[i];
      f.add_hessian(y, inv, H, n);
      for (int i = 0; i < n; ++i) {
        if (g_k[i] == 0.0) continue;
        double gi = inv * g_k[i];
        for (int j = 0; j < n; ++j) H[i * n + j] += gi * inv * g_k[j];
      }
    }

    Vec dy;
    if (!solve_newton_system(H, grad, n, dy)) return false;
    double lambda_sq = 0.0;
    for (int i = 0; i < n; ++i) lambda_sq -= grad[i] * dy[i];
    if (lambda_sq / 2.0 <= newton_tol) return true;

    // backtracking line search staying inside the barrier domain
    double base = prob.merit(t, y);
    double slope = -lambda_sq;
    double step = 1.0;
    Vec trial(n);
    bool moved = false;
    for (int bt = 0; bt < 70; ++bt) {
      for (int i = 0; i < n; ++i) trial[i] = y[i] + step * dy[i];
      double m = prob.merit(t, trial);
      if (m <= base + 0.25 * step * slope) {
        moved = m < base;
        break;
      }
      step *= 0.5;
    }
    if (!moved) return true;  // numerically stalled; accept the near-center
    for (int i = 0; i < n; ++i) y[i] += step * dy[i];
  }
  return true;
}

}  // namespace

BarrierResult minimize_with_barrier(const LogSumExp& objective,
                                    const std::vector<LogSumExp>& constraints, int dim,
                                    const Vec& start, const BarrierOptions& opts) {
  BarrierResult res;
  res.y = start;
  res.y.resize(dim, 0.0);
  int budget = opts.max_newton;

  if (constraints.empty()) {
    CenteringProblem prob{&objective, &constraints, dim, false};
    center(prob, 1.0, res.y, budget, opts.newton_tol);
    res.feasible = true;
    res.objective = objective.eval(res.y);
    res.newton_steps = opts.max_newton - budget;
    return res;
  }

  CenteringProblem main{&objective, &constraints, dim, false};

  if (!main.strictly_feasible(res.y)) {
    // Phase I: minimize s subject to f_k(y) <= s.
    CenteringProblem ph1{&objective, &constraints, dim, true};
    Vec z = res.y;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& f : constraints) worst = std::max(worst, f.eval(z));
    z.push_back(worst + 1.0);

    double t = 1.0;
    const double m = static_cast<double>(constraints.size());
    while (budget > 0) {
      if (!center(ph1, t, z, budget, opts.newton_tol)) break;
      if (z[dim] < opts.phase1_target) break;  // found a comfortably interior point
      if (m / t < opts.gap_tol) break;
      t *= opts.mu;
    }
    res.y.assign(z.begin(), z.begin() + dim);
    if (!(z[dim] < 0.0) || !main.strictly_feasible(res.y)) {
      res.feasible = false;
      res.max_constraint = -std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < constraints.size(); ++k) {
        double v = constraints[k].eval(res.y);
        if (v > res.max_constraint) {
          res.max_constraint = v;
          res.worst_constraint = static_cast<int>(k);
        }
      }
      res.newton_steps = opts.max_newton - budget;
      res.message = "infeasible: phase-I optimum leaves constraint " +
                    std::to_string(res.worst_constraint) + " at " +
                    std::to_string(res.max_constraint);
      return res;
    }
  }

  // Phase II.
  double t = 1.0;
  const double m = static_cast<double>(constraints.size());
  while (budget > 0) {
    if (!center(main, t, res.y, budget, opts.newton_tol)) break;
    if (m / t < opts.gap_tol) break;
    t *= opts.mu;
  }
  if (budget <= 0 && m / t >= opts.gap_tol * 100)
    throw ConvergenceError("barrier method exhausted its Newton budget (gap " +
                           std::to_string(m / t) + ")");

  res.feasible = true;
  res.objective = objective.eval(res.y);
  res.newton_steps = opts.max_newton - budget;
  res.max_constraint = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < constraints.size(); ++k) {
    double v = constraints[k].eval(res.y);
    if (v > res.max_constraint) {
      res.max_constraint = v;
      res.worst_constraint = static_cast<int>(k);
    }
  }
  return res;
}

}  // namespace gasjitter
