#ifndef GASJITTER_CONVEX_HPP
#define GASJITTER_CONVEX_HPP

#include <string>
#include <vector>

namespace gasjitter {

using Vec = std::vector<double>;

// Sparse affine expression a^T y + b.
struct AffineForm {
  std::vector<std::pair<int, double>> coeffs;  // (variable index, coefficient)
  double constant = 0.0;

  double eval(const Vec& y) const;
  void add(int var, double coef) { coeffs.emplace_back(var, coef); }
};

// Smooth convex building block: log(sum_k exp(affine_k(y))).
// With a single term this reduces to the affine form itself, so box bounds
// and log-sum-exp couplings share one representation.
struct LogSumExp {
  std::vector<AffineForm> terms;

  double eval(const Vec& y) const;
  // value; gradient written into grad (sized dim, overwritten)
  double eval_grad(const Vec& y, Vec& grad) const;
  // H += scale * hessian(y); H is dense row-major dim x dim
  void add_hessian(const Vec& y, double scale, Vec& hess, int dim) const;
};

struct BarrierOptions {
  double gap_tol = 1e-11;   // duality-gap target, m_constraints / t
  double mu = 20.0;         // barrier growth per centering
  int max_newton = 20000;   // total Newton step budget
  double newton_tol = 1e-12;
  double phase1_target = -1e-8;  // strict-feasibility margin to accept
};

struct BarrierResult {
  Vec y;
  double objective = 0.0;
  bool feasible = false;
  int newton_steps = 0;
  double max_constraint = 0.0;  // max_k f_k(y)
  int worst_constraint = -1;
  std::string message;
};

// Minimizes objective(y) subject to constraints[k](y) <= 0 with a log-barrier
// interior-point method. Runs a phase-I feasibility problem when the start is
// not strictly feasible; reports the maximally violated constraint when the
// feasible set is empty.
BarrierResult minimize_with_barrier(const LogSumExp& objective,
                                    const std::vector<LogSumExp>& constraints, int dim,
                                    const Vec& start, const BarrierOptions& opts = {});

}  // namespace gasjitter

#endif
