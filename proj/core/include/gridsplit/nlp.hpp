#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace gridsplit {

/// Smooth nonlinear program
///
///   minimize    f(x)
///   subject to  g(x) = 0
///               c_lo <= c(x) <= c_up
///               lb <= x <= ub
///
/// Jacobians and the Hessian of the Lagrangian f*w + y_eq'g + y_ineq'c are
/// reported as full symmetric triplet lists. Infinite bounds are allowed.
class NlpProblem {
 public:
  using Vec = Eigen::VectorXd;
  using Triplets = std::vector<Eigen::Triplet<double>>;

  virtual ~NlpProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const { return 0; }

  virtual double objective(const Vec& x) const = 0;
  virtual void objective_gradient(const Vec& x, Vec& grad) const = 0;

  /// Fills g (size num_eq) and c (size num_ineq).
  virtual void constraints(const Vec& x, Vec& g, Vec& c) const = 0;
  /// Jacobian triplets of g and of c, row-indexed within each block.
  virtual void constraint_jacobian(const Vec& x, Triplets& jac_eq,
                                   Triplets& jac_ineq) const = 0;
  /// Full symmetric Hessian of w*f + y_eq'g + y_ineq'c.
  virtual void lagrangian_hessian(const Vec& x, double w, const Vec& y_eq,
                                  const Vec& y_ineq, Triplets& hess) const = 0;

  virtual void variable_bounds(Vec& lb, Vec& ub) const = 0;
  virtual void ineq_bounds(Vec& lo, Vec& up) const;  // default: empty

  virtual Vec initial_point() const = 0;
};

struct NlpOptions {
  double tol = 1e-6;    // scaled KKT infinity-norm target
  int max_iter = 300;
  bool auto_scale = true;   // gradient-based objective scaling
  bool record_history = false;
  bool verbose = false;
};

enum class NlpStatus { Optimal, IterationLimit, Infeasible, LinAlgFailure };

std::string to_string(NlpStatus s);

struct NlpIterate {
  double mu = 0.0;
  double merit_before = 0.0;  // merit of the accepted step, both evaluated
  double merit_after = 0.0;   // at the same (mu, penalty)
  double alpha = 0.0;
  double kkt_error = 0.0;
};

struct NlpResult {
  NlpStatus status = NlpStatus::IterationLimit;
  Eigen::VectorXd x;
  Eigen::VectorXd y_eq;     // multipliers of g(x) = 0
  Eigen::VectorXd y_ineq;   // multipliers of c(x) - s = 0 (>0: upper side active)
  Eigen::VectorXd z_lower;  // bound multipliers, >= 0
  Eigen::VectorXd z_upper;
  double objective = 0.0;
  double kkt_error = 0.0;         // scaled KKT infinity norm at exit
  double constraint_violation = 0.0;
  int iterations = 0;
  std::string message;
  std::vector<NlpIterate> history;  // filled when opts.record_history
};

/// Primal-dual interior-point solver: Mehrotra-style centering, sparse
/// LDL' factorization with inertia-driven regularization, an l1 penalty
/// merit line search and the usual slack/dual reset safeguards.
NlpResult solve_nlp(const NlpProblem& problem, const NlpOptions& opts = {});

}  // namespace gridsplit
