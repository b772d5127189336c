#pragma once

#include <complex>
#include <vector>

#include "gridsplit/network.hpp"
#include "gridsplit/nlp.hpp"

namespace gridsplit {

/// Flat variable vector for a case or a region subproblem. Voltages are
/// rectangular pairs; layout is [e_0 f_0 ... e_{nb-1} f_{nb-1},
/// P_0 Q_0 ... P_{ng-1} Q_{ng-1}], everything in per-unit.
struct OpfVariables {
  Eigen::VectorXd v;
  int n_bus = 0;
  int n_gen = 0;

  OpfVariables() = default;
  OpfVariables(int buses, int gens)
      : v(Eigen::VectorXd::Zero(2 * buses + 2 * gens)), n_bus(buses), n_gen(gens) {}

  /// All voltages 1+0j, generator outputs zero.
  static OpfVariables flat(int buses, int gens) {
    OpfVariables x(buses, gens);
    for (int b = 0; b < buses; ++b) x.v[2 * b] = 1.0;
    return x;
  }

  int size() const { return 2 * n_bus + 2 * n_gen; }
  double& e(int b) { return v[2 * b]; }
  double e(int b) const { return v[2 * b]; }
  double& f(int b) { return v[2 * b + 1]; }
  double f(int b) const { return v[2 * b + 1]; }
  double& p(int g) { return v[2 * n_bus + 2 * g]; }
  double p(int g) const { return v[2 * n_bus + 2 * g]; }
  double& q(int g) { return v[2 * n_bus + 2 * g + 1]; }
  double q(int g) const { return v[2 * n_bus + 2 * g + 1]; }
  std::complex<double> voltage(int b) const { return {e(b), f(b)}; }
};

enum class LineLimitMode { None, All, Subset };

struct OpfOptions {
  NlpOptions nlp;
  LineLimitMode line_limits = LineLimitMode::None;
  std::vector<int> limited_branches;  // branch positions, used with Subset
  const OpfVariables* start = nullptr;  // optional warm start
};

struct OpfSolution {
  OpfVariables vars;
  double objective = 0.0;  // $/h
  NlpStatus status = NlpStatus::IterationLimit;
  double kkt_error = 0.0;
  int iterations = 0;

  // Multipliers of the first-order conditions, in solve order.
  Eigen::VectorXd mu_p, mu_q;  // power balance per bus (real, reactive)
  double mu_ref = 0.0;         // reference-angle row
  Eigen::VectorXd nu_vband;    // |V|^2 band per bus (>0: upper side)
  Eigen::VectorXd nu_flow;     // two per limited branch (from, to ends)
  Eigen::VectorXd z_lower, z_upper;  // variable bound multipliers

  // Line-limit configuration the problem was assembled with.
  LineLimitMode line_limits = LineLimitMode::None;
  std::vector<int> limited_branches;
};

/// Per-bus complex power mismatch S_gen - S_load - V_i (sum_j Y_ij V_j)^*.
Eigen::VectorXcd power_flow_residual(const NetworkCase& net, const AdmittanceMatrix& Y,
                                     const OpfVariables& vars);

/// Total generation cost in $/h; P is costed in MW.
double objective(const NetworkCase& net, const OpfVariables& vars);

/// Fixed injections for a conventional power flow.
struct Dispatch {
  Eigen::VectorXd p_gen;  // per generator, p.u.
  Eigen::VectorXd v_set;  // per generator voltage magnitude target

  static Dispatch from_case(const NetworkCase& net);
};

struct PowerFlowOptions {
  double tol = 1e-8;  // max mismatch, p.u.
  int max_iter = 20;
};

class PowerFlowError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Newton-Raphson power flow. P is fixed at generator buses (slack excluded),
/// |V| at generator and slack buses; throws PowerFlowError on non-convergence.
OpfVariables solve_power_flow(const NetworkCase& net, const AdmittanceMatrix& Y,
                              const Dispatch& dispatch, const OpfVariables& start,
                              const PowerFlowOptions& opts = {});

/// Centralized AC OPF over the full case.
OpfSolution solve_centralized_opf(const NetworkCase& net, const OpfOptions& opts = {});

/// Jacobian H of the stacked first-order conditions F(y) = 0 at an optimal
/// point, y = (primal variables, multipliers of equalities and of the
/// active inequalities/bounds). S_i index sets cover every row of H and are
/// pairwise disjoint.
struct KktRow {
  enum class Kind { BalanceP, BalanceQ, Ref, VBand, Flow, BoundLower, BoundUpper };
  Kind kind;
  int index = 0;     // bus, limit-row or variable position, per kind
  double rhs = 0.0;  // bound value for active inequality/bound rows
};

struct KktJacobian {
  Eigen::SparseMatrix<double> H;
  std::vector<std::vector<int>> bus_indices;  // S_i keyed by bus position
  std::vector<int> bus_of;                    // y index -> bus position
  int n_primal = 0;                           // leading primal block size
  std::vector<KktRow> rows;                   // multiplier rows, in order
  Eigen::VectorXd y0;                         // evaluation point (x, multipliers)
};

KktJacobian kkt_jacobian(const NetworkCase& net, const OpfSolution& sol);

/// Stacked optimality-condition residual F(y) evaluated at arbitrary primal
/// variables with the given multipliers (stationarity block first, then
/// constraint rows); used by convergence diagnostics.
Eigen::VectorXd stationarity_residual(const NetworkCase& net, const AdmittanceMatrix& Y,
                                      const OpfVariables& vars, const OpfSolution& mults);

}  // namespace gridsplit
