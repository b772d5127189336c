#pragma once

// Shared assembly of the AC OPF as an NlpProblem, used for the centralized
// solve and for the per-region ADMM subproblems. A region instance owns a
// subset of buses (those with power-balance rows) plus duplicated boundary
// buses that only carry voltage variables and voltage-band constraints.

#include <complex>
#include <optional>
#include <vector>

#include "gridsplit/network.hpp"
#include "gridsplit/nlp.hpp"
#include "gridsplit/opf.hpp"

namespace gridsplit::detail {

/// lambda'(Ax - z) + 0.5 (Ax - z)' diag(rho) (Ax - z) added to the objective.
struct CouplingTerms {
  Eigen::SparseMatrix<double> A;  // rows x num_vars
  Eigen::VectorXd lambda, rho, z;
  bool empty() const { return A.rows() == 0; }
};

class AcOpfProblem : public NlpProblem {
 public:
  struct LocalBus {
    int global = -1;
    bool owned = true;
    double p_load = 0.0, q_load = 0.0;
    double vmin2 = 0.0, vmax2 = 0.0;
  };
  struct LocalGen {
    int global = -1;
    int bus = -1;  // local bus position
    double p_min = 0, p_max = 0, q_min = 0, q_max = 0;
    double cost_a = 0, cost_b = 0, cost_c = 0;
  };
  struct YEntry {
    int col_bus = -1;  // local bus position
    double g = 0.0, b = 0.0;
  };
  struct FlowLimit {
    int own = -1, other = -1;  // local bus positions; "own" end is limited
    std::complex<double> y_own, y_other;
    double smax2 = 0.0;
  };

  /// Centralized problem over the whole case.
  AcOpfProblem(const NetworkCase& net, const AdmittanceMatrix& Y, LineLimitMode mode,
               const std::vector<int>& limited);

  /// Region problem: `bus_sel[i]` lists (global bus, owned) pairs; generators
  /// are taken from owned buses only. The admittance rows of owned buses must
  /// close over the selection.
  AcOpfProblem(const NetworkCase& net, const AdmittanceMatrix& Y,
               const std::vector<std::pair<int, bool>>& bus_sel, LineLimitMode mode,
               const std::vector<int>& limited);

  void set_coupling(CouplingTerms coupling);

  // layout helpers
  int n_local_buses() const { return static_cast<int>(buses_.size()); }
  int n_local_gens() const { return static_cast<int>(gens_.size()); }
  int e_col(int lb) const { return 2 * lb; }
  int f_col(int lb) const { return 2 * lb + 1; }
  int p_col(int lg) const { return 2 * n_local_buses() + 2 * lg; }
  int q_col(int lg) const { return 2 * n_local_buses() + 2 * lg + 1; }
  int n_owned() const { return n_owned_; }
  int ref_row() const { return fix_reference_ ? 2 * n_owned_ : -1; }
  const std::vector<LocalBus>& local_buses() const { return buses_; }
  const std::vector<LocalGen>& local_gens() const { return gens_; }
  const std::vector<FlowLimit>& flow_limits() const { return limits_; }
  const std::vector<int>& owned_rows() const { return owned_pos_; }
  double base_mva() const { return base_mva_; }

  // NlpProblem interface
  int num_vars() const override { return 2 * n_local_buses() + 2 * n_local_gens(); }
  int num_eq() const override { return 2 * n_owned_ + (fix_reference_ ? 1 : 0); }
  int num_ineq() const override {
    return n_local_buses() + static_cast<int>(limits_.size());
  }
  double objective(const Vec& x) const override;
  void objective_gradient(const Vec& x, Vec& grad) const override;
  void constraints(const Vec& x, Vec& g, Vec& c) const override;
  void constraint_jacobian(const Vec& x, Triplets& jac_eq,
                           Triplets& jac_ineq) const override;
  void lagrangian_hessian(const Vec& x, double w, const Vec& y_eq, const Vec& y_ineq,
                          Triplets& hess) const override;
  void variable_bounds(Vec& lb, Vec& ub) const override;
  void ineq_bounds(Vec& lo, Vec& up) const override;
  Vec initial_point() const override;

  void set_initial_point(const Eigen::VectorXd& x0) { start_ = x0; }

 private:
  void init(const NetworkCase& net, const AdmittanceMatrix& Y,
            const std::vector<std::pair<int, bool>>& bus_sel, LineLimitMode mode,
            const std::vector<int>& limited);

  double base_mva_ = 100.0;
  std::vector<LocalBus> buses_;
  std::vector<LocalGen> gens_;
  std::vector<int> owned_pos_;              // local positions of owned buses
  std::vector<std::vector<YEntry>> yrows_;  // per owned bus, incl. diagonal
  std::vector<std::vector<int>> gens_at_;   // local gens per local bus
  std::vector<FlowLimit> limits_;
  int n_owned_ = 0;
  bool fix_reference_ = false;
  int ref_local_ = -1;
  CouplingTerms coupling_;
  Eigen::SparseMatrix<double> AtRA_;  // cached A' diag(rho) A
  std::optional<Eigen::VectorXd> start_;
};

}  // namespace gridsplit::detail
