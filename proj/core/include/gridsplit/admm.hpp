#pragma once

#include <array>
#include <map>
#include <vector>

#include "gridsplit/network.hpp"
#include "gridsplit/opf.hpp"
#include "gridsplit/partition.hpp"

namespace gridsplit {

struct AdmmOptions {
  double rho0 = 1e4;       // initial penalty
  double tau = 1.05;       // penalty growth factor, > 1
  double gamma = 0.9;      // residue decrease target, in (0,1)
  double beta_plus = 0.5;  // scaling of V_i + V_j rows
  double beta_minus = 2.0;  // scaling of V_i - V_j rows, > beta_plus
  double eps_primal = 1e-4;
  double eps_mismatch_mva = 0.01;
  int max_iterations = 300;
  enum class Start { Warm, Flat };
  Start start = Start::Warm;
  LineLimitMode line_limits = LineLimitMode::None;
  std::vector<int> limited_branches;
  NlpOptions nlp;        // per-region subproblem solver settings
  bool parallel = true;  // solve the regions of a round concurrently

  void validate() const;
};

class AdmmError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One duplicated boundary pair: `local_bus` is owned by this region,
/// `remote_bus` is the duplicated neighbor bus owned by region `neighbor`.
struct TieLine {
  int local_bus = -1;   // global bus position
  int remote_bus = -1;  // global bus position
  int neighbor = -1;    // owning region of remote_bus
};

/// Static description of one region subproblem. Local variable order is
/// V_i for every bus of `buses` (owned first, then duplicated), then (P,Q)
/// of the generators at owned buses. The coupling matrix has four rows per
/// tie line: Re/Im of beta-(V_i - V_j) and Re/Im of beta+(V_i + V_j).
struct RegionProblem {
  int id = 0;
  std::vector<int> owned;  // global bus positions, ascending
  std::vector<int> buses;  // V_k in local order
  std::vector<int> gens;   // global generator positions
  std::vector<TieLine> ties;
  Eigen::SparseMatrix<double> coupling;       // A_k
  std::vector<std::pair<int, bool>> bus_sel;  // (global bus, owned) in local order

  int n_buses() const { return static_cast<int>(buses.size()); }
  int n_gens() const { return static_cast<int>(gens.size()); }
  int n_coupling_rows() const { return 4 * static_cast<int>(ties.size()); }
};

/// Mutable per-region ADMM state.
struct RegionState {
  OpfVariables x;                  // local primal iterate
  Eigen::VectorXd z, lambda, rho;  // per coupling row
  double residue = 0.0;            // current Gamma_k
  double prev_residue = 0.0;       // Gamma_k of the previous iteration
  double solve_seconds = 0.0;      // last subproblem wall time
  NlpStatus last_status = NlpStatus::Optimal;

  // subproblem multipliers, kept for optimality diagnostics
  Eigen::VectorXd mu_p, mu_q;  // per owned bus
  double mu_ref = 0.0;
  Eigen::VectorXd nu_vband;  // per local bus
  Eigen::VectorXd nu_flow;
  Eigen::VectorXd z_lower, z_upper;
};

/// Boundary values broadcast after an x-update: m_k = A_k x_k keyed by the
/// global (i, j) pair of each tie line.
struct Message {
  int sender = -1;
  std::map<std::pair<int, int>, std::array<double, 4>> values;
};

struct AdmmIterationRecord {
  int iteration = 0;
  double max_primal_residue = 0.0;
  double max_mismatch_mva = 0.0;
  double objective = 0.0;
  double est_parallel_time_s = 0.0;  // max subproblem time of the round
  double max_rho = 0.0;
};

struct AdmmTrace {
  std::vector<AdmmIterationRecord> rows;
};

struct AdmmResult {
  OpfVariables merged;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double est_parallel_time_s = 0.0;  // sum over rounds of the max solve time
  AdmmTrace trace;
  std::vector<RegionState> states;
  int subproblem_iteration_limits = 0;  // rounds where a local solve hit its cap
};

/// Duplicate boundary voltages and build the per-region problems (Fig. 1 /
/// Eqs. 2-5 style decomposition).
std::vector<RegionProblem> decompose(const NetworkCase& net, const AdmittanceMatrix& Y,
                                     const Partition& partition,
                                     const AdmmOptions& opts);

/// Local augmented-Lagrangian OPF solve, warm-started at st.x; updates st.
void x_update(const NetworkCase& net, const AdmittanceMatrix& Y,
              const RegionProblem& rp, RegionState& st, const AdmmOptions& opts);

Message make_message(const RegionProblem& rp, const RegionState& st);

/// Consensus step: z- = (m-_k - m-_l)/2, z+ = (m+_k + m+_l)/2 per tie line.
void z_update(const RegionProblem& rp, RegionState& st, const Message& own,
              const std::vector<Message>& all_messages);

/// lambda += rho .* (A x - z)
void lambda_update(const RegionProblem& rp, RegionState& st);

/// Gamma_k = ||A_k x_k - z_k||_inf (0 without tie lines).
double primal_residue(const RegionProblem& rp, const RegionState& st);

/// Penalty schedule: per-region uniform growth when the residue stagnates,
/// then mirrored tie lines take the pairwise max.
void rho_update(const std::vector<RegionProblem>& problems,
                std::vector<RegionState>& states, const AdmmOptions& opts);

/// Mean of the duplicated voltage copies per boundary bus; interior buses
/// and generator outputs come from the owning region.
OpfVariables average_boundary_voltages(const NetworkCase& net,
                                       const std::vector<RegionProblem>& problems,
                                       const std::vector<RegionState>& states);

struct ConvergenceCheck {
  bool converged = false;
  double max_primal_residue = 0.0;
  double mismatch_mva = 0.0;
};

ConvergenceCheck check_convergence(const NetworkCase& net, const AdmittanceMatrix& Y,
                                   const std::vector<RegionState>& states,
                                   const OpfVariables& merged, const AdmmOptions& opts);

AdmmResult run_admm(const NetworkCase& net, const Partition& partition,
                    const AdmmOptions& opts = {});

}  // namespace gridsplit
