#include <cmath>

#include "acopf_problem.hpp"
#include "gridsplit/opf.hpp"

namespace gridsplit {

namespace {
constexpr double kActiveTol = 1e-6;
}

KktJacobian kkt_jacobian(const NetworkCase& net, const OpfSolution& sol) {
  if (sol.status != NlpStatus::Optimal)
    throw ValidationError("kkt_jacobian requires an optimal solution");

  const AdmittanceMatrix Y = build_admittance(net);
  detail::AcOpfProblem problem(net, Y, sol.line_limits, sol.limited_branches);
  const int n = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());
  const int nv = problem.num_vars();
  const Eigen::VectorXd& x = sol.vars.v;

  Eigen::VectorXd g, c, lb, ub, clo, cup;
  problem.constraints(x, g, c);
  problem.variable_bounds(lb, ub);
  problem.ineq_bounds(clo, cup);

  // --- pick the rows of F: equalities plus active inequalities/bounds -------
  KktJacobian out;
  std::vector<double> y_rows;
  Eigen::VectorXd y_ineq_active = Eigen::VectorXd::Zero(problem.num_ineq());

  auto bus_of_var = [&](int col) {
    if (col < 2 * n) return col / 2;
    const int gidx = (col - 2 * n) / 2;
    return net.bus_index(net.generators[gidx].bus);
  };

  for (int i = 0; i < n; ++i) {
    out.rows.push_back({KktRow::Kind::BalanceP, i, 0.0});
    y_rows.push_back(sol.mu_p[i]);
    out.rows.push_back({KktRow::Kind::BalanceQ, i, 0.0});
    y_rows.push_back(sol.mu_q[i]);
  }
  out.rows.push_back({KktRow::Kind::Ref, net.reference_index(), 0.0});
  y_rows.push_back(sol.mu_ref);

  for (int i = 0; i < problem.num_ineq(); ++i) {
    const bool at_lower = std::isfinite(clo[i]) && c[i] - clo[i] <= kActiveTol;
    const bool at_upper = std::isfinite(cup[i]) && cup[i] - c[i] <= kActiveTol;
    if (!at_lower && !at_upper) continue;
    const double rhs = at_upper ? cup[i] : clo[i];
    const double mult = i < n ? sol.nu_vband[i] : sol.nu_flow[i - n];
    out.rows.push_back({i < n ? KktRow::Kind::VBand : KktRow::Kind::Flow, i, rhs});
    y_rows.push_back(mult);
    y_ineq_active[i] = mult;
  }

  for (int j = 0; j < nv; ++j) {
    if (std::isfinite(lb[j]) && x[j] - lb[j] <= kActiveTol) {
      out.rows.push_back({KktRow::Kind::BoundLower, j, lb[j]});
      y_rows.push_back(sol.z_lower.size() == nv ? -sol.z_lower[j] : 0.0);
    } else if (std::isfinite(ub[j]) && ub[j] - x[j] <= kActiveTol) {
      out.rows.push_back({KktRow::Kind::BoundUpper, j, ub[j]});
      y_rows.push_back(sol.z_upper.size() == nv ? sol.z_upper[j] : 0.0);
    }
  }

  const int nrows = static_cast<int>(out.rows.size());
  const int dim = nv + nrows;
  out.n_primal = nv;

  // --- W = Hessian of the Lagrangian over the selected rows -----------------
  Eigen::VectorXd y_eq(problem.num_eq());
  for (int i = 0; i < n; ++i) {
    y_eq[2 * i] = sol.mu_p[i];
    y_eq[2 * i + 1] = sol.mu_q[i];
  }
  y_eq[2 * n] = sol.mu_ref;

  NlpProblem::Triplets w_trips, jeq, jineq;
  problem.lagrangian_hessian(x, 1.0, y_eq, y_ineq_active, w_trips);
  problem.constraint_jacobian(x, jeq, jineq);

  std::vector<Eigen::Triplet<double>> trips(w_trips.begin(), w_trips.end());

  // jacobian rows of F, mirrored into the symmetric H
  auto add_row = [&](int row, int col, double v) {
    trips.emplace_back(nv + row, col, v);
    trips.emplace_back(col, nv + row, v);
  };
  // equality rows occupy the first 2n+1 slots in the same order as jeq rows
  for (const auto& t : jeq) add_row(t.row(), t.col(), t.value());

  std::vector<int> row_of_ineq(problem.num_ineq(), -1);
  for (int r = 0; r < nrows; ++r) {
    const KktRow& kr = out.rows[r];
    if (kr.kind == KktRow::Kind::VBand || kr.kind == KktRow::Kind::Flow)
      row_of_ineq[kr.index] = r;
    if (kr.kind == KktRow::Kind::BoundLower || kr.kind == KktRow::Kind::BoundUpper)
      add_row(r, kr.index, 1.0);
  }
  for (const auto& t : jineq) {
    if (row_of_ineq[t.row()] >= 0) add_row(row_of_ineq[t.row()], t.col(), t.value());
  }

  out.H.resize(dim, dim);
  out.H.setFromTriplets(trips.begin(), trips.end());

  // --- S_i maps: every index of y belongs to exactly one bus ----------------
  out.bus_of.assign(dim, 0);
  for (int j = 0; j < nv; ++j) out.bus_of[j] = bus_of_var(j);
  for (int r = 0; r < nrows; ++r) {
    const KktRow& kr = out.rows[r];
    int bus = 0;
    switch (kr.kind) {
      case KktRow::Kind::BalanceP:
      case KktRow::Kind::BalanceQ:
      case KktRow::Kind::Ref:
        bus = kr.index;
        break;
      case KktRow::Kind::VBand:
        bus = kr.index;  // voltage rows are bus-ordered
        break;
      case KktRow::Kind::Flow:
        bus = problem.flow_limits()[kr.index - n].own;
        break;
      case KktRow::Kind::BoundLower:
      case KktRow::Kind::BoundUpper:
        bus = bus_of_var(kr.index);
        break;
    }
    out.bus_of[nv + r] = bus;
  }
  out.bus_indices.assign(n, {});
  for (int j = 0; j < dim; ++j) out.bus_indices[out.bus_of[j]].push_back(j);

  out.y0.resize(dim);
  out.y0.head(nv) = x;
  for (int r = 0; r < nrows; ++r) out.y0[nv + r] = y_rows[r];

  (void)ng;
  return out;
}

}  // namespace gridsplit
