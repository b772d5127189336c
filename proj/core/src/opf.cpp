#include "gridsplit/opf.hpp"

#include <cmath>

#include <Eigen/SparseLU>

#include "acopf_problem.hpp"

namespace gridsplit {

Eigen::VectorXcd power_flow_residual(const NetworkCase& net, const AdmittanceMatrix& Y,
                                     const OpfVariables& vars) {
  const int n = static_cast<int>(net.buses.size());
  Eigen::VectorXcd V(n);
  for (int i = 0; i < n; ++i) V[i] = vars.voltage(i);
  Eigen::VectorXcd inj = Y.Y * V;

  Eigen::VectorXcd r(n);
  for (int i = 0; i < n; ++i) {
    r[i] = -std::complex<double>(net.buses[i].p_load, net.buses[i].q_load) -
           V[i] * std::conj(inj[i]);
  }
  for (size_t g = 0; g < net.generators.size(); ++g) {
    const int b = net.bus_index(net.generators[g].bus);
    r[b] += std::complex<double>(vars.p(static_cast<int>(g)), vars.q(static_cast<int>(g)));
  }
  return r;
}

double objective(const NetworkCase& net, const OpfVariables& vars) {
  double cost = 0.0;
  for (size_t g = 0; g < net.generators.size(); ++g) {
    const double p_mw = vars.p(static_cast<int>(g)) * net.base_mva;
    const Generator& gen = net.generators[g];
    cost += gen.cost_a * p_mw * p_mw + gen.cost_b * p_mw + gen.cost_c;
  }
  return cost;
}

Dispatch Dispatch::from_case(const NetworkCase& net) {
  Dispatch d;
  const int ng = static_cast<int>(net.generators.size());
  d.p_gen.resize(ng);
  d.v_set.resize(ng);
  for (int g = 0; g < ng; ++g) {
    d.p_gen[g] = net.generators[g].p_setpoint;
    d.v_set[g] = net.generators[g].v_setpoint;
  }
  return d;
}

OpfVariables solve_power_flow(const NetworkCase& net, const AdmittanceMatrix& Y,
                              const Dispatch& dispatch, const OpfVariables& start,
                              const PowerFlowOptions& opts) {
  using cplx = std::complex<double>;
  const int n = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());
  const int slack = net.reference_index();

  auto gens_at = net.generators_by_bus();
  std::vector<int> pv, pq;
  for (int i = 0; i < n; ++i) {
    if (i == slack) continue;
    if (!gens_at[i].empty())
      pv.push_back(i);
    else
      pq.push_back(i);
  }
  const int npv = static_cast<int>(pv.size());
  const int npq = static_cast<int>(pq.size());

  Eigen::VectorXd vm(n), va(n);
  for (int i = 0; i < n; ++i) {
    vm[i] = std::abs(start.voltage(i));
    va[i] = std::arg(start.voltage(i));
    if (vm[i] <= 0) vm[i] = 1.0;
  }
  va[slack] = 0.0;
  for (int i : pv) vm[i] = dispatch.v_set[gens_at[i].front()];
  if (!gens_at[slack].empty()) vm[slack] = dispatch.v_set[gens_at[slack].front()];

  Eigen::VectorXd pspec = Eigen::VectorXd::Zero(n), qspec = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    pspec[i] = -net.buses[i].p_load;
    qspec[i] = -net.buses[i].q_load;
  }
  for (int g = 0; g < ng; ++g) pspec[net.bus_index(net.generators[g].bus)] += dispatch.p_gen[g];

  // unknown order: angles at pv+pq, magnitudes at pq
  std::vector<int> ang(pv);
  ang.insert(ang.end(), pq.begin(), pq.end());
  std::vector<int> col_of_ang(n, -1), col_of_vm(n, -1);
  for (size_t k = 0; k < ang.size(); ++k) col_of_ang[ang[k]] = static_cast<int>(k);
  for (int k = 0; k < npq; ++k) col_of_vm[pq[k]] = npv + npq + k;
  const int dim = npv + 2 * npq;

  Eigen::VectorXcd V(n), I(n);
  Eigen::VectorXd F(dim);
  auto eval = [&]() {
    for (int i = 0; i < n; ++i) V[i] = std::polar(vm[i], va[i]);
    I = Y.Y * V;
    for (size_t k = 0; k < ang.size(); ++k) {
      const int i = ang[k];
      const cplx S = V[i] * std::conj(I[i]);
      F[k] = S.real() - pspec[i];
      if (col_of_vm[i] >= 0) F[col_of_vm[i]] = S.imag() - qspec[i];
    }
  };

  eval();
  int it = 0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (; it < opts.max_iter; ++it) {
    if (dim == 0 || F.lpNorm<Eigen::Infinity>() <= opts.tol) break;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(8 * Y.Y.nonZeros());
    for (int j = 0; j < Y.Y.outerSize(); ++j) {
      for (Eigen::SparseMatrix<cplx>::InnerIterator itY(Y.Y, j); itY; ++itY) {
        const int i = static_cast<int>(itY.row());
        const int rp = col_of_ang[i] >= 0 ? col_of_ang[i] : -1;
        const int rq = col_of_vm[i];
        if (rp < 0 && rq < 0) continue;
        const cplx yv = itY.value() * V[j];
        cplx dS_dth, dS_dvm;
        if (i == j) {
          dS_dth = cplx(0, 1) * V[i] * std::conj(I[i]) - cplx(0, 1) * V[i] * std::conj(yv);
          dS_dvm = V[i] * std::conj(I[i]) / vm[i] + V[i] * std::conj(yv) / vm[i];
        } else {
          dS_dth = -cplx(0, 1) * V[i] * std::conj(yv);
          dS_dvm = V[i] * std::conj(yv) / vm[j];
        }
        const int ca = col_of_ang[j];
        const int cv = col_of_vm[j];
        if (ca >= 0) {
          if (rp >= 0) trips.emplace_back(rp, ca, dS_dth.real());
          if (rq >= 0) trips.emplace_back(rq, ca, dS_dth.imag());
        }
        if (cv >= 0) {
          if (rp >= 0) trips.emplace_back(rp, cv, dS_dvm.real());
          if (rq >= 0) trips.emplace_back(rq, cv, dS_dvm.imag());
        }
      }
    }
    Eigen::SparseMatrix<double> J(dim, dim);
    J.setFromTriplets(trips.begin(), trips.end());
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw PowerFlowError("power flow Jacobian is singular at iteration " +
                           std::to_string(it));
    Eigen::VectorXd dx = lu.solve(-F);
    for (size_t k = 0; k < ang.size(); ++k) va[ang[k]] += dx[k];
    for (int k = 0; k < npq; ++k) vm[pq[k]] += dx[npv + npq + k];
    eval();
  }
  if (dim > 0 && F.lpNorm<Eigen::Infinity>() > opts.tol)
    throw PowerFlowError("power flow did not converge in " +
                         std::to_string(opts.max_iter) + " iterations (mismatch " +
                         std::to_string(F.lpNorm<Eigen::Infinity>()) + " p.u.)");

  OpfVariables out(n, ng);
  for (int i = 0; i < n; ++i) {
    out.e(i) = V[i].real();
    out.f(i) = V[i].imag();
  }
  // back out generator outputs from the solved state
  for (int i = 0; i < n; ++i) {
    if (gens_at[i].empty()) continue;
    const cplx S = V[i] * std::conj(I[i]);
    const double q_total = S.imag() + net.buses[i].q_load;
    double p_extra = 0.0;
    if (i == slack) {
      double p_disp = 0.0;
      for (int g : gens_at[i]) p_disp += dispatch.p_gen[g];
      p_extra = (S.real() + net.buses[i].p_load - p_disp) /
                static_cast<double>(gens_at[i].size());
    }
    for (int g : gens_at[i]) {
      out.p(g) = dispatch.p_gen[g] + p_extra;
      out.q(g) = q_total / static_cast<double>(gens_at[i].size());
    }
  }
  return out;
}

namespace {

std::vector<int> resolve_limited(const NetworkCase& net, LineLimitMode mode,
                                 const std::vector<int>& limited) {
  std::vector<int> out;
  if (mode == LineLimitMode::None) return out;
  std::vector<bool> pick(net.branches.size(), mode == LineLimitMode::All);
  if (mode == LineLimitMode::Subset) {
    for (int idx : limited) {
      if (idx < 0 || idx >= static_cast<int>(net.branches.size()))
        throw ValidationError("limited branch index " + std::to_string(idx) +
                              " out of range");
      pick[idx] = true;
    }
  }
  for (size_t i = 0; i < net.branches.size(); ++i) {
    if (pick[i] && net.branches[i].s_max > 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

OpfSolution solve_centralized_opf(const NetworkCase& net, const OpfOptions& opts) {
  net.validate();
  const AdmittanceMatrix Y = build_admittance(net);
  detail::AcOpfProblem problem(net, Y, opts.line_limits, opts.limited_branches);
  if (opts.start) problem.set_initial_point(opts.start->v);

  NlpResult r = solve_nlp(problem, opts.nlp);

  const int n = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());
  OpfSolution sol;
  sol.vars = OpfVariables(n, ng);
  sol.vars.v = r.x;
  sol.objective = r.objective;
  sol.status = r.status;
  sol.kkt_error = r.kkt_error;
  sol.iterations = r.iterations;
  sol.mu_p.resize(n);
  sol.mu_q.resize(n);
  for (int i = 0; i < n; ++i) {
    sol.mu_p[i] = r.y_eq[2 * i];
    sol.mu_q[i] = r.y_eq[2 * i + 1];
  }
  sol.mu_ref = r.y_eq[2 * n];
  sol.nu_vband = r.y_ineq.head(n);
  sol.nu_flow = r.y_ineq.tail(r.y_ineq.size() - n);
  sol.z_lower = r.z_lower;
  sol.z_upper = r.z_upper;
  sol.line_limits = opts.line_limits;
  sol.limited_branches = resolve_limited(net, opts.line_limits, opts.limited_branches);
  return sol;
}

Eigen::VectorXd stationarity_residual(const NetworkCase& net, const AdmittanceMatrix& Y,
                                      const OpfVariables& vars,
                                      const OpfSolution& mults) {
  detail::AcOpfProblem problem(net, Y, mults.line_limits, mults.limited_branches);
  const int n = static_cast<int>(net.buses.size());
  const Eigen::VectorXd& x = vars.v;

  Eigen::VectorXd grad;
  problem.objective_gradient(x, grad);

  NlpProblem::Triplets jeq, jineq;
  problem.constraint_jacobian(x, jeq, jineq);

  Eigen::VectorXd y_eq(problem.num_eq());
  for (int i = 0; i < n; ++i) {
    y_eq[2 * i] = mults.mu_p[i];
    y_eq[2 * i + 1] = mults.mu_q[i];
  }
  y_eq[2 * n] = mults.mu_ref;
  Eigen::VectorXd y_ineq(problem.num_ineq());
  y_ineq.head(n) = mults.nu_vband;
  if (mults.nu_flow.size() > 0) y_ineq.tail(mults.nu_flow.size()) = mults.nu_flow;

  Eigen::VectorXd stat = grad;
  for (const auto& t : jeq) stat[t.col()] += t.value() * y_eq[t.row()];
  for (const auto& t : jineq) stat[t.col()] += t.value() * y_ineq[t.row()];
  if (mults.z_lower.size() == x.size()) stat -= mults.z_lower;
  if (mults.z_upper.size() == x.size()) stat += mults.z_upper;

  Eigen::VectorXd g, c;
  problem.constraints(x, g, c);
  Eigen::VectorXd out(stat.size() + g.size());
  out << stat, g;
  return out;
}

}  // namespace gridsplit
