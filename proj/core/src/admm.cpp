#include "gridsplit/admm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <set>

#include "acopf_problem.hpp"

namespace gridsplit {

void AdmmOptions::validate() const {
  if (!(gamma > 0 && gamma < 1))
    throw AdmmError("gamma must lie in (0,1), got " + std::to_string(gamma));
  if (!(tau > 1)) throw AdmmError("tau must exceed 1, got " + std::to_string(tau));
  if (!(beta_minus > beta_plus && beta_plus > 0))
    throw AdmmError("scaling factors must satisfy beta- > beta+ > 0");
  if (!(rho0 > 0)) throw AdmmError("rho0 must be positive");
  if (max_iterations < 1) throw AdmmError("max_iterations must be at least 1");
}

std::vector<RegionProblem> decompose(const NetworkCase& net, const AdmittanceMatrix& Y,
                                     const Partition& partition,
                                     const AdmmOptions& opts) {
  const int n = static_cast<int>(net.buses.size());
  if (static_cast<int>(partition.region_of.size()) != n)
    throw AdmmError("partition covers " + std::to_string(partition.region_of.size()) +
                    " buses for a " + std::to_string(n) + "-bus case");
  const int K = partition.num_regions;

  std::vector<RegionProblem> out(K);
  for (int k = 0; k < K; ++k) out[k].id = k;
  for (int i = 0; i < n; ++i) out[partition.region_of[i]].owned.push_back(i);

  // crossing bus pairs, deduplicated over parallel branches
  std::set<std::pair<int, int>> crossing;
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    if (partition.region_of[f] != partition.region_of[t]) {
      crossing.emplace(f, t);
      crossing.emplace(t, f);
    }
  }
  for (const auto& [i, j] : crossing) {
    const int k = partition.region_of[i];
    out[k].ties.push_back({i, j, partition.region_of[j]});
  }

  for (RegionProblem& rp : out) {
    std::sort(rp.ties.begin(), rp.ties.end(), [](const TieLine& a, const TieLine& b) {
      return std::tie(a.local_bus, a.remote_bus) < std::tie(b.local_bus, b.remote_bus);
    });
    std::set<int> dup;
    for (const TieLine& t : rp.ties) dup.insert(t.remote_bus);
    rp.buses = rp.owned;
    rp.buses.insert(rp.buses.end(), dup.begin(), dup.end());
    for (int b : rp.owned) rp.bus_sel.emplace_back(b, true);
    for (int b : dup) rp.bus_sel.emplace_back(b, false);

    auto gens_at = net.generators_by_bus();
    for (int b : rp.owned) {
      for (int g : gens_at[b]) rp.gens.push_back(g);
    }
    std::sort(rp.gens.begin(), rp.gens.end());

    // local column of a global bus
    std::map<int, int> local;
    for (size_t i = 0; i < rp.buses.size(); ++i) local[rp.buses[i]] = static_cast<int>(i);

    std::vector<Eigen::Triplet<double>> trips;
    const int nvars = 2 * rp.n_buses() + 2 * rp.n_gens();
    for (size_t t = 0; t < rp.ties.size(); ++t) {
      const int li = local[rp.ties[t].local_bus];
      const int lj = local[rp.ties[t].remote_bus];
      const int r = 4 * static_cast<int>(t);
      trips.emplace_back(r, 2 * li, opts.beta_minus);
      trips.emplace_back(r, 2 * lj, -opts.beta_minus);
      trips.emplace_back(r + 1, 2 * li + 1, opts.beta_minus);
      trips.emplace_back(r + 1, 2 * lj + 1, -opts.beta_minus);
      trips.emplace_back(r + 2, 2 * li, opts.beta_plus);
      trips.emplace_back(r + 2, 2 * lj, opts.beta_plus);
      trips.emplace_back(r + 3, 2 * li + 1, opts.beta_plus);
      trips.emplace_back(r + 3, 2 * lj + 1, opts.beta_plus);
    }
    rp.coupling.resize(4 * static_cast<int>(rp.ties.size()), nvars);
    rp.coupling.setFromTriplets(trips.begin(), trips.end());
  }
  return out;
}

void x_update(const NetworkCase& net, const AdmittanceMatrix& Y,
              const RegionProblem& rp, RegionState& st, const AdmmOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();

  detail::AcOpfProblem problem(net, Y, rp.bus_sel, opts.line_limits,
                               opts.limited_branches);
  detail::CouplingTerms coupling;
  coupling.A = rp.coupling;
  coupling.lambda = st.lambda;
  coupling.rho = st.rho;
  coupling.z = st.z;
  problem.set_coupling(std::move(coupling));
  problem.set_initial_point(st.x.v);

  NlpResult r = solve_nlp(problem, opts.nlp);
  if (r.status == NlpStatus::LinAlgFailure || r.status == NlpStatus::Infeasible)
    throw AdmmError("region " + std::to_string(rp.id) + " subproblem failed: " +
                    to_string(r.status) + " (" + r.message + ")");

  st.x.v = r.x;
  st.x.n_bus = rp.n_buses();
  st.x.n_gen = rp.n_gens();
  st.last_status = r.status;

  const int no = static_cast<int>(rp.owned.size());
  st.mu_p.resize(no);
  st.mu_q.resize(no);
  for (int t = 0; t < no; ++t) {
    st.mu_p[t] = r.y_eq[2 * t];
    st.mu_q[t] = r.y_eq[2 * t + 1];
  }
  st.mu_ref = problem.ref_row() >= 0 ? r.y_eq[problem.ref_row()] : 0.0;
  st.nu_vband = r.y_ineq.head(rp.n_buses());
  st.nu_flow = r.y_ineq.tail(r.y_ineq.size() - rp.n_buses());
  st.z_lower = r.z_lower;
  st.z_upper = r.z_upper;

  st.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Message make_message(const RegionProblem& rp, const RegionState& st) {
  Message m;
  m.sender = rp.id;
  const Eigen::VectorXd ax = rp.coupling * st.x.v;
  for (size_t t = 0; t < rp.ties.size(); ++t) {
    const int r = 4 * static_cast<int>(t);
    m.values[{rp.ties[t].local_bus, rp.ties[t].remote_bus}] = {ax[r], ax[r + 1],
                                                               ax[r + 2], ax[r + 3]};
  }
  return m;
}

void z_update(const RegionProblem& rp, RegionState& st, const Message& own,
              const std::vector<Message>& all_messages) {
  for (size_t t = 0; t < rp.ties.size(); ++t) {
    const TieLine& tie = rp.ties[t];
    const auto it_own = own.values.find({tie.local_bus, tie.remote_bus});
    if (it_own == own.values.end())
      throw AdmmError("region " + std::to_string(rp.id) +
                      ": own message misses a tie line");
    const Message& nb = all_messages.at(tie.neighbor);
    const auto it_nb = nb.values.find({tie.remote_bus, tie.local_bus});
    if (it_nb == nb.values.end())
      throw AdmmError("region " + std::to_string(rp.id) + ": neighbor " +
                      std::to_string(tie.neighbor) + " message misses tie (" +
                      std::to_string(tie.remote_bus) + "," +
                      std::to_string(tie.local_bus) + ")");
    const auto& mk = it_own->second;
    const auto& ml = it_nb->second;
    const int r = 4 * static_cast<int>(t);
    st.z[r] = 0.5 * (mk[0] - ml[0]);
    st.z[r + 1] = 0.5 * (mk[1] - ml[1]);
    st.z[r + 2] = 0.5 * (mk[2] + ml[2]);
    st.z[r + 3] = 0.5 * (mk[3] + ml[3]);
  }
}

void lambda_update(const RegionProblem& rp, RegionState& st) {
  if (rp.n_coupling_rows() == 0) return;
  const Eigen::VectorXd r = rp.coupling * st.x.v - st.z;
  st.lambda += st.rho.cwiseProduct(r);
}

double primal_residue(const RegionProblem& rp, const RegionState& st) {
  if (rp.n_coupling_rows() == 0) return 0.0;
  return (rp.coupling * st.x.v - st.z).lpNorm<Eigen::Infinity>();
}

void rho_update(const std::vector<RegionProblem>& problems,
                std::vector<RegionState>& states, const AdmmOptions& opts) {
  const int K = static_cast<int>(problems.size());
  std::vector<double> rho_tilde(K, 0.0);
  for (int k = 0; k < K; ++k) {
    if (states[k].rho.size() == 0) continue;
    const double rho_max = states[k].rho.lpNorm<Eigen::Infinity>();
    const bool improving = states[k].residue <= opts.gamma * states[k].prev_residue;
    rho_tilde[k] = improving ? rho_max : opts.tau * rho_max;
  }
  for (int k = 0; k < K; ++k) {
    for (size_t t = 0; t < problems[k].ties.size(); ++t) {
      const double v = std::max(rho_tilde[k], rho_tilde[problems[k].ties[t].neighbor]);
      for (int r = 0; r < 4; ++r) states[k].rho[4 * static_cast<int>(t) + r] = v;
    }
  }
}

OpfVariables average_boundary_voltages(const NetworkCase& net,
                                       const std::vector<RegionProblem>& problems,
                                       const std::vector<RegionState>& states) {
  const int n = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());
  OpfVariables merged(n, ng);
  std::vector<int> copies(n, 0);

  for (size_t k = 0; k < problems.size(); ++k) {
    const RegionProblem& rp = problems[k];
    const RegionState& st = states[k];
    for (int lb = 0; lb < rp.n_buses(); ++lb) {
      const int gb = rp.buses[lb];
      merged.e(gb) += st.x.e(lb);
      merged.f(gb) += st.x.f(lb);
      ++copies[gb];
    }
    for (size_t lg = 0; lg < rp.gens.size(); ++lg) {
      merged.p(rp.gens[lg]) = st.x.p(static_cast<int>(lg));
      merged.q(rp.gens[lg]) = st.x.q(static_cast<int>(lg));
    }
  }
  for (int i = 0; i < n; ++i) {
    merged.e(i) /= copies[i];
    merged.f(i) /= copies[i];
  }
  return merged;
}

ConvergenceCheck check_convergence(const NetworkCase& net, const AdmittanceMatrix& Y,
                                   const std::vector<RegionState>& states,
                                   const OpfVariables& merged,
                                   const AdmmOptions& opts) {
  ConvergenceCheck out;
  for (const RegionState& st : states)
    out.max_primal_residue = std::max(out.max_primal_residue, st.residue);

  const Eigen::VectorXcd r = power_flow_residual(net, Y, merged);
  double worst = 0.0;
  for (int i = 0; i < r.size(); ++i) worst = std::max(worst, std::abs(r[i]));
  out.mismatch_mva = worst * net.base_mva;

  out.converged = out.max_primal_residue < opts.eps_primal &&
                  out.mismatch_mva < opts.eps_mismatch_mva;
  return out;
}

AdmmResult run_admm(const NetworkCase& net, const Partition& partition,
                    const AdmmOptions& opts) {
  opts.validate();
  net.validate();
  const AdmittanceMatrix Y = build_admittance(net);
  const int n = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());

  std::vector<RegionProblem> problems = decompose(net, Y, partition, opts);
  const int K = static_cast<int>(problems.size());

  // ---- initial point --------------------------------------------------------
  OpfVariables global0 = OpfVariables::flat(n, ng);
  if (opts.start == AdmmOptions::Start::Warm) {
    global0 = solve_power_flow(net, Y, Dispatch::from_case(net), global0);
  } else {
    for (int g = 0; g < ng; ++g) {
      global0.p(g) = 0.5 * (net.generators[g].p_min + net.generators[g].p_max);
      global0.q(g) = 0.5 * (net.generators[g].q_min + net.generators[g].q_max);
    }
  }

  std::vector<RegionState> states(K);
  for (int k = 0; k < K; ++k) {
    RegionState& st = states[k];
    const RegionProblem& rp = problems[k];
    st.x = OpfVariables(rp.n_buses(), rp.n_gens());
    for (int lb = 0; lb < rp.n_buses(); ++lb) {
      st.x.e(lb) = global0.e(rp.buses[lb]);
      st.x.f(lb) = global0.f(rp.buses[lb]);
    }
    for (size_t lg = 0; lg < rp.gens.size(); ++lg) {
      st.x.p(static_cast<int>(lg)) = global0.p(rp.gens[lg]);
      st.x.q(static_cast<int>(lg)) = global0.q(rp.gens[lg]);
    }
    const int rows = rp.n_coupling_rows();
    st.z = Eigen::VectorXd::Zero(rows);
    st.lambda = Eigen::VectorXd::Zero(rows);
    st.rho = Eigen::VectorXd::Constant(rows, opts.rho0);
    st.residue = std::numeric_limits<double>::infinity();
    st.prev_residue = std::numeric_limits<double>::infinity();
  }
  {
    // the auxiliary variables start at the consensus of the initial point
    std::vector<Message> msgs(K);
    for (int k = 0; k < K; ++k) msgs[k] = make_message(problems[k], states[k]);
    for (int k = 0; k < K; ++k) z_update(problems[k], states[k], msgs[k], msgs);
  }

  AdmmResult result;
  int iter = 0;
  for (iter = 1; iter <= opts.max_iterations; ++iter) {
    // x-updates are independent within the round
    if (opts.parallel && K > 1) {
      std::vector<std::future<void>> jobs;
      jobs.reserve(K);
      for (int k = 0; k < K; ++k) {
        jobs.push_back(std::async(std::launch::async, [&, k] {
          x_update(net, Y, problems[k], states[k], opts);
        }));
      }
      for (auto& j : jobs) j.get();
    } else {
      for (int k = 0; k < K; ++k) x_update(net, Y, problems[k], states[k], opts);
    }
    for (const RegionState& st : states) {
      if (st.last_status == NlpStatus::IterationLimit)
        ++result.subproblem_iteration_limits;
    }

    std::vector<Message> msgs(K);
    for (int k = 0; k < K; ++k) msgs[k] = make_message(problems[k], states[k]);
    for (int k = 0; k < K; ++k) {
      z_update(problems[k], states[k], msgs[k], msgs);
      lambda_update(problems[k], states[k]);
      states[k].prev_residue = states[k].residue;
      states[k].residue = primal_residue(problems[k], states[k]);
    }

    OpfVariables merged = average_boundary_voltages(net, problems, states);
    const ConvergenceCheck cc = check_convergence(net, Y, states, merged, opts);

    AdmmIterationRecord rec;
    rec.iteration = iter;
    rec.max_primal_residue = cc.max_primal_residue;
    rec.max_mismatch_mva = cc.mismatch_mva;
    rec.objective = objective(net, merged);
    for (const RegionState& st : states)
      rec.est_parallel_time_s = std::max(rec.est_parallel_time_s, st.solve_seconds);
    for (const RegionState& st : states) {
      if (st.rho.size() > 0)
        rec.max_rho = std::max(rec.max_rho, st.rho.lpNorm<Eigen::Infinity>());
    }
    result.trace.rows.push_back(rec);
    result.est_parallel_time_s += rec.est_parallel_time_s;
    result.merged = merged;
    result.objective = rec.objective;

    if (cc.converged) {
      result.converged = true;
      break;
    }
    rho_update(problems, states, opts);
  }

  result.iterations = std::min(iter, opts.max_iterations);
  result.states = states;
  return result;
}

}  // namespace gridsplit
