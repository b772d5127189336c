#include "acopf_problem.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

namespace gridsplit::detail {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Quantities of one limited branch end: the apparent power leaving the "own"
// bus is S = V_own * conj(y_own V_own + y_other V_other).
struct FlowEval {
  double p, q;
  // gradients over (e_own, f_own, e_other, f_other)
  double dp[4], dq[4];
};

FlowEval eval_flow(const AcOpfProblem::FlowLimit& fl, double e1, double f1, double e2,
                   double f2) {
  const double g1 = fl.y_own.real(), b1 = fl.y_own.imag();
  const double g2 = fl.y_other.real(), b2 = fl.y_other.imag();
  const double cr = g1 * e1 - b1 * f1 + g2 * e2 - b2 * f2;
  const double ci = g1 * f1 + b1 * e1 + g2 * f2 + b2 * e2;
  FlowEval out;
  out.p = e1 * cr + f1 * ci;
  out.q = f1 * cr - e1 * ci;
  out.dp[0] = cr + e1 * g1 + f1 * b1;
  out.dp[1] = -e1 * b1 + ci + f1 * g1;
  out.dp[2] = e1 * g2 + f1 * b2;
  out.dp[3] = -e1 * b2 + f1 * g2;
  out.dq[0] = f1 * g1 - ci - e1 * b1;
  out.dq[1] = cr - f1 * b1 - e1 * g1;
  out.dq[2] = f1 * g2 - e1 * b2;
  out.dq[3] = -f1 * b2 - e1 * g2;
  return out;
}

}  // namespace

AcOpfProblem::AcOpfProblem(const NetworkCase& net, const AdmittanceMatrix& Y,
                           LineLimitMode mode, const std::vector<int>& limited) {
  std::vector<std::pair<int, bool>> all;
  all.reserve(net.buses.size());
  for (size_t i = 0; i < net.buses.size(); ++i) all.emplace_back(static_cast<int>(i), true);
  init(net, Y, all, mode, limited);
}

AcOpfProblem::AcOpfProblem(const NetworkCase& net, const AdmittanceMatrix& Y,
                           const std::vector<std::pair<int, bool>>& bus_sel,
                           LineLimitMode mode, const std::vector<int>& limited) {
  init(net, Y, bus_sel, mode, limited);
}

void AcOpfProblem::init(const NetworkCase& net, const AdmittanceMatrix& Y,
                        const std::vector<std::pair<int, bool>>& bus_sel,
                        LineLimitMode mode, const std::vector<int>& limited) {
  base_mva_ = net.base_mva;
  const int nb_global = static_cast<int>(net.buses.size());
  std::vector<int> local_of(nb_global, -1);

  for (const auto& [g, owned] : bus_sel) {
    const Bus& b = net.buses[g];
    LocalBus lb;
    lb.global = g;
    lb.owned = owned;
    lb.p_load = b.p_load;
    lb.q_load = b.q_load;
    lb.vmin2 = b.v_min * b.v_min;
    lb.vmax2 = b.v_max * b.v_max;
    local_of[g] = static_cast<int>(buses_.size());
    buses_.push_back(lb);
  }
  for (size_t i = 0; i < buses_.size(); ++i) {
    if (buses_[i].owned) owned_pos_.push_back(static_cast<int>(i));
  }
  n_owned_ = static_cast<int>(owned_pos_.size());

  gens_at_.resize(buses_.size());
  for (size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    const int gb = net.bus_index(gen.bus);
    const int lb = local_of[gb];
    if (lb < 0 || !buses_[lb].owned) continue;
    LocalGen lg;
    lg.global = static_cast<int>(g);
    lg.bus = lb;
    lg.p_min = gen.p_min;
    lg.p_max = gen.p_max;
    lg.q_min = gen.q_min;
    lg.q_max = gen.q_max;
    lg.cost_a = gen.cost_a;
    lg.cost_b = gen.cost_b;
    lg.cost_c = gen.cost_c;
    gens_at_[lb].push_back(static_cast<int>(gens_.size()));
    gens_.push_back(lg);
  }

  // admittance rows of owned buses, rebuilt from the branch flow records so
  // that only local columns appear
  yrows_.resize(buses_.size());
  {
    std::vector<std::unordered_map<int, std::complex<double>>> rows(buses_.size());
    for (const BranchFlow& bf : Y.flows) {
      const int lf = local_of[bf.from];
      const int lt = local_of[bf.to];
      if (lf >= 0 && buses_[lf].owned) {
        rows[lf][lf] += bf.y_ff;
        if (lt >= 0) rows[lf][lt] += bf.y_ft;
      }
      if (lt >= 0 && buses_[lt].owned) {
        rows[lt][lt] += bf.y_tt;
        if (lf >= 0) rows[lt][lf] += bf.y_tf;
      }
    }
    for (int pos : owned_pos_) {
      const Bus& b = net.buses[buses_[pos].global];
      rows[pos][pos] += std::complex<double>(b.shunt_g, b.shunt_b);
      auto& out = yrows_[pos];
      out.reserve(rows[pos].size());
      for (const auto& [col, y] : rows[pos]) {
        out.push_back({col, y.real(), y.imag()});
      }
      std::sort(out.begin(), out.end(),
                [](const YEntry& a, const YEntry& b) { return a.col_bus < b.col_bus; });
    }
  }

  // line limits: ends incident to an owned bus, both endpoints local
  if (mode != LineLimitMode::None) {
    std::vector<bool> pick(net.branches.size(), mode == LineLimitMode::All);
    if (mode == LineLimitMode::Subset) {
      for (int idx : limited) {
        if (idx < 0 || idx >= static_cast<int>(net.branches.size()))
          throw ValidationError("limited branch index " + std::to_string(idx) +
                                " out of range");
        pick[idx] = true;
      }
    }
    for (size_t bi = 0; bi < net.branches.size(); ++bi) {
      if (!pick[bi] || net.branches[bi].s_max <= 0) continue;
      const BranchFlow& bf = Y.flows[bi];
      const int lf = local_of[bf.from];
      const int lt = local_of[bf.to];
      if (lf < 0 || lt < 0) continue;
      const bool f_owned = buses_[lf].owned;
      const bool t_owned = buses_[lt].owned;
      if (!f_owned && !t_owned) continue;
      const double s2 = net.branches[bi].s_max * net.branches[bi].s_max;
      limits_.push_back({lf, lt, bf.y_ff, bf.y_ft, s2});
      limits_.push_back({lt, lf, bf.y_tt, bf.y_tf, s2});
    }
  }

  // the reference row belongs to the problem owning the reference bus
  const int ref_global = net.reference_index();
  if (local_of[ref_global] >= 0 && buses_[local_of[ref_global]].owned) {
    fix_reference_ = true;
    ref_local_ = local_of[ref_global];
  }
}

void AcOpfProblem::set_coupling(CouplingTerms coupling) {
  coupling_ = std::move(coupling);
  if (!coupling_.empty()) {
    AtRA_ = coupling_.A.transpose() * coupling_.rho.asDiagonal() * coupling_.A;
  }
}

double AcOpfProblem::objective(const Vec& x) const {
  double cost = 0.0;
  for (size_t g = 0; g < gens_.size(); ++g) {
    const double p_mw = x[p_col(static_cast<int>(g))] * base_mva_;
    cost += gens_[g].cost_a * p_mw * p_mw + gens_[g].cost_b * p_mw + gens_[g].cost_c;
  }
  if (!coupling_.empty()) {
    Eigen::VectorXd r = coupling_.A * x - coupling_.z;
    cost += coupling_.lambda.dot(r) + 0.5 * r.dot(coupling_.rho.asDiagonal() * r);
  }
  return cost;
}

void AcOpfProblem::objective_gradient(const Vec& x, Vec& grad) const {
  grad = Vec::Zero(num_vars());
  for (size_t g = 0; g < gens_.size(); ++g) {
    const int col = p_col(static_cast<int>(g));
    grad[col] = (2.0 * gens_[g].cost_a * x[col] * base_mva_ + gens_[g].cost_b) * base_mva_;
  }
  if (!coupling_.empty()) {
    Eigen::VectorXd r = coupling_.A * x - coupling_.z;
    grad += coupling_.A.transpose() *
            (coupling_.lambda + coupling_.rho.asDiagonal() * r).eval();
  }
}

void AcOpfProblem::constraints(const Vec& x, Vec& g, Vec& c) const {
  g.resize(num_eq());
  c.resize(num_ineq());

  for (int t = 0; t < n_owned_; ++t) {
    const int pos = owned_pos_[t];
    const LocalBus& lb = buses_[pos];
    double ar = 0.0, ai = 0.0;  // current injection sum_j Y_ij V_j
    for (const YEntry& ye : yrows_[pos]) {
      const double ej = x[e_col(ye.col_bus)], fj = x[f_col(ye.col_bus)];
      ar += ye.g * ej - ye.b * fj;
      ai += ye.g * fj + ye.b * ej;
    }
    const double ei = x[e_col(pos)], fi = x[f_col(pos)];
    const double p_inj = ei * ar + fi * ai;
    const double q_inj = fi * ar - ei * ai;
    double pg = 0.0, qg = 0.0;
    for (int lg : gens_at_[pos]) {
      pg += x[p_col(lg)];
      qg += x[q_col(lg)];
    }
    g[2 * t] = pg - lb.p_load - p_inj;
    g[2 * t + 1] = qg - lb.q_load - q_inj;
  }
  if (fix_reference_) g[2 * n_owned_] = x[f_col(ref_local_)];

  for (int i = 0; i < n_local_buses(); ++i) {
    c[i] = x[e_col(i)] * x[e_col(i)] + x[f_col(i)] * x[f_col(i)];
  }
  for (size_t l = 0; l < limits_.size(); ++l) {
    const FlowLimit& fl = limits_[l];
    const FlowEval fe = eval_flow(fl, x[e_col(fl.own)], x[f_col(fl.own)],
                                  x[e_col(fl.other)], x[f_col(fl.other)]);
    c[n_local_buses() + static_cast<int>(l)] = fe.p * fe.p + fe.q * fe.q;
  }
}

void AcOpfProblem::constraint_jacobian(const Vec& x, Triplets& jac_eq,
                                       Triplets& jac_ineq) const {
  jac_eq.clear();
  jac_ineq.clear();

  for (int t = 0; t < n_owned_; ++t) {
    const int pos = owned_pos_[t];
    const double ei = x[e_col(pos)], fi = x[f_col(pos)];
    double ar = 0.0, ai = 0.0;
    for (const YEntry& ye : yrows_[pos]) {
      const double ej = x[e_col(ye.col_bus)], fj = x[f_col(ye.col_bus)];
      ar += ye.g * ej - ye.b * fj;
      ai += ye.g * fj + ye.b * ej;
    }
    const int rp = 2 * t, rq = 2 * t + 1;
    for (const YEntry& ye : yrows_[pos]) {
      const int j = ye.col_bus;
      // derivatives of the injection S_i = V_i conj(sum Y_ij V_j)
      double dp_de = ei * ye.g + fi * ye.b;
      double dp_df = -ei * ye.b + fi * ye.g;
      double dq_de = fi * ye.g - ei * ye.b;
      double dq_df = -fi * ye.b - ei * ye.g;
      if (j == pos) {
        dp_de += ar;
        dp_df += ai;
        dq_de += -ai;
        dq_df += ar;
      }
      jac_eq.emplace_back(rp, e_col(j), -dp_de);
      jac_eq.emplace_back(rp, f_col(j), -dp_df);
      jac_eq.emplace_back(rq, e_col(j), -dq_de);
      jac_eq.emplace_back(rq, f_col(j), -dq_df);
    }
    for (int lg : gens_at_[pos]) {
      jac_eq.emplace_back(rp, p_col(lg), 1.0);
      jac_eq.emplace_back(rq, q_col(lg), 1.0);
    }
  }
  if (fix_reference_) jac_eq.emplace_back(2 * n_owned_, f_col(ref_local_), 1.0);

  for (int i = 0; i < n_local_buses(); ++i) {
    jac_ineq.emplace_back(i, e_col(i), 2.0 * x[e_col(i)]);
    jac_ineq.emplace_back(i, f_col(i), 2.0 * x[f_col(i)]);
  }
  for (size_t l = 0; l < limits_.size(); ++l) {
    const FlowLimit& fl = limits_[l];
    const int row = n_local_buses() + static_cast<int>(l);
    const FlowEval fe = eval_flow(fl, x[e_col(fl.own)], x[f_col(fl.own)],
                                  x[e_col(fl.other)], x[f_col(fl.other)]);
    const int cols[4] = {e_col(fl.own), f_col(fl.own), e_col(fl.other), f_col(fl.other)};
    for (int k = 0; k < 4; ++k) {
      jac_ineq.emplace_back(row, cols[k], 2.0 * fe.p * fe.dp[k] + 2.0 * fe.q * fe.dq[k]);
    }
  }
}

void AcOpfProblem::lagrangian_hessian(const Vec& x, double w, const Vec& y_eq,
                                      const Vec& y_ineq, Triplets& hess) const {
  hess.clear();

  // objective curvature: quadratic generation cost
  for (size_t g = 0; g < gens_.size(); ++g) {
    const int col = p_col(static_cast<int>(g));
    const double d = w * 2.0 * gens_[g].cost_a * base_mva_ * base_mva_;
    if (d != 0.0) hess.emplace_back(col, col, d);
  }
  if (!coupling_.empty()) {
    for (int k = 0; k < AtRA_.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(AtRA_, k); it; ++it) {
        hess.emplace_back(it.row(), it.col(), w * it.value());
      }
    }
  }

  // power balance rows: the injections are quadratic forms with constant
  // Hessians built from the Y entries
  for (int t = 0; t < n_owned_; ++t) {
    const int pos = owned_pos_[t];
    const double yp = y_eq.size() > 0 ? y_eq[2 * t] : 0.0;
    const double yq = y_eq.size() > 0 ? y_eq[2 * t + 1] : 0.0;
    if (yp == 0.0 && yq == 0.0) continue;
    for (const YEntry& ye : yrows_[pos]) {
      const int j = ye.col_bus;
      // constraint rows carry -P_inj and -Q_inj
      const double cg = -ye.g, cb = -ye.b;
      if (j == pos) {
        // P: G(e^2 + f^2); Q: -B(e^2 + f^2)
        const double dp = 2.0 * cg * yp;
        const double dq = -2.0 * cb * yq;
        hess.emplace_back(e_col(pos), e_col(pos), dp + dq);
        hess.emplace_back(f_col(pos), f_col(pos), dp + dq);
      } else {
        // P: G(e_i e_j + f_i f_j) + B(f_i e_j - e_i f_j)
        auto sym = [&](int r, int c, double v) {
          if (v == 0.0) return;
          hess.emplace_back(r, c, v);
          hess.emplace_back(c, r, v);
        };
        sym(e_col(pos), e_col(j), cg * yp);
        sym(f_col(pos), f_col(j), cg * yp);
        sym(f_col(pos), e_col(j), cb * yp);
        sym(e_col(pos), f_col(j), -cb * yp);
        // Q: G(f_i e_j - e_i f_j) - B(e_i e_j + f_i f_j)
        sym(f_col(pos), e_col(j), cg * yq);
        sym(e_col(pos), f_col(j), -cg * yq);
        sym(e_col(pos), e_col(j), -cb * yq);
        sym(f_col(pos), f_col(j), -cb * yq);
      }
    }
  }

  // voltage band rows: 2 I on (e_i, f_i)
  for (int i = 0; i < n_local_buses() && y_ineq.size() > 0; ++i) {
    const double yi = y_ineq[i];
    if (yi == 0.0) continue;
    hess.emplace_back(e_col(i), e_col(i), 2.0 * yi);
    hess.emplace_back(f_col(i), f_col(i), 2.0 * yi);
  }

  // line-limit rows: |S|^2 = P^2 + Q^2 with quadratic P, Q
  for (size_t l = 0; l < limits_.size() && y_ineq.size() > 0; ++l) {
    const double yl = y_ineq[n_local_buses() + static_cast<int>(l)];
    if (yl == 0.0) continue;
    const FlowLimit& fl = limits_[l];
    const double e1 = x[e_col(fl.own)], f1 = x[f_col(fl.own)];
    const double e2 = x[e_col(fl.other)], f2 = x[f_col(fl.other)];
    const FlowEval fe = eval_flow(fl, e1, f1, e2, f2);
    const int cols[4] = {e_col(fl.own), f_col(fl.own), e_col(fl.other), f_col(fl.other)};
    const double g1 = fl.y_own.real(), b1 = fl.y_own.imag();
    const double g2 = fl.y_other.real(), b2 = fl.y_other.imag();
    // constant Hessians of P and Q over (e1,f1,e2,f2)
    double HP[4][4] = {{2 * g1, 0, g2, -b2},
                       {0, 2 * g1, b2, g2},
                       {g2, b2, 0, 0},
                       {-b2, g2, 0, 0}};
    double HQ[4][4] = {{-2 * b1, 0, -b2, -g2},
                       {0, -2 * b1, g2, -b2},
                       {-b2, g2, 0, 0},
                       {-g2, -b2, 0, 0}};
    for (int r = 0; r < 4; ++r) {
      for (int cidx = 0; cidx < 4; ++cidx) {
        const double v =
            2.0 * (fe.dp[r] * fe.dp[cidx] + fe.p * HP[r][cidx] + fe.dq[r] * fe.dq[cidx] +
                   fe.q * HQ[r][cidx]);
        if (v != 0.0) hess.emplace_back(cols[r], cols[cidx], yl * v);
      }
    }
  }
}

void AcOpfProblem::variable_bounds(Vec& lb, Vec& ub) const {
  lb = Vec::Constant(num_vars(), -kInf);
  ub = Vec::Constant(num_vars(), kInf);
  for (size_t g = 0; g < gens_.size(); ++g) {
    const int lg = static_cast<int>(g);
    lb[p_col(lg)] = gens_[g].p_min;
    ub[p_col(lg)] = gens_[g].p_max;
    lb[q_col(lg)] = gens_[g].q_min;
    ub[q_col(lg)] = gens_[g].q_max;
  }
}

void AcOpfProblem::ineq_bounds(Vec& lo, Vec& up) const {
  lo.resize(num_ineq());
  up.resize(num_ineq());
  for (int i = 0; i < n_local_buses(); ++i) {
    lo[i] = buses_[i].vmin2;
    up[i] = buses_[i].vmax2;
  }
  for (size_t l = 0; l < limits_.size(); ++l) {
    lo[n_local_buses() + static_cast<int>(l)] = -kInf;
    up[n_local_buses() + static_cast<int>(l)] = limits_[l].smax2;
  }
}

AcOpfProblem::Vec AcOpfProblem::initial_point() const {
  if (start_) return *start_;
  Vec x = Vec::Zero(num_vars());
  for (int i = 0; i < n_local_buses(); ++i) x[e_col(i)] = 1.0;
  for (size_t g = 0; g < gens_.size(); ++g) {
    const int lg = static_cast<int>(g);
    x[p_col(lg)] = 0.5 * (gens_[g].p_min + gens_[g].p_max);
    x[q_col(lg)] = 0.5 * (gens_[g].q_min + gens_[g].q_max);
  }
  return x;
}

}  // namespace gridsplit::detail
