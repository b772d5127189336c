#include "gridsplit/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/SparseCholesky>

namespace gridsplit {

void NlpProblem::ineq_bounds(Vec& lo, Vec& up) const {
  lo.resize(0);
  up.resize(0);
}

std::string to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::Optimal: return "optimal";
    case NlpStatus::IterationLimit: return "iteration-limit";
    case NlpStatus::Infeasible: return "infeasible";
    case NlpStatus::LinAlgFailure: return "linear-algebra-failure";
  }
  return "unknown";
}

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// The solver works on the slack reformulation
//   min f(x)  s.t.  g(x) = 0,  c(x) - s = 0,  LB <= (x,s) <= UB
// with a log barrier on the finite bounds of the composite vector X = (x,s).
struct Workspace {
  const NlpProblem& p;
  int nx, ns, nX, neq, nc;
  Vec lb, ub;          // composite bounds
  double obj_scale = 1.0;

  Vec X, y, zL, zU;    // iterate
  Vec g, c;            // raw constraint values at current x
  Vec grad;            // scaled objective gradient (x part)
  Vec resid;           // C(X) = (g; c - s)

  explicit Workspace(const NlpProblem& prob) : p(prob) {
    nx = p.num_vars();
    ns = p.num_ineq();
    nX = nx + ns;
    neq = p.num_eq();
    nc = neq + ns;

    Vec xlb, xub, clo, cup;
    p.variable_bounds(xlb, xub);
    p.ineq_bounds(clo, cup);
    lb.resize(nX);
    ub.resize(nX);
    lb.head(nx) = xlb;
    ub.head(nx) = xub;
    if (ns > 0) {
      lb.tail(ns) = clo;
      ub.tail(ns) = cup;
    }
  }

  bool hasL(int j) const { return std::isfinite(lb[j]); }
  bool hasU(int j) const { return std::isfinite(ub[j]); }

  void eval_constraints() {
    p.constraints(X.head(nx), g, c);
    resid.resize(nc);
    resid.head(neq) = g;
    if (ns > 0) resid.tail(ns) = c - X.tail(ns);
  }

  void eval_gradient() {
    p.objective_gradient(X.head(nx), grad);
    grad *= obj_scale;
  }

  double theta() const { return nc == 0 ? 0.0 : resid.lpNorm<1>(); }
};

double barrier_value(const Workspace& w, double mu, const Vec& X) {
  if (mu == 0.0) return 0.0;
  double b = 0.0;
  for (int j = 0; j < w.nX; ++j) {
    if (w.hasL(j)) b -= std::log(X[j] - w.lb[j]);
    if (w.hasU(j)) b -= std::log(w.ub[j] - X[j]);
  }
  return mu * b;
}

// merit of a trial composite point at fixed (mu, penalty)
double merit_at(Workspace& w, const Vec& Xtrial, double mu, double penalty, Vec& gbuf,
                Vec& cbuf) {
  double f = w.obj_scale * w.p.objective(Xtrial.head(w.nx));
  w.p.constraints(Xtrial.head(w.nx), gbuf, cbuf);
  double th = gbuf.lpNorm<1>();
  for (int i = 0; i < w.ns; ++i) th += std::abs(cbuf[i] - Xtrial[w.nx + i]);
  return f + barrier_value(w, mu, Xtrial) + penalty * th;
}

}  // namespace

NlpResult solve_nlp(const NlpProblem& problem, const NlpOptions& opts) {
  Workspace w(problem);
  NlpResult res;

  // ---- initial point: project strictly inside the bounds -------------------
  Vec x0 = problem.initial_point();
  w.X.resize(w.nX);
  w.X.head(w.nx) = x0;
  {
    Vec gtmp, ctmp;
    problem.constraints(x0, gtmp, ctmp);
    if (w.ns > 0) w.X.tail(w.ns) = ctmp;
  }
  for (int j = 0; j < w.nX; ++j) {
    if (w.hasL(j) && w.hasU(j)) {
      const double push =
          std::min(1e-2 * std::max({1.0, std::abs(w.lb[j]), std::abs(w.ub[j])}),
                   0.3 * (w.ub[j] - w.lb[j]));
      w.X[j] = std::clamp(w.X[j], w.lb[j] + push, w.ub[j] - push);
    } else if (w.hasL(j)) {
      w.X[j] = std::max(w.X[j], w.lb[j] + 1e-2 * std::max(1.0, std::abs(w.lb[j])));
    } else if (w.hasU(j)) {
      w.X[j] = std::min(w.X[j], w.ub[j] - 1e-2 * std::max(1.0, std::abs(w.ub[j])));
    }
  }

  w.y = Vec::Zero(w.nc);
  w.zL = Vec::Zero(w.nX);
  w.zU = Vec::Zero(w.nX);
  int n_bound = 0;
  for (int j = 0; j < w.nX; ++j) {
    if (w.hasL(j)) {
      w.zL[j] = 1.0;
      ++n_bound;
    }
    if (w.hasU(j)) {
      w.zU[j] = 1.0;
      ++n_bound;
    }
  }

  // gradient-based objective scaling
  if (opts.auto_scale) {
    Vec g0;
    problem.objective_gradient(w.X.head(w.nx), g0);
    const double gmax = g0.size() > 0 ? g0.lpNorm<Eigen::Infinity>() : 0.0;
    if (gmax > 100.0) w.obj_scale = 100.0 / gmax;
  }

  double mu = n_bound > 0 ? 0.1 : 0.0;
  double penalty = 1.0;
  double delta_p = 0.0;   // persistent primal regularization
  const double delta_d = 1e-9;
  int consecutive_ls_failures = 0;

  Eigen::SimplicialLDLT<SpMat> ldlt;
  NlpProblem::Triplets hess_trips, jeq_trips, jineq_trips;
  Vec gbuf, cbuf;

  auto finish = [&](NlpStatus st, const std::string& msg, int iter) {
    res.status = st;
    res.message = msg;
    res.iterations = iter;
    res.x = w.X.head(w.nx);
    res.y_eq = w.y.head(w.neq) / w.obj_scale;
    res.y_ineq = w.ns > 0 ? Vec(w.y.tail(w.ns) / w.obj_scale) : Vec();
    res.z_lower = w.zL / w.obj_scale;
    res.z_upper = w.zU / w.obj_scale;
    res.objective = problem.objective(res.x);
    res.constraint_violation =
        w.nc == 0 ? 0.0 : w.resid.lpNorm<Eigen::Infinity>();
    return res;
  };

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    w.eval_constraints();
    w.eval_gradient();

    // Jacobian of (g; c - s) over X
    problem.constraint_jacobian(w.X.head(w.nx), jeq_trips, jineq_trips);
    std::vector<Triplet> jt;
    jt.reserve(jeq_trips.size() + jineq_trips.size() + w.ns);
    for (const auto& t : jeq_trips) jt.emplace_back(t.row(), t.col(), t.value());
    for (const auto& t : jineq_trips)
      jt.emplace_back(w.neq + t.row(), t.col(), t.value());
    for (int i = 0; i < w.ns; ++i) jt.emplace_back(w.neq + i, w.nx + i, -1.0);
    SpMat J(w.nc, w.nX);
    J.setFromTriplets(jt.begin(), jt.end());

    // dual residual: grad of Lagrangian wrt X
    Vec phi = Vec::Zero(w.nX);
    phi.head(w.nx) = w.grad;
    phi += J.transpose() * w.y;
    phi -= w.zL;
    phi += w.zU;

    // scaled KKT error (smax = 100)
    double comp_max = 0.0, comp_sum = 0.0;
    for (int j = 0; j < w.nX; ++j) {
      if (w.hasL(j)) {
        const double cj = (w.X[j] - w.lb[j]) * w.zL[j];
        comp_max = std::max(comp_max, std::abs(cj));
        comp_sum += cj;
      }
      if (w.hasU(j)) {
        const double cj = (w.ub[j] - w.X[j]) * w.zU[j];
        comp_max = std::max(comp_max, std::abs(cj));
        comp_sum += cj;
      }
    }
    const double mult_norm = w.y.lpNorm<1>() + w.zL.lpNorm<1>() + w.zU.lpNorm<1>();
    const double sd =
        std::max(100.0, mult_norm / std::max(1, w.nc + n_bound)) / 100.0;
    const double sc =
        std::max(100.0, (w.zL.lpNorm<1>() + w.zU.lpNorm<1>()) / std::max(1, n_bound)) /
        100.0;
    const double err = std::max({phi.lpNorm<Eigen::Infinity>() / sd,
                                 w.nc > 0 ? w.resid.lpNorm<Eigen::Infinity>() : 0.0,
                                 comp_max / sc});
    res.kkt_error = err;
    if (opts.verbose) {
      std::printf("it %3d  obj %14.8e  kkt %9.3e  theta %9.3e  mu %8.2e\n", iter,
                  problem.objective(w.X.head(w.nx)), err, w.theta(), mu);
    }
    if (err <= opts.tol) return finish(NlpStatus::Optimal, "", iter);
    if (iter == opts.max_iter) break;

    // ---- assemble and factor the regularized KKT matrix --------------------
    problem.lagrangian_hessian(w.X.head(w.nx), w.obj_scale, w.y.head(w.neq),
                               w.ns > 0 ? Vec(w.y.tail(w.ns)) : Vec(), hess_trips);
    Vec sigma = Vec::Zero(w.nX);
    for (int j = 0; j < w.nX; ++j) {
      if (w.hasL(j)) sigma[j] += w.zL[j] / (w.X[j] - w.lb[j]);
      if (w.hasU(j)) sigma[j] += w.zU[j] / (w.ub[j] - w.X[j]);
    }

    const int dim = w.nX + w.nc;
    bool factored = false;
    double dp = delta_p;
    for (int attempt = 0; attempt < 24 && !factored; ++attempt) {
      std::vector<Triplet> kt;
      kt.reserve(hess_trips.size() + 2 * J.nonZeros() + dim);
      for (const auto& t : hess_trips) kt.emplace_back(t.row(), t.col(), t.value());
      for (int j = 0; j < w.nX; ++j) kt.emplace_back(j, j, sigma[j] + dp);
      for (int k = 0; k < J.outerSize(); ++k) {
        for (SpMat::InnerIterator it(J, k); it; ++it) {
          kt.emplace_back(w.nX + it.row(), it.col(), it.value());
          kt.emplace_back(it.col(), w.nX + it.row(), it.value());
        }
      }
      for (int i = 0; i < w.nc; ++i) kt.emplace_back(w.nX + i, w.nX + i, -delta_d);
      SpMat K(dim, dim);
      K.setFromTriplets(kt.begin(), kt.end());
      ldlt.compute(K);
      if (ldlt.info() == Eigen::Success) {
        int pos = 0, neg = 0, zero = 0;
        const Vec& D = ldlt.vectorD();
        for (int j = 0; j < dim; ++j) {
          if (!std::isfinite(D[j]) || std::abs(D[j]) < 1e-300)
            ++zero;
          else if (D[j] > 0)
            ++pos;
          else
            ++neg;
        }
        if (zero == 0 && pos == w.nX && neg == w.nc) factored = true;
      }
      if (!factored) dp = dp == 0.0 ? 1e-8 : dp * 100.0;
      if (dp > 1e40)
        return finish(NlpStatus::LinAlgFailure,
                      "singular KKT system at iteration " + std::to_string(iter), iter);
    }
    if (!factored)
      return finish(NlpStatus::LinAlgFailure,
                    "singular KKT system at iteration " + std::to_string(iter), iter);
    // reuse a successful regularization, decay it slowly
    delta_p = factored && dp > 0.0 ? dp / 3.0 : 0.0;
    if (delta_p < 1e-12) delta_p = 0.0;

    const double mu_now = n_bound > 0 ? comp_sum / n_bound : 0.0;

    auto recover_dz = [&](const Vec& dX, double sigma_mu, const Vec* dXaff,
                          const Vec* dzLaff, const Vec* dzUaff, Vec& dzL, Vec& dzU) {
      dzL = Vec::Zero(w.nX);
      dzU = Vec::Zero(w.nX);
      for (int j = 0; j < w.nX; ++j) {
        if (w.hasL(j)) {
          double rc = (w.X[j] - w.lb[j]) * w.zL[j] - sigma_mu;
          if (dXaff) rc += (*dXaff)[j] * (*dzLaff)[j];
          dzL[j] = -(rc + w.zL[j] * dX[j]) / (w.X[j] - w.lb[j]);
        }
        if (w.hasU(j)) {
          double rc = (w.ub[j] - w.X[j]) * w.zU[j] - sigma_mu;
          if (dXaff) rc -= (*dXaff)[j] * (*dzUaff)[j];
          dzU[j] = -(rc - w.zU[j] * dX[j]) / (w.ub[j] - w.X[j]);
        }
      }
    };

    auto solve_dir = [&](double sigma_mu, const Vec* dXaff, const Vec* dzLaff,
                         const Vec* dzUaff, Vec& dX, Vec& dy, Vec& dzL, Vec& dzU) {
      Vec rhs(dim);
      for (int j = 0; j < w.nX; ++j) {
        double r = -phi[j];
        if (w.hasL(j)) {
          double rc = (w.X[j] - w.lb[j]) * w.zL[j] - sigma_mu;
          if (dXaff) rc += (*dXaff)[j] * (*dzLaff)[j];
          r -= rc / (w.X[j] - w.lb[j]);
        }
        if (w.hasU(j)) {
          double rc = (w.ub[j] - w.X[j]) * w.zU[j] - sigma_mu;
          if (dXaff) rc -= (*dXaff)[j] * (*dzUaff)[j];
          r += rc / (w.ub[j] - w.X[j]);
        }
        rhs[j] = r;
      }
      rhs.tail(w.nc) = -w.resid;
      Vec sol = ldlt.solve(rhs);
      if (!sol.allFinite()) return false;
      dX = sol.head(w.nX);
      dy = sol.tail(w.nc);
      recover_dz(dX, sigma_mu, dXaff, dzLaff, dzUaff, dzL, dzU);
      return true;
    };

    auto max_primal_step = [&](const Vec& dX, double tau) {
      double a = 1.0;
      for (int j = 0; j < w.nX; ++j) {
        if (w.hasL(j) && dX[j] < 0) a = std::min(a, -tau * (w.X[j] - w.lb[j]) / dX[j]);
        if (w.hasU(j) && dX[j] > 0) a = std::min(a, tau * (w.ub[j] - w.X[j]) / dX[j]);
      }
      return a;
    };
    auto max_dual_step = [&](const Vec& dzL, const Vec& dzU, double tau) {
      double a = 1.0;
      for (int j = 0; j < w.nX; ++j) {
        if (w.hasL(j) && dzL[j] < 0) a = std::min(a, -tau * w.zL[j] / dzL[j]);
        if (w.hasU(j) && dzU[j] < 0) a = std::min(a, -tau * w.zU[j] / dzU[j]);
      }
      return a;
    };

    // ---- Mehrotra predictor --------------------------------------------------
    Vec dX, dy, dzL, dzU;
    double sigma_mu = 0.0;
    if (n_bound > 0) {
      Vec dXa, dya, dzLa, dzUa;
      if (!solve_dir(0.0, nullptr, nullptr, nullptr, dXa, dya, dzLa, dzUa))
        return finish(NlpStatus::LinAlgFailure,
                      "KKT solve produced non-finite step at iteration " +
                          std::to_string(iter),
                      iter);
      const double ap = max_primal_step(dXa, 1.0);
      const double ad = max_dual_step(dzLa, dzUa, 1.0);
      double comp_aff = 0.0;
      for (int j = 0; j < w.nX; ++j) {
        if (w.hasL(j))
          comp_aff += (w.X[j] + ap * dXa[j] - w.lb[j]) * (w.zL[j] + ad * dzLa[j]);
        if (w.hasU(j))
          comp_aff += (w.ub[j] - w.X[j] - ap * dXa[j]) * (w.zU[j] + ad * dzUa[j]);
      }
      const double mu_aff = comp_aff / n_bound;
      double sigma_c =
          mu_now > 0 ? std::pow(std::clamp(mu_aff / mu_now, 0.0, 1.0), 3.0) : 0.1;
      sigma_c = std::clamp(sigma_c, 1e-8, 0.9);
      sigma_mu = sigma_c * mu_now;
      if (!solve_dir(sigma_mu, &dXa, &dzLa, &dzUa, dX, dy, dzL, dzU))
        return finish(NlpStatus::LinAlgFailure,
                      "KKT solve produced non-finite step at iteration " +
                          std::to_string(iter),
                      iter);
    } else {
      if (!solve_dir(0.0, nullptr, nullptr, nullptr, dX, dy, dzL, dzU))
        return finish(NlpStatus::LinAlgFailure,
                      "KKT solve produced non-finite step at iteration " +
                          std::to_string(iter),
                      iter);
    }

    mu = sigma_mu;

    // ---- fraction to boundary + l1 merit line search ------------------------
    const double tau = std::max(0.99, 1.0 - mu_now);
    const double a_pmax = max_primal_step(dX, tau);
    const double a_dmax = max_dual_step(dzL, dzU, tau);

    const double th0 = w.theta();
    // directional derivative of the merit at alpha = 0
    double dmerit = w.grad.dot(dX.head(w.nx));
    for (int j = 0; j < w.nX; ++j) {
      if (w.hasL(j)) dmerit -= mu * dX[j] / (w.X[j] - w.lb[j]);
      if (w.hasU(j)) dmerit += mu * dX[j] / (w.ub[j] - w.X[j]);
    }
    // raise the penalty so the direction is a descent direction for the merit
    const double y_next = (w.y + dy).lpNorm<Eigen::Infinity>();
    penalty = std::max(penalty, 1.1 * y_next + 1.0);
    if (th0 > 1e-14) penalty = std::max(penalty, 2.0 * dmerit / th0 + 1.0);
    dmerit -= penalty * th0;

    Vec gb, cb;
    const double merit0 = merit_at(w, w.X, mu, penalty, gb, cb);
    double alpha = a_pmax;
    bool accepted = false;
    double merit_trial = merit0;
    for (int bt = 0; bt < 40; ++bt) {
      Vec Xt = w.X + alpha * dX;
      merit_trial = merit_at(w, Xt, mu, penalty, gb, cb);
      if (std::isfinite(merit_trial) &&
          merit_trial <= merit0 + 1e-4 * alpha * std::min(dmerit, 0.0) +
                             1e-12 * std::max(1.0, std::abs(merit0))) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }

    if (!accepted) {
      // convexify and retry the iteration from scratch
      delta_p = delta_p == 0.0 ? 1e-4 : delta_p * 100.0;
      if (++consecutive_ls_failures >= 8)
        return finish(NlpStatus::IterationLimit,
                      "line search failed at iteration " + std::to_string(iter), iter);
      continue;
    }
    consecutive_ls_failures = 0;

    w.X += alpha * dX;
    w.y += alpha * dy;
    w.zL += a_dmax * dzL;
    w.zU += a_dmax * dzU;

    // dual reset safeguard: keep z consistent with the barrier (kappa = 1e10)
    if (mu > 0) {
      for (int j = 0; j < w.nX; ++j) {
        if (w.hasL(j)) {
          const double sl = w.X[j] - w.lb[j];
          w.zL[j] = std::clamp(w.zL[j], mu / (1e10 * sl), 1e10 * mu / sl);
        }
        if (w.hasU(j)) {
          const double su = w.ub[j] - w.X[j];
          w.zU[j] = std::clamp(w.zU[j], mu / (1e10 * su), 1e10 * mu / su);
        }
      }
    }

    if (opts.record_history) {
      NlpIterate rec;
      rec.mu = mu;
      rec.merit_before = merit0;
      rec.merit_after = merit_trial;
      rec.alpha = alpha;
      rec.kkt_error = err;
      res.history.push_back(rec);
    }
  }

  w.eval_constraints();
  const double th = w.theta();
  if (th > 1e-5)
    return finish(NlpStatus::Infeasible,
                  "constraint violation " + std::to_string(th) + " at iteration limit",
                  opts.max_iter);
  return finish(NlpStatus::IterationLimit, "iteration limit reached", opts.max_iter);
}

}  // namespace gridsplit
