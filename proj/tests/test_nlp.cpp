#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>

#include "gridsplit/nlp.hpp"

using namespace gridsplit;
using Vec = Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BoundedScalar : NlpProblem {
  int num_vars() const override { return 1; }
  int num_eq() const override { return 0; }
  double objective(const Vec& x) const override { return (x[0] - 3) * (x[0] - 3); }
  void objective_gradient(const Vec& x, Vec& g) const override {
    g.resize(1);
    g[0] = 2 * (x[0] - 3);
  }
  void constraints(const Vec&, Vec& g, Vec& c) const override {
    g.resize(0);
    c.resize(0);
  }
  void constraint_jacobian(const Vec&, Triplets& a, Triplets& b) const override {
    a.clear();
    b.clear();
  }
  void lagrangian_hessian(const Vec&, double w, const Vec&, const Vec&,
                          Triplets& h) const override {
    h.clear();
    h.emplace_back(0, 0, 2 * w);
  }
  void variable_bounds(Vec& lb, Vec& ub) const override {
    lb = Vec::Constant(1, 0.0);
    ub = Vec::Constant(1, 10.0);
  }
  Vec initial_point() const override { return Vec::Constant(1, 9.0); }
};

struct EqualityQp : NlpProblem {
  int num_vars() const override { return 2; }
  int num_eq() const override { return 1; }
  double objective(const Vec& x) const override { return x.squaredNorm(); }
  void objective_gradient(const Vec& x, Vec& g) const override { g = 2 * x; }
  void constraints(const Vec& x, Vec& g, Vec& c) const override {
    g.resize(1);
    g[0] = x[0] + x[1] - 1;
    c.resize(0);
  }
  void constraint_jacobian(const Vec&, Triplets& a, Triplets& b) const override {
    a.clear();
    b.clear();
    a.emplace_back(0, 0, 1.0);
    a.emplace_back(0, 1, 1.0);
  }
  void lagrangian_hessian(const Vec&, double w, const Vec&, const Vec&,
                          Triplets& h) const override {
    h.clear();
    h.emplace_back(0, 0, 2 * w);
    h.emplace_back(1, 1, 2 * w);
  }
  void variable_bounds(Vec& lb, Vec& ub) const override {
    lb = Vec::Constant(2, -kInf);
    ub = Vec::Constant(2, kInf);
  }
  Vec initial_point() const override { return Vec::Zero(2); }
};

// 0.5 x'Qx + b'x subject to Ax = rhs, random SPD Q
struct RandomEqQp : NlpProblem {
  Eigen::MatrixXd Q, A;
  Vec b, rhs, x0;
  double scale = 1.0;

  RandomEqQp(int n, int m, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = dist(rng);
    Q = M.transpose() * M + 0.5 * Eigen::MatrixXd::Identity(n, n);
    A.resize(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = dist(rng);
    b.resize(n);
    for (int i = 0; i < n; ++i) b[i] = dist(rng);
    rhs.resize(m);
    for (int i = 0; i < m; ++i) rhs[i] = dist(rng);
    x0 = Vec::Zero(n);
  }

  int num_vars() const override { return static_cast<int>(Q.rows()); }
  int num_eq() const override { return static_cast<int>(A.rows()); }
  double objective(const Vec& x) const override {
    return scale * (0.5 * x.dot(Q * x) + b.dot(x));
  }
  void objective_gradient(const Vec& x, Vec& g) const override {
    g = scale * (Q * x + b);
  }
  void constraints(const Vec& x, Vec& g, Vec& c) const override {
    g = A * x - rhs;
    c.resize(0);
  }
  void constraint_jacobian(const Vec&, Triplets& a, Triplets& bt) const override {
    a.clear();
    bt.clear();
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j) a.emplace_back(i, j, A(i, j));
  }
  void lagrangian_hessian(const Vec&, double w, const Vec&, const Vec&,
                          Triplets& h) const override {
    h.clear();
    for (int i = 0; i < Q.rows(); ++i)
      for (int j = 0; j < Q.cols(); ++j) h.emplace_back(i, j, w * scale * Q(i, j));
  }
  void variable_bounds(Vec& lb, Vec& ub) const override {
    lb = Vec::Constant(num_vars(), -kInf);
    ub = Vec::Constant(num_vars(), kInf);
  }
  Vec initial_point() const override { return x0; }
};

struct CircleConstrained : NlpProblem {
  int num_vars() const override { return 2; }
  int num_eq() const override { return 0; }
  int num_ineq() const override { return 1; }
  double objective(const Vec& x) const override {
    return (x[0] - 2) * (x[0] - 2) + (x[1] - 1) * (x[1] - 1);
  }
  void objective_gradient(const Vec& x, Vec& g) const override {
    g.resize(2);
    g[0] = 2 * (x[0] - 2);
    g[1] = 2 * (x[1] - 1);
  }
  void constraints(const Vec& x, Vec& g, Vec& c) const override {
    g.resize(0);
    c.resize(1);
    c[0] = x.squaredNorm();
  }
  void constraint_jacobian(const Vec& x, Triplets& a, Triplets& b) const override {
    a.clear();
    b.clear();
    b.emplace_back(0, 0, 2 * x[0]);
    b.emplace_back(0, 1, 2 * x[1]);
  }
  void lagrangian_hessian(const Vec&, double w, const Vec&, const Vec& yi,
                          Triplets& h) const override {
    h.clear();
    const double d = 2 * w + (yi.size() ? 2 * yi[0] : 0.0);
    h.emplace_back(0, 0, d);
    h.emplace_back(1, 1, d);
  }
  void variable_bounds(Vec& lb, Vec& ub) const override {
    lb = Vec::Constant(2, -kInf);
    ub = Vec::Constant(2, kInf);
  }
  void ineq_bounds(Vec& lo, Vec& up) const override {
    lo = Vec::Constant(1, -kInf);
    up = Vec::Constant(1, 1.0);
  }
  Vec initial_point() const override { return Vec::Zero(2); }
};

}  // namespace

TEST_CASE("bounded scalar quadratic finds the interior minimizer") {
  NlpResult r = solve_nlp(BoundedScalar{});
  CHECK(r.status == NlpStatus::Optimal);
  CHECK(r.x[0] == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(r.kkt_error <= 1e-6);
}

TEST_CASE("equality QP matches the closed-form KKT point and multiplier") {
  NlpResult r = solve_nlp(EqualityQp{});
  CHECK(r.status == NlpStatus::Optimal);
  CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.x[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.y_eq[0] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("random equality QP matches a dense KKT linear solve") {
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
    RandomEqQp p(8, 3, seed);
    NlpResult r = solve_nlp(p);
    REQUIRE(r.status == NlpStatus::Optimal);

    // oracle: solve [Q A'; A 0] [x; y] = [-b; rhs] directly
    const int n = p.num_vars(), m = p.num_eq();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = p.Q;
    K.topRightCorner(n, m) = p.A.transpose();
    K.bottomLeftCorner(m, n) = p.A;
    Vec rhs(n + m);
    rhs << -p.b, p.rhs;
    Vec sol = K.fullPivLu().solve(rhs);

    CHECK((r.x - sol.head(n)).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((r.y_eq - sol.tail(m)).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("active nonlinear inequality lands on the circle") {
  NlpResult r = solve_nlp(CircleConstrained{});
  CHECK(r.status == NlpStatus::Optimal);
  CHECK(r.x.norm() == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.x[0] == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-6));
  CHECK(r.y_ineq[0] > 0);  // upper side active
}

TEST_CASE("merit function is non-increasing across accepted steps") {
  NlpOptions opts;
  opts.record_history = true;
  for (int variant = 0; variant < 2; ++variant) {
    NlpResult r = variant == 0 ? solve_nlp(CircleConstrained{}, opts)
                               : solve_nlp(RandomEqQp(6, 2, 7u), opts);
    REQUIRE(r.status == NlpStatus::Optimal);
    REQUIRE(!r.history.empty());
    for (const NlpIterate& it : r.history) {
      CHECK(it.merit_after <=
            it.merit_before + 1e-9 * std::max(1.0, std::abs(it.merit_before)));
    }
  }
}

TEST_CASE("positive objective scaling leaves the argmin unchanged") {
  RandomEqQp base(6, 2, 11u);
  NlpResult r1 = solve_nlp(base);
  RandomEqQp scaled(6, 2, 11u);
  scaled.scale = 2500.0;
  NlpResult r2 = solve_nlp(scaled);
  REQUIRE(r1.status == NlpStatus::Optimal);
  REQUIRE(r2.status == NlpStatus::Optimal);
  CHECK((r1.x - r2.x).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("iteration limit is reported honestly") {
  NlpOptions opts;
  opts.max_iter = 1;
  NlpResult r = solve_nlp(CircleConstrained{}, opts);
  CHECK(r.status != NlpStatus::Optimal);
  CHECK(r.iterations <= 1);
}
