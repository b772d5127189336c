#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <fstream>
#include <random>

#include "gridsplit/case_io.hpp"
#include "gridsplit/network.hpp"

using namespace gridsplit;
using cplx = std::complex<double>;

namespace {

const char* kTwoBusCase = R"(function mpc = case2
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0  0 0 0 1 1 0 0 1 1.1 0.9;
  2 1 10 5 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.gen = [
  1 20 0 30 -30 1.0 100 1 50 0;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1 -360 360;
];
mpc.gencost = [
  2 0 0 3 0.1 5 0;
];
)";

NetworkCase load_fixture(const std::string& name) {
  return load_case(std::string(GRIDSPLIT_CASE_DIR) + "/" + name);
}

}  // namespace

TEST_CASE("minimal 2-bus case parses with the right counts") {
  NetworkCase net = parse_case(kTwoBusCase, CaseFormat::MatpowerM);
  CHECK(net.buses.size() == 2);
  CHECK(net.branches.size() == 1);
  CHECK(net.generators.size() == 1);
  CHECK(net.base_mva == 100.0);
  CHECK(net.buses[net.reference_index()].id == 1);
  // MW -> p.u. conversion
  CHECK(net.buses[1].p_load == doctest::Approx(0.1));
  CHECK(net.buses[1].q_load == doctest::Approx(0.05));
  CHECK(net.generators[0].p_max == doctest::Approx(0.5));
  CHECK(net.generators[0].p_setpoint == doctest::Approx(0.2));
}

TEST_CASE("IEEE 14-bus fixture counts match the reference distribution") {
  NetworkCase net = load_fixture("case14.m");
  CHECK(net.buses.size() == 14);
  CHECK(net.branches.size() == 20);
  CHECK(net.generators.size() == 5);
  CHECK(net.buses[net.reference_index()].id == 1);
  // spot checks against the published data
  CHECK(net.branches[7].tap_ratio == doctest::Approx(0.978));
  CHECK(net.buses[8].shunt_b == doctest::Approx(0.19));
  CHECK(net.generators[0].cost_a == doctest::Approx(0.0430293));
}

TEST_CASE("parser rejects bad input with line information") {
  CHECK_THROWS_AS(parse_case("mpc.baseMVA = 100;", CaseFormat::MatpowerM), ParseError);

  std::string pwl = kTwoBusCase;
  pwl.replace(pwl.find("2 0 0 3 0.1 5 0;"), 16, "1 0 0 2 0 0 50 100;");
  CHECK_THROWS_WITH_AS(parse_case(pwl, CaseFormat::MatpowerM),
                       doctest::Contains("piecewise-linear"), ParseError);

  std::string no_ref = kTwoBusCase;
  no_ref.replace(no_ref.find("1 3 0"), 5, "1 1 0");
  CHECK_THROWS_AS(parse_case(no_ref, CaseFormat::MatpowerM), ValidationError);

  std::string bad_bus = kTwoBusCase;
  bad_bus.replace(bad_bus.find("1 2 0 0.1"), 9, "1 7 0 0.1");
  CHECK_THROWS_WITH_AS(parse_case(bad_bus, CaseFormat::MatpowerM),
                       doctest::Contains("unknown bus"), ValidationError);

  std::string garbage = kTwoBusCase;
  garbage.replace(garbage.find("0.1 5 0"), 7, "0.x 5 0");
  CHECK_THROWS_AS(parse_case(garbage, CaseFormat::MatpowerM), ParseError);
}

TEST_CASE("single line Y-bus closed form") {
  NetworkCase net = parse_case(kTwoBusCase, CaseFormat::MatpowerM);
  AdmittanceMatrix am = build_admittance(net);
  const cplx y = 1.0 / cplx(0.0, 0.1);
  CHECK(std::abs(cplx(am.Y.coeff(0, 0)) - y) < 1e-14);
  CHECK(std::abs(cplx(am.Y.coeff(1, 1)) - y) < 1e-14);
  CHECK(std::abs(cplx(am.Y.coeff(0, 1)) + y) < 1e-14);
  CHECK(std::abs(cplx(am.Y.coeff(1, 0)) + y) < 1e-14);
}

TEST_CASE("Y-bus matches a direct per-branch complex-arithmetic oracle") {
  NetworkCase net = load_fixture("case14.m");
  AdmittanceMatrix am = build_admittance(net);

  const int n = static_cast<int>(net.buses.size());
  Eigen::MatrixXcd dense = Eigen::MatrixXcd::Zero(n, n);
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    const cplx ys = 1.0 / cplx(br.series_r, br.series_x);
    const cplx half_b(0.0, br.charging_b / 2.0);
    const cplx tap = std::polar(br.tap_ratio, br.phase_shift);
    dense(f, f) += (ys + half_b) / std::norm(tap);
    dense(t, t) += ys + half_b;
    dense(f, t) += -ys / std::conj(tap);
    dense(t, f) += -ys / tap;
  }
  for (int i = 0; i < n; ++i)
    dense(i, i) += cplx(net.buses[i].shunt_g, net.buses[i].shunt_b);

  CHECK((Eigen::MatrixXcd(am.Y) - dense).cwiseAbs().maxCoeff() < 1e-13);
  // sparsity follows the branch structure
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (std::abs(dense(i, j)) == 0.0) CHECK(std::abs(am.Y.coeff(i, j)) == 0.0);
    }
  }
}

TEST_CASE("branch with tap and charging matches the pi-model by hand") {
  std::string txt = kTwoBusCase;
  txt.replace(txt.find("1 2 0 0.1 0 0 0 0 0 0 1"), 23, "1 2 0.01 0.1 0.04 0 0 0 1.05 30 1");
  NetworkCase net = parse_case(txt, CaseFormat::MatpowerM);
  AdmittanceMatrix am = build_admittance(net);

  const cplx ys = 1.0 / cplx(0.01, 0.1);
  const cplx half_b(0.0, 0.02);
  const double shift = 30.0 * 3.14159265358979323846 / 180.0;
  const cplx tap = std::polar(1.05, shift);
  CHECK(std::abs(cplx(am.Y.coeff(0, 0)) - (ys + half_b) / (1.05 * 1.05)) < 1e-14);
  CHECK(std::abs(cplx(am.Y.coeff(1, 1)) - (ys + half_b)) < 1e-14);
  CHECK(std::abs(cplx(am.Y.coeff(0, 1)) + ys / std::conj(tap)) < 1e-14);
  CHECK(std::abs(cplx(am.Y.coeff(1, 0)) + ys / tap) < 1e-14);
}

TEST_CASE("disconnected bus keeps only its shunt on the diagonal") {
  std::string txt(kTwoBusCase);
  txt.replace(txt.find("2 1 10 5 0 0"), 12, "2 1 10 5 1 2");
  txt.replace(txt.find("  1 2 0 0.1 0 0 0 0 0 0 1 -360 360;\n"), 36, "");
  // removing the only branch leaves bus 2 isolated
  NetworkCase net = parse_case(txt, CaseFormat::MatpowerM);
  REQUIRE(net.branches.empty());
  AdmittanceMatrix am = build_admittance(net);
  CHECK(std::abs(cplx(am.Y.coeff(1, 1)) - cplx(0.01, 0.02)) < 1e-15);
  CHECK(am.Y.coeff(1, 0) == cplx(0, 0));
  CHECK(am.Y.coeff(0, 1) == cplx(0, 0));
}

TEST_CASE("Y-bus rows of a lossless shunt-free network sum to zero") {
  const char* txt = R"(function mpc = ring
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;
  2 1 0 0 0 0 1 1 0 0 1 1.1 0.9;
  3 1 0 0 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.gen = [ 1 0 0 10 -10 1 100 1 10 0; ];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1 -360 360;
  2 3 0 0.2 0 0 0 0 0 0 1 -360 360;
  3 1 0 0.25 0 0 0 0 0 0 1 -360 360;
];
mpc.gencost = [ 2 0 0 3 0 1 0; ];
)";
  NetworkCase net = parse_case(txt, CaseFormat::MatpowerM);
  AdmittanceMatrix am = build_admittance(net);
  Eigen::MatrixXcd dense(am.Y);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(dense.row(i).sum()) < 1e-14);
}

TEST_CASE("adjacency is the symmetric neighbor relation") {
  NetworkCase net = parse_case(kTwoBusCase, CaseFormat::MatpowerM);
  auto adj = adjacency(net);
  CHECK(adj[1] == std::set<int>{2});
  CHECK(adj[2] == std::set<int>{1});

  // parallel branches appear once
  std::string txt(kTwoBusCase);
  txt.insert(txt.find("];\nmpc.gencost"), "  1 2 0 0.3 0 0 0 0 0 0 1 -360 360;\n");
  NetworkCase dup = parse_case(txt, CaseFormat::MatpowerM);
  REQUIRE(dup.branches.size() == 2);
  auto adj2 = adjacency(dup);
  CHECK(adj2[1].size() == 1);
}

TEST_CASE("case14 adjacency degrees match a brute-force edge scan") {
  NetworkCase net = load_fixture("case14.m");
  auto adj = adjacency(net);

  std::map<int, std::set<int>> oracle;
  for (const Bus& b : net.buses) oracle[b.id];
  for (const Branch& br : net.branches) {
    oracle[br.from_bus].insert(br.to_bus);
    oracle[br.to_bus].insert(br.from_bus);
  }
  CHECK(adj == oracle);
  for (const auto& [i, nbrs] : adj) {
    for (int j : nbrs) CHECK(adj[j].count(i) == 1);
  }
}

TEST_CASE("per-unit round trip through both formats") {
  NetworkCase net = load_fixture("case14.m");
  for (CaseFormat fmt : {CaseFormat::Json, CaseFormat::MatpowerM}) {
    NetworkCase again = parse_case(serialize_case(net, fmt), fmt);
    REQUIRE(again.buses.size() == net.buses.size());
    REQUIRE(again.branches.size() == net.branches.size());
    REQUIRE(again.generators.size() == net.generators.size());
    for (size_t i = 0; i < net.buses.size(); ++i) {
      CHECK(again.buses[i].id == net.buses[i].id);
      CHECK(again.buses[i].p_load == doctest::Approx(net.buses[i].p_load).epsilon(1e-12));
      CHECK(again.buses[i].shunt_b ==
            doctest::Approx(net.buses[i].shunt_b).epsilon(1e-12));
      CHECK(again.buses[i].is_reference == net.buses[i].is_reference);
    }
    for (size_t i = 0; i < net.branches.size(); ++i) {
      CHECK(again.branches[i].series_x ==
            doctest::Approx(net.branches[i].series_x).epsilon(1e-12));
      CHECK(again.branches[i].tap_ratio ==
            doctest::Approx(net.branches[i].tap_ratio).epsilon(1e-12));
      CHECK(again.branches[i].phase_shift ==
            doctest::Approx(net.branches[i].phase_shift).epsilon(1e-12));
      CHECK(again.branches[i].s_max ==
            doctest::Approx(net.branches[i].s_max).epsilon(1e-12));
    }
    for (size_t i = 0; i < net.generators.size(); ++i) {
      CHECK(again.generators[i].cost_a ==
            doctest::Approx(net.generators[i].cost_a).epsilon(1e-12));
      CHECK(again.generators[i].p_max ==
            doctest::Approx(net.generators[i].p_max).epsilon(1e-12));
    }
  }
}

TEST_CASE("json parsing accepts the documented schema") {
  const char* doc = R"({
    "name": "tiny",
    "base_mva": 50.0,
    "buses": [
      {"id": 1, "reference": true, "v_min": 0.95, "v_max": 1.05},
      {"id": 2, "p_load_mw": 5.0, "q_load_mvar": 1.0, "v_min": 0.95, "v_max": 1.05}
    ],
    "branches": [{"from": 1, "to": 2, "r": 0.01, "x": 0.1}],
    "generators": [{"bus": 1, "p_max_mw": 20, "q_min_mvar": -10, "q_max_mvar": 10,
                    "cost_b": 7.5}]
  })";
  NetworkCase net = parse_case(doc, CaseFormat::Json);
  CHECK(net.base_mva == 50.0);
  CHECK(net.buses[1].p_load == doctest::Approx(0.1));  // 5 MW on a 50 MVA base
  CHECK(net.generators[0].p_max == doctest::Approx(0.4));
  CHECK(net.generators[0].cost_b == 7.5);
  CHECK_THROWS_AS(parse_case("{\"buses\": []}", CaseFormat::Json), ParseError);
}
