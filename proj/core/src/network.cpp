#include "gridsplit/network.hpp"

#include <cmath>

namespace gridsplit {

int NetworkCase::bus_index(int bus_id) const {
  for (size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == bus_id) return static_cast<int>(i);
  }
  throw ValidationError("unknown bus id " + std::to_string(bus_id));
}

int NetworkCase::reference_index() const {
  for (size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].is_reference) return static_cast<int>(i);
  }
  throw ValidationError("case has no reference bus");
}

std::vector<std::vector<int>> NetworkCase::generators_by_bus() const {
  std::vector<std::vector<int>> out(buses.size());
  for (size_t g = 0; g < generators.size(); ++g) {
    out[bus_index(generators[g].bus)].push_back(static_cast<int>(g));
  }
  return out;
}

void NetworkCase::validate() const {
  if (!(base_mva > 0)) throw ValidationError("base_mva must be positive");
  if (buses.empty()) throw ValidationError("case has no buses");

  std::set<int> ids;
  int n_ref = 0;
  for (const Bus& b : buses) {
    if (!ids.insert(b.id).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (b.is_reference) ++n_ref;
    if (!(b.v_min > 0 && b.v_min <= b.v_max))
      throw ValidationError("bus " + std::to_string(b.id) +
                            ": voltage bounds must satisfy 0 < v_min <= v_max");
  }
  if (n_ref != 1)
    throw ValidationError("case must have exactly one reference bus, found " +
                          std::to_string(n_ref));

  for (const Branch& br : branches) {
    if (!ids.count(br.from_bus) || !ids.count(br.to_bus))
      throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + " references an unknown bus");
    if (br.series_r * br.series_r + br.series_x * br.series_x <= 0)
      throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + " has zero series impedance");
    if (!(br.tap_ratio > 0))
      throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + " has non-positive tap ratio");
  }

  for (const Generator& g : generators) {
    if (!ids.count(g.bus))
      throw ValidationError("generator references unknown bus " + std::to_string(g.bus));
    if (g.p_min > g.p_max || g.q_min > g.q_max)
      throw ValidationError("generator at bus " + std::to_string(g.bus) +
                            " has inverted output limits");
    if (g.cost_a < 0)
      throw ValidationError("generator at bus " + std::to_string(g.bus) +
                            " has negative quadratic cost coefficient");
  }
}

AdmittanceMatrix build_admittance(const NetworkCase& net) {
  using cplx = std::complex<double>;
  const int n = static_cast<int>(net.buses.size());

  AdmittanceMatrix am;
  am.flows.reserve(net.branches.size());
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(4 * net.branches.size() + n);

  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    const cplx ys = 1.0 / cplx(br.series_r, br.series_x);
    const cplx ysh(0.0, br.charging_b / 2.0);
    const cplx tap = std::polar(br.tap_ratio, br.phase_shift);

    BranchFlow bf;
    bf.from = f;
    bf.to = t;
    bf.y_ff = (ys + ysh) / (br.tap_ratio * br.tap_ratio);
    bf.y_tt = ys + ysh;
    bf.y_ft = -ys / std::conj(tap);
    bf.y_tf = -ys / tap;
    bf.s_max = br.s_max;
    am.flows.push_back(bf);

    trips.emplace_back(f, f, bf.y_ff);
    trips.emplace_back(t, t, bf.y_tt);
    trips.emplace_back(f, t, bf.y_ft);
    trips.emplace_back(t, f, bf.y_tf);
  }
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(i, i, cplx(net.buses[i].shunt_g, net.buses[i].shunt_b));
  }

  am.Y.resize(n, n);
  am.Y.setFromTriplets(trips.begin(), trips.end());
  return am;
}

std::map<int, std::set<int>> adjacency(const NetworkCase& net) {
  std::map<int, std::set<int>> adj;
  for (const Bus& b : net.buses) adj[b.id];
  for (const Branch& br : net.branches) {
    adj[br.from_bus].insert(br.to_bus);
    adj[br.to_bus].insert(br.from_bus);
  }
  return adj;
}

}  // namespace gridsplit
