#include "gridsplit/partition.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gridsplit {

namespace {

// splitmix64: cheap deterministic per-trial stream derivation
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// implementation-independent uniform integer in [0, n)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bULL) {}
  std::uint64_t next() { return state_ = mix(state_); }
  int below(int n) {
    // modulo rejection to avoid bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % static_cast<std::uint64_t>(n);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return static_cast<int>(v % static_cast<std::uint64_t>(n));
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

struct KMeansOut {
  std::vector<int> labels;
  double distortion = 0.0;
};

KMeansOut kmeans(const Eigen::MatrixXd& pts, int k, Rng& rng, int max_iter) {
  const int n = static_cast<int>(pts.rows());
  const int d = static_cast<int>(pts.cols());

  // k-means++ seeding
  Eigen::MatrixXd centers(k, d);
  std::vector<double> dist2(n, std::numeric_limits<double>::max());
  centers.row(0) = pts.row(rng.below(n));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], (pts.row(i) - centers.row(c - 1)).squaredNorm());
      total += dist2[i];
    }
    int pick = 0;
    if (total > 0) {
      double target = rng.uniform() * total, acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    centers.row(c) = pts.row(pick);
  }

  KMeansOut out;
  out.labels.assign(n, 0);
  std::vector<int> counts(k, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = (pts.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dd = (pts.row(i) - centers.row(c)).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      if (out.labels[i] != best) {
        out.labels[i] = best;
        changed = true;
      }
    }
    centers.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      centers.row(out.labels[i]) += pts.row(i);
      ++counts[out.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) /= counts[c];
      } else {
        // revive an empty cluster with the point farthest from its center
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < n; ++i) {
          const double dd = (pts.row(i) - centers.row(out.labels[i])).squaredNorm();
          if (dd > fd) {
            fd = dd;
            far = i;
          }
        }
        centers.row(c) = pts.row(far);
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
  }

  out.distortion = 0.0;
  for (int i = 0; i < n; ++i)
    out.distortion += (pts.row(i) - centers.row(out.labels[i])).squaredNorm();
  return out;
}

}  // namespace

void Partition::canonicalize() {
  std::vector<int> remap(num_regions, -1);
  int next = 0;
  for (int& r : region_of) {
    if (remap[r] < 0) remap[r] = next++;
    r = remap[r];
  }
  num_regions = next;
}

std::vector<std::vector<int>> Partition::regions() const {
  std::vector<std::vector<int>> out(num_regions);
  for (size_t i = 0; i < region_of.size(); ++i) out[region_of[i]].push_back(static_cast<int>(i));
  return out;
}

std::vector<std::vector<int>> Partition::extended(const NetworkCase& net) const {
  std::vector<std::set<int>> ext(num_regions);
  for (size_t i = 0; i < region_of.size(); ++i) ext[region_of[i]].insert(static_cast<int>(i));
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    if (region_of[f] != region_of[t]) {
      ext[region_of[f]].insert(t);
      ext[region_of[t]].insert(f);
    }
  }
  std::vector<std::vector<int>> out(num_regions);
  for (int k = 0; k < num_regions; ++k) out[k].assign(ext[k].begin(), ext[k].end());
  return out;
}

std::vector<std::pair<int, int>> Partition::tie_pairs(const NetworkCase& net) const {
  std::set<std::pair<int, int>> ties;
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    if (region_of[f] != region_of[t]) {
      ties.emplace(f, t);
      ties.emplace(t, f);
    }
  }
  return {ties.begin(), ties.end()};
}

Eigen::MatrixXd affinity_matrix(const KktJacobian& H, const AdmittanceMatrix& Y) {
  const int n = static_cast<int>(H.bus_indices.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);

  // accumulate |H_mn| into the bus pair that owns (m, n)
  for (int k = 0; k < H.H.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(H.H, k); it; ++it) {
      const int bi = H.bus_of[it.row()];
      const int bj = H.bus_of[it.col()];
      if (bi != bj) A(bi, bj) += std::abs(it.value());
    }
  }
  for (int k = 0; k < Y.Y.outerSize(); ++k) {
    for (Eigen::SparseMatrix<std::complex<double>>::InnerIterator it(Y.Y, k); it; ++it) {
      if (it.row() != it.col()) A(it.row(), it.col()) += std::abs(it.value());
    }
  }
  A = 0.5 * (A + A.transpose()).eval();
  A.diagonal().setZero();
  return A;
}

Eigen::MatrixXd admittance_only_affinity(const AdmittanceMatrix& Y) {
  const int n = static_cast<int>(Y.Y.rows());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < Y.Y.outerSize(); ++k) {
    for (Eigen::SparseMatrix<std::complex<double>>::InnerIterator it(Y.Y, k); it; ++it) {
      if (it.row() != it.col()) A(it.row(), it.col()) = std::abs(it.value());
    }
  }
  A = 0.5 * (A + A.transpose()).eval();
  A.diagonal().setZero();
  return A;
}

std::pair<Partition, PartitionQuality> spectral_partition(
    const Eigen::MatrixXd& affinity, int k, const SpectralOptions& opts,
    std::vector<SpectralTrial>* trials_out) {
  const int n = static_cast<int>(affinity.rows());
  if (k < 1) throw std::invalid_argument("region count must be at least 1");
  if (k > n)
    throw std::invalid_argument("region count " + std::to_string(k) + " exceeds " +
                                std::to_string(n) + " buses");

  Partition best;
  PartitionQuality q;

  if (k == 1) {
    best.region_of.assign(n, 0);
    best.num_regions = 1;
    q.max_region_size = n;
    q.chosen_trial = 0;
    return {best, q};
  }

  Eigen::VectorXd deg = affinity.rowwise().sum();
  for (int i = 0; i < n; ++i) {
    if (deg[i] <= 0.0)
      throw std::invalid_argument("bus " + std::to_string(i) +
                                  " is isolated in the affinity matrix");
  }
  Eigen::VectorXd dinv = deg.array().rsqrt();
  Eigen::MatrixXd L = dinv.asDiagonal() * affinity * dinv.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition of the normalized affinity failed");
  // top-k eigenvectors (eigenvalues are ascending), rows normalized to unit length
  Eigen::MatrixXd U = es.eigenvectors().rightCols(k);
  for (int i = 0; i < n; ++i) {
    const double norm = U.row(i).norm();
    if (norm > 0) U.row(i) /= norm;
  }

  int best_trial = -1;
  int best_size = n + 1;
  double best_distortion = std::numeric_limits<double>::max();
  std::vector<int> best_labels;

  for (int t = 0; t < opts.trials; ++t) {
    Rng rng(mix(opts.seed) ^ mix(static_cast<std::uint64_t>(t) + 1));
    KMeansOut km = kmeans(U, k, rng, opts.kmeans_max_iter);
    int max_size = 0;
    std::vector<int> sizes(k, 0);
    for (int lbl : km.labels) max_size = std::max(max_size, ++sizes[lbl]);
    if (trials_out) trials_out->push_back({km.labels, max_size, km.distortion});
    if (max_size < best_size ||
        (max_size == best_size && km.distortion < best_distortion)) {
      best_size = max_size;
      best_distortion = km.distortion;
      best_trial = t;
      best_labels = km.labels;
    }
  }

  best.region_of = best_labels;
  best.num_regions = k;
  best.canonicalize();
  q.max_region_size = best_size;
  q.kmeans_distortion = best_distortion;
  q.chosen_trial = best_trial;

  // connectivity w.r.t. the affinity graph
  q.region_connected.assign(best.num_regions, true);
  auto regions = best.regions();
  for (int r = 0; r < best.num_regions; ++r) {
    const auto& members = regions[r];
    if (members.empty()) continue;
    std::set<int> seen{members.front()};
    std::queue<int> bfs;
    bfs.push(members.front());
    std::set<int> member_set(members.begin(), members.end());
    while (!bfs.empty()) {
      const int u = bfs.front();
      bfs.pop();
      for (int v : member_set) {
        if (!seen.count(v) && affinity(u, v) > 0) {
          seen.insert(v);
          bfs.push(v);
        }
      }
    }
    q.region_connected[r] = seen.size() == member_set.size();
  }
  return {best, q};
}

Partition electrical_distance_partition(const NetworkCase& net, int k,
                                        std::uint64_t seed, bool* unreachable) {
  const int n = static_cast<int>(net.buses.size());
  std::set<int> gen_bus_set;
  for (const Generator& g : net.generators) gen_bus_set.insert(net.bus_index(g.bus));
  std::vector<int> gen_buses(gen_bus_set.begin(), gen_bus_set.end());
  if (k < 1) throw std::invalid_argument("region count must be at least 1");
  if (k > static_cast<int>(gen_buses.size()))
    throw std::invalid_argument("region count " + std::to_string(k) +
                                " exceeds the number of generator buses (" +
                                std::to_string(gen_buses.size()) + ")");

  // draw K distinct centers uniformly; keep them in ascending bus order so
  // region ids are deterministic
  Rng rng(mix(seed) ^ 0x5bd1e995u);
  std::vector<int> pool(gen_buses);
  std::vector<int> centers;
  for (int c = 0; c < k; ++c) {
    const int pick = rng.below(static_cast<int>(pool.size()));
    centers.push_back(pool[pick]);
    pool.erase(pool.begin() + pick);
  }
  std::sort(centers.begin(), centers.end());

  // adjacency with |z| weights; parallel branches keep the shortest
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    const double w = std::hypot(br.series_r, br.series_x);
    adj[f].emplace_back(t, w);
    adj[t].emplace_back(f, w);
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best_dist(n, kInf);
  std::vector<int> assign(n, -1);

  for (int c = 0; c < k; ++c) {
    // Dijkstra from centers[c]
    std::vector<double> dist(n, kInf);
    dist[centers[c]] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.emplace(0.0, centers[c]);
    while (!heap.empty()) {
      auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      for (auto [v, w] : adj[u]) {
        if (d + w < dist[v]) {
          dist[v] = d + w;
          heap.emplace(dist[v], v);
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      // strict improvement keeps ties with the lowest center id
      if (dist[i] < best_dist[i]) {
        best_dist[i] = dist[i];
        assign[i] = c;
      }
    }
  }

  bool any_unreachable = false;
  for (int i = 0; i < n; ++i) {
    if (assign[i] < 0) {
      assign[i] = 0;
      any_unreachable = true;
    }
  }
  if (unreachable) *unreachable = any_unreachable;

  Partition p;
  p.region_of = assign;
  p.num_regions = k;
  return p;
}

double boundary_rows(const KktJacobian& H, const Partition& p) {
  const int dim = static_cast<int>(H.H.rows());
  std::vector<bool> is_boundary(dim, false);
  for (int k = 0; k < H.H.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(H.H, k); it; ++it) {
      if (it.value() == 0.0) continue;
      if (p.region_of[H.bus_of[it.row()]] != p.region_of[H.bus_of[it.col()]])
        is_boundary[it.row()] = true;
    }
  }
  double score = 0.0;
  for (int k = 0; k < H.H.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(H.H, k); it; ++it) {
      if (is_boundary[it.row()]) score += std::abs(it.value());
    }
  }
  return score;
}

Eigen::MatrixXd merge_congested_tielines(Eigen::MatrixXd affinity,
                                         const NetworkCase& net,
                                         const std::vector<int>& congested_branches,
                                         double boost) {
  if (!(boost > 1.0)) throw std::invalid_argument("boost factor must exceed 1");
  for (int idx : congested_branches) {
    if (idx < 0 || idx >= static_cast<int>(net.branches.size()))
      throw std::out_of_range("branch index " + std::to_string(idx) +
                              " not present in the case");
    const int f = net.bus_index(net.branches[idx].from_bus);
    const int t = net.bus_index(net.branches[idx].to_bus);
    affinity(f, t) *= boost;
    affinity(t, f) *= boost;
  }
  return affinity;
}

PartitionQuality evaluate_partition(const NetworkCase& net, const Partition& p,
                                    const KktJacobian* H) {
  PartitionQuality q;
  auto regions = p.regions();
  for (const auto& r : regions)
    q.max_region_size = std::max(q.max_region_size, static_cast<int>(r.size()));

  std::set<std::pair<int, int>> crossings;
  std::vector<std::vector<int>> adj(net.buses.size());
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    if (p.region_of[f] != p.region_of[t]) {
      crossings.emplace(std::min(f, t), std::max(f, t));
    } else {
      adj[f].push_back(t);
      adj[t].push_back(f);
    }
  }
  q.tie_line_count = static_cast<int>(crossings.size());

  q.region_connected.assign(p.num_regions, true);
  for (int r = 0; r < p.num_regions; ++r) {
    if (regions[r].empty()) continue;
    std::set<int> seen{regions[r].front()};
    std::queue<int> bfs;
    bfs.push(regions[r].front());
    while (!bfs.empty()) {
      const int u = bfs.front();
      bfs.pop();
      for (int v : adj[u]) {
        if (p.region_of[v] == r && !seen.count(v)) {
          seen.insert(v);
          bfs.push(v);
        }
      }
    }
    q.region_connected[r] = seen.size() == regions[r].size();
  }

  if (H) q.boundary_score = boundary_rows(*H, p);
  return q;
}

void write_partition(std::ostream& out, const NetworkCase& net, const Partition& p) {
  for (size_t i = 0; i < net.buses.size(); ++i) {
    out << net.buses[i].id << ' ' << p.region_of[i] + 1 << '\n';
  }
}

Partition read_partition(std::istream& in, const NetworkCase& net) {
  std::map<int, int> by_id;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    int bus_id = 0, region = 0;
    if (!(ls >> bus_id)) continue;  // blank line
    if (!(ls >> region))
      throw ParseError("partition line needs `bus_id region_id`", lineno);
    by_id[bus_id] = region;
  }
  Partition p;
  p.region_of.resize(net.buses.size());
  std::set<int> regions_seen;
  for (size_t i = 0; i < net.buses.size(); ++i) {
    auto it = by_id.find(net.buses[i].id);
    if (it == by_id.end())
      throw ValidationError("partition file is missing bus " +
                            std::to_string(net.buses[i].id));
    p.region_of[i] = it->second - 1;
    if (p.region_of[i] < 0)
      throw ValidationError("region ids must be positive");
    regions_seen.insert(it->second);
  }
  p.num_regions = static_cast<int>(regions_seen.size());
  // compact the ids in case the file skips one
  std::map<int, int> remap;
  for (int r : regions_seen) remap[r - 1] = static_cast<int>(remap.size());
  for (int& r : p.region_of) r = remap[r];
  return p;
}

}  // namespace gridsplit
