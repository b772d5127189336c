#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridsplit/network.hpp"
#include "gridsplit/opf.hpp"

namespace gridsplit {

/// Bus-to-region assignment. Region ids are dense, 0-based, and canonical:
/// region 0 is the region of the first bus, and so on by first appearance.
struct Partition {
  std::vector<int> region_of;  // bus position -> region
  int num_regions = 0;

  /// R_k: bus positions per region.
  std::vector<std::vector<int>> regions() const;
  /// V_k: R_k plus neighbor buses reached by a crossing branch.
  std::vector<std::vector<int>> extended(const NetworkCase& net) const;
  /// B: ordered boundary pairs (i,j), one per crossing bus pair and
  /// direction; symmetric as a relation.
  std::vector<std::pair<int, int>> tie_pairs(const NetworkCase& net) const;

  void canonicalize();  // relabel regions by first appearance
};

struct PartitionQuality {
  int max_region_size = 0;
  int tie_line_count = 0;         // crossing bus pairs, counted once
  double boundary_score = 0.0;    // sum |H^b| when H is supplied
  std::vector<bool> region_connected;
  bool has_unreachable_bus = false;
  double kmeans_distortion = 0.0;
  int chosen_trial = -1;
};

/// Eq.-style affinity: A_ij = sum_{m in S_i} sum_{n in S_j} |H_mn| + |Y_ij|
/// for i != j, symmetrized by averaging, zero diagonal.
Eigen::MatrixXd affinity_matrix(const KktJacobian& H, const AdmittanceMatrix& Y);

/// A_ij = |Y_ij| off the diagonal.
Eigen::MatrixXd admittance_only_affinity(const AdmittanceMatrix& Y);

struct SpectralOptions {
  int trials = 30;  // seeded K-means restarts
  std::uint64_t seed = 0;
  int kmeans_max_iter = 100;
};

struct SpectralTrial {
  std::vector<int> assignment;
  int max_region_size = 0;
  double distortion = 0.0;
};

/// Normalized spectral clustering (Ng-Jordan-Weiss) with N seeded K-means
/// trials; returns the most balanced partition (smallest largest region,
/// ties by distortion, then trial index). Throws on K > n or an isolated
/// (zero-degree) bus.
std::pair<Partition, PartitionQuality> spectral_partition(
    const Eigen::MatrixXd& affinity, int k, const SpectralOptions& opts = {},
    std::vector<SpectralTrial>* trials_out = nullptr);

/// Electrical-distance baseline: K generator buses drawn uniformly (seeded)
/// as centers, every bus assigned to the nearest center by shortest path
/// with |z_series| edge weights. Unreachable buses go to region 0 and are
/// flagged through `unreachable`.
Partition electrical_distance_partition(const NetworkCase& net, int k,
                                        std::uint64_t seed,
                                        bool* unreachable = nullptr);

/// Sum of |entries| over the rows of H that couple buses in different
/// regions.
double boundary_rows(const KktJacobian& H, const Partition& p);

/// Scales the affinity of the listed branches' endpoint pairs by `boost`.
Eigen::MatrixXd merge_congested_tielines(Eigen::MatrixXd affinity,
                                         const NetworkCase& net,
                                         const std::vector<int>& congested_branches,
                                         double boost);

/// Tie lines, balance and connectivity (w.r.t. the branch graph) of a
/// partition; boundary_score filled when H is supplied.
PartitionQuality evaluate_partition(const NetworkCase& net, const Partition& p,
                                    const KktJacobian* H = nullptr);

/// Text exchange format: one `bus_id region_id` line per bus, 1-based
/// region ids.
void write_partition(std::ostream& out, const NetworkCase& net, const Partition& p);
Partition read_partition(std::istream& in, const NetworkCase& net);

}  // namespace gridsplit
