#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridsplit/admm.hpp"
#include "gridsplit/partition.hpp"

namespace gridsplit {

struct ExperimentConfig {
  std::string case_path;
  enum class Source { Spectral, Electrical, File };
  Source partition_source = Source::Spectral;
  std::vector<int> k_list = {2};
  int trials = 30;          // K-means restarts for spectral partitioning
  std::uint64_t seed = 0;
  std::string partition_file;       // used with Source::File
  bool admittance_affinity = false;  // |Y| only instead of the KKT affinity
  AdmmOptions admm;
  std::string out_dir;  // artifacts are skipped when empty

  void validate() const;
};

struct ExperimentReport {
  int k = 0;
  bool converged = false;
  int iterations = 0;
  double est_parallel_time_s = 0.0;
  double cent_objective = 0.0;
  double dist_objective = 0.0;
  double gap_percent = 0.0;
  bool gap_valid = false;  // both solves succeeded
  PartitionQuality quality;
  std::string trace_path, partition_path, summary_path;
  std::string failed_stage, error;  // empty on success

  bool ok() const { return failed_stage.empty(); }
};

/// 100 * (dist - cent) / cent; requires cent > 0.
double compute_gap(double dist_objective, double cent_objective);

/// `key = value` lines, '#' comments. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);

void write_trace_csv(std::ostream& out, const AdmmTrace& trace);

/// parse -> centralized solve -> partition -> ADMM -> report; artifacts go
/// to config.out_dir. Uses k_list.front().
ExperimentReport run_experiment(const ExperimentConfig& config);

/// One report per entry of k_list, reusing a single centralized solve and
/// affinity matrix; a failure of one K does not abort the others.
std::vector<ExperimentReport> sweep_regions(const ExperimentConfig& config);

}  // namespace gridsplit
