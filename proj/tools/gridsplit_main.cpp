// gridsplit: partition a power network and solve the AC OPF either
// centrally or region-by-region with consensus ADMM.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridsplit/case_io.hpp"
#include "gridsplit/harness.hpp"

using namespace gridsplit;
namespace fs = std::filesystem;

namespace {

struct LimitArgs {
  std::string spec = "none";

  void apply(AdmmOptions& admm) const {
    if (spec == "none") {
      admm.line_limits = LineLimitMode::None;
    } else if (spec == "all") {
      admm.line_limits = LineLimitMode::All;
    } else {
      admm.line_limits = LineLimitMode::Subset;
      std::ifstream in(spec);
      if (!in) throw CLI::ValidationError("--line-limits", "cannot open " + spec);
      int idx;
      admm.limited_branches.clear();
      while (in >> idx) admm.limited_branches.push_back(idx - 1);  // 1-based file
    }
  }
};

void print_report(const ExperimentReport& rep) {
  if (!rep.ok()) {
    std::fprintf(stderr, "K=%d failed at stage %s: %s\n", rep.k,
                 rep.failed_stage.c_str(), rep.error.c_str());
    return;
  }
  std::printf("K=%-3d %-12s iterations=%-4d gap=%s  est_time=%.3fs  ties=%d  "
              "max_region=%d\n",
              rep.k, rep.converged ? "converged" : "not-converged", rep.iterations,
              rep.gap_valid ? (std::to_string(rep.gap_percent) + "%").c_str() : "n/a",
              rep.est_parallel_time_s, rep.quality.tie_line_count,
              rep.quality.max_region_size);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral partitioning + distributed AC OPF toolkit"};
  app.require_subcommand(1);

  // ---- solve ---------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "centralized AC OPF");
  std::string solve_case, solve_out;
  LimitArgs solve_limits;
  double solve_tol = 1e-6;
  solve->add_option("--case", solve_case, "case file (.m or .json)")->required();
  solve->add_option("--line-limits", solve_limits.spec, "none|all|FILE (default none)");
  solve->add_option("--tol", solve_tol, "KKT tolerance");
  solve->add_option("--out", solve_out, "write a summary JSON");

  // ---- partition -----------------------------------------------------------
  auto* part = app.add_subcommand("partition", "compute a bus partition");
  std::string part_case, part_method = "sp", part_out, part_affinity = "kkt";
  int part_k = 2, part_trials = 30;
  std::uint64_t part_seed = 0;
  part->add_option("--case", part_case)->required();
  part->add_option("--method", part_method, "sp|ep")->check(CLI::IsMember({"sp", "ep"}));
  part->add_option("--regions", part_k, "number of regions K")->required();
  part->add_option("--trials", part_trials, "K-means restarts (sp)");
  part->add_option("--seed", part_seed);
  part->add_option("--affinity", part_affinity, "kkt|admittance (sp)")
      ->check(CLI::IsMember({"kkt", "admittance"}));
  part->add_option("--out", part_out, "partition file to write")->required();

  // ---- admm ------------------------------------------------------------
  auto* admm = app.add_subcommand("admm", "distributed OPF on a partition");
  ExperimentConfig acfg;
  std::string admm_partition_file, admm_method = "sp", admm_start = "warm";
  LimitArgs admm_limits;
  int admm_k = 2;
  admm->add_option("--case", acfg.case_path)->required();
  admm->add_option("--partition", admm_partition_file, "partition file (bypasses clustering)");
  admm->add_option("--method", admm_method, "sp|ep when no partition file is given")
      ->check(CLI::IsMember({"sp", "ep"}));
  admm->add_option("--regions", admm_k);
  admm->add_option("--start", admm_start, "warm|flat")
      ->check(CLI::IsMember({"warm", "flat"}));
  admm->add_option("--rho0", acfg.admm.rho0);
  admm->add_option("--tau", acfg.admm.tau);
  admm->add_option("--gamma", acfg.admm.gamma);
  admm->add_option("--beta-plus", acfg.admm.beta_plus);
  admm->add_option("--beta-minus", acfg.admm.beta_minus);
  admm->add_option("--tol-primal", acfg.admm.eps_primal);
  admm->add_option("--tol-mismatch-mva", acfg.admm.eps_mismatch_mva);
  admm->add_option("--max-iters", acfg.admm.max_iterations);
  admm->add_option("--seed", acfg.seed);
  admm->add_option("--trials", acfg.trials);
  admm->add_option("--line-limits", admm_limits.spec, "none|all|FILE");
  admm->add_option("--out", acfg.out_dir, "artifact directory")->required();

  // ---- sweep -----------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "region-count sweep from a config file");
  std::string sweep_config, sweep_out_override;
  std::uint64_t sweep_seed = 0;
  bool sweep_seed_set = false;
  sweep->add_option("--config", sweep_config, "key = value experiment config")->required();
  sweep->add_option("--out", sweep_out_override, "override out_dir");
  sweep->add_option("--seed", sweep_seed)->each([&](const std::string&) {
    sweep_seed_set = true;
  });

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      NetworkCase net = load_case(solve_case);
      OpfOptions opts;
      AdmmOptions tmp;
      solve_limits.apply(tmp);
      opts.line_limits = tmp.line_limits;
      opts.limited_branches = tmp.limited_branches;
      opts.nlp.tol = solve_tol;
      OpfSolution sol = solve_centralized_opf(net, opts);
      std::printf("status:     %s\n", to_string(sol.status).c_str());
      std::printf("objective:  %.6f $/h\n", sol.objective);
      std::printf("iterations: %d\n", sol.iterations);
      std::printf("kkt error:  %.3e\n", sol.kkt_error);
      if (!solve_out.empty()) {
        nlohmann::json j;
        j["case"] = solve_case;
        j["status"] = to_string(sol.status);
        j["objective"] = sol.objective;
        j["iterations"] = sol.iterations;
        j["kkt_error"] = sol.kkt_error;
        std::ofstream out(solve_out);
        out << j.dump(2) << '\n';
      }
      return sol.status == NlpStatus::Optimal ? 0 : 1;
    }

    if (*part) {
      NetworkCase net = load_case(part_case);
      Partition p;
      if (part_method == "ep") {
        bool unreachable = false;
        p = electrical_distance_partition(net, part_k, part_seed, &unreachable);
        if (unreachable)
          std::fprintf(stderr, "warning: unreachable buses assigned to region 1\n");
      } else {
        AdmittanceMatrix Y = build_admittance(net);
        Eigen::MatrixXd A;
        if (part_affinity == "admittance") {
          A = admittance_only_affinity(Y);
        } else {
          OpfSolution sol = solve_centralized_opf(net);
          if (sol.status != NlpStatus::Optimal)
            throw std::runtime_error("centralized solve finished " +
                                     to_string(sol.status));
          A = affinity_matrix(kkt_jacobian(net, sol), Y);
        }
        SpectralOptions sopts;
        sopts.trials = part_trials;
        sopts.seed = part_seed;
        p = spectral_partition(A, part_k, sopts).first;
      }
      std::ofstream out(part_out);
      if (!out) throw std::runtime_error("cannot write " + part_out);
      write_partition(out, net, p);
      PartitionQuality q = evaluate_partition(net, p);
      std::printf("wrote %s: K=%d, max region %d, tie lines %d\n", part_out.c_str(),
                  p.num_regions, q.max_region_size, q.tie_line_count);
      return 0;
    }

    if (*admm) {
      acfg.k_list = {admm_k};
      acfg.admm.start =
          admm_start == "flat" ? AdmmOptions::Start::Flat : AdmmOptions::Start::Warm;
      admm_limits.apply(acfg.admm);
      if (!admm_partition_file.empty()) {
        acfg.partition_source = ExperimentConfig::Source::File;
        acfg.partition_file = admm_partition_file;
      } else {
        acfg.partition_source = admm_method == "ep"
                                    ? ExperimentConfig::Source::Electrical
                                    : ExperimentConfig::Source::Spectral;
      }
      ExperimentReport rep = run_experiment(acfg);
      print_report(rep);
      return rep.ok() && rep.converged ? 0 : 1;
    }

    if (*sweep) {
      ExperimentConfig cfg = load_experiment_config(sweep_config);
      if (!sweep_out_override.empty()) cfg.out_dir = sweep_out_override;
      if (sweep_seed_set) cfg.seed = sweep_seed;
      auto reports = sweep_regions(cfg);
      bool all_ok = true;
      for (const auto& rep : reports) {
        print_report(rep);
        all_ok = all_ok && rep.ok();
      }
      return all_ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
