#include "gridsplit/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridsplit/case_io.hpp"

namespace gridsplit {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  if (case_path.empty()) throw std::invalid_argument("config: case path is required");
  if (k_list.empty()) throw std::invalid_argument("config: at least one K is required");
  for (int k : k_list) {
    if (k < 1) throw std::invalid_argument("config: region counts must be >= 1");
  }
  if (partition_source == Source::File && partition_file.empty())
    throw std::invalid_argument("config: partition file source needs a path");
  admm.validate();
}

double compute_gap(double dist_objective, double cent_objective) {
  if (!(cent_objective > 0))
    throw std::invalid_argument("centralized objective unavailable for gap");
  return 100.0 * (dist_objective - cent_objective) / cent_objective;
}

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::istringstream check(line);
      std::string tok;
      if (check >> tok)
        throw ParseError("expected `key = value`", lineno);
      continue;
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "case") cfg.case_path = val;
      else if (key == "partition") {
        if (val == "sp") cfg.partition_source = ExperimentConfig::Source::Spectral;
        else if (val == "ep") cfg.partition_source = ExperimentConfig::Source::Electrical;
        else if (val == "file") cfg.partition_source = ExperimentConfig::Source::File;
        else throw ParseError("partition must be sp, ep or file", lineno);
      }
      else if (key == "partition_file") cfg.partition_file = val;
      else if (key == "regions") cfg.k_list = parse_int_list(val);
      else if (key == "trials") cfg.trials = std::stoi(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "affinity") cfg.admittance_affinity = val == "admittance";
      else if (key == "out_dir") cfg.out_dir = val;
      else if (key == "start")
        cfg.admm.start = val == "flat" ? AdmmOptions::Start::Flat : AdmmOptions::Start::Warm;
      else if (key == "rho0") cfg.admm.rho0 = std::stod(val);
      else if (key == "tau") cfg.admm.tau = std::stod(val);
      else if (key == "gamma") cfg.admm.gamma = std::stod(val);
      else if (key == "beta_plus") cfg.admm.beta_plus = std::stod(val);
      else if (key == "beta_minus") cfg.admm.beta_minus = std::stod(val);
      else if (key == "tol_primal") cfg.admm.eps_primal = std::stod(val);
      else if (key == "tol_mismatch_mva") cfg.admm.eps_mismatch_mva = std::stod(val);
      else if (key == "max_iters") cfg.admm.max_iterations = std::stoi(val);
      else if (key == "nlp_tol") cfg.admm.nlp.tol = std::stod(val);
      else if (key == "parallel") cfg.admm.parallel = val != "0" && val != "false";
      else if (key == "line_limits") {
        if (val == "none") cfg.admm.line_limits = LineLimitMode::None;
        else if (val == "all") cfg.admm.line_limits = LineLimitMode::All;
        else {
          cfg.admm.line_limits = LineLimitMode::Subset;
          std::ifstream lf(val);
          if (!lf) throw ParseError("cannot open line-limit list " + val, lineno);
          int idx;
          while (lf >> idx) cfg.admm.limited_branches.push_back(idx - 1);
        }
      }
      else throw ParseError("unknown config key `" + key + "`", lineno);
    } catch (const std::invalid_argument&) {
      throw ParseError("bad value for `" + key + "`: " + val, lineno);
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  return parse_experiment_config(in);
}

void write_trace_csv(std::ostream& out, const AdmmTrace& trace) {
  out << "iteration,max_primal_residue,max_mismatch_mva,objective,"
         "est_parallel_time_s,max_rho\n";
  char buf[256];
  for (const AdmmIterationRecord& r : trace.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.6g,%.12g\n", r.iteration,
                  r.max_primal_residue, r.max_mismatch_mva, r.objective,
                  r.est_parallel_time_s, r.max_rho);
    out << buf;
  }
}

namespace {

// shared state of a sweep: everything upstream of the per-K stages
struct ExperimentContext {
  NetworkCase net;
  AdmittanceMatrix Y;
  OpfSolution centralized;
  bool has_affinity = false;
  Eigen::MatrixXd affinity;
  KktJacobian H;
  bool has_H = false;
};

ExperimentReport run_for_k(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                           int k) {
  ExperimentReport rep;
  rep.k = k;
  rep.cent_objective = ctx.centralized.objective;

  std::string stage = "partition";
  try {
    Partition part;
    if (cfg.partition_source == ExperimentConfig::Source::File) {
      std::ifstream pf(cfg.partition_file);
      if (!pf) throw ParseError("cannot open partition file " + cfg.partition_file);
      part = read_partition(pf, ctx.net);
    } else if (cfg.partition_source == ExperimentConfig::Source::Electrical) {
      bool unreachable = false;
      part = electrical_distance_partition(ctx.net, k, cfg.seed, &unreachable);
      rep.quality.has_unreachable_bus = unreachable;
    } else {
      SpectralOptions sopts;
      sopts.trials = cfg.trials;
      sopts.seed = cfg.seed;
      auto [p, q] = spectral_partition(ctx.affinity, k, sopts);
      part = p;
      rep.quality.kmeans_distortion = q.kmeans_distortion;
      rep.quality.chosen_trial = q.chosen_trial;
    }
    {
      PartitionQuality q = evaluate_partition(ctx.net, part, ctx.has_H ? &ctx.H : nullptr);
      q.kmeans_distortion = rep.quality.kmeans_distortion;
      q.chosen_trial = rep.quality.chosen_trial;
      q.has_unreachable_bus =
          q.has_unreachable_bus || rep.quality.has_unreachable_bus;
      rep.quality = q;
    }

    fs::path dir;
    if (!cfg.out_dir.empty()) {
      dir = fs::path(cfg.out_dir) / ("k" + std::to_string(k));
      fs::create_directories(dir);
      std::ofstream pf(dir / "partition.txt");
      write_partition(pf, ctx.net, part);
      rep.partition_path = (dir / "partition.txt").string();
    }

    stage = "admm";
    AdmmResult admm = run_admm(ctx.net, part, cfg.admm);
    rep.converged = admm.converged;
    rep.iterations = admm.iterations;
    rep.est_parallel_time_s = admm.est_parallel_time_s;
    rep.dist_objective = admm.objective;
    if (ctx.centralized.status == NlpStatus::Optimal) {
      rep.gap_percent = compute_gap(admm.objective, ctx.centralized.objective);
      rep.gap_valid = admm.converged;
    }

    stage = "artifacts";
    if (!cfg.out_dir.empty()) {
      std::ofstream tf(dir / "trace.csv");
      write_trace_csv(tf, admm.trace);
      rep.trace_path = (dir / "trace.csv").string();

      json j;
      j["case"] = cfg.case_path;
      j["k"] = k;
      j["seed"] = cfg.seed;
      j["converged"] = rep.converged;
      j["iterations"] = rep.iterations;
      j["est_parallel_time_s"] = rep.est_parallel_time_s;
      j["cent_objective"] = rep.cent_objective;
      j["dist_objective"] = rep.dist_objective;
      if (rep.gap_valid) j["gap_percent"] = rep.gap_percent;
      j["partition"] = {{"max_region_size", rep.quality.max_region_size},
                        {"tie_line_count", rep.quality.tie_line_count},
                        {"boundary_score", rep.quality.boundary_score},
                        {"all_regions_connected",
                         std::all_of(rep.quality.region_connected.begin(),
                                     rep.quality.region_connected.end(),
                                     [](bool b) { return b; })},
                        {"has_unreachable_bus", rep.quality.has_unreachable_bus}};
      j["trace"] = rep.trace_path;
      std::ofstream sf(dir / "summary.json");
      sf << j.dump(2) << '\n';
      rep.summary_path = (dir / "summary.json").string();
    }
  } catch (const std::exception& e) {
    rep.failed_stage = stage;
    rep.error = e.what();
  }
  return rep;
}

ExperimentContext make_context(const ExperimentConfig& cfg) {
  ExperimentContext ctx;
  ctx.net = load_case(cfg.case_path);
  ctx.Y = build_admittance(ctx.net);

  OpfOptions copts;
  copts.line_limits = cfg.admm.line_limits;
  copts.limited_branches = cfg.admm.limited_branches;
  copts.nlp = cfg.admm.nlp;
  ctx.centralized = solve_centralized_opf(ctx.net, copts);
  if (ctx.centralized.status != NlpStatus::Optimal)
    throw std::runtime_error("centralized solve finished " +
                             to_string(ctx.centralized.status));

  if (cfg.partition_source == ExperimentConfig::Source::Spectral) {
    if (cfg.admittance_affinity) {
      ctx.affinity = admittance_only_affinity(ctx.Y);
    } else {
      ctx.H = kkt_jacobian(ctx.net, ctx.centralized);
      ctx.has_H = true;
      ctx.affinity = affinity_matrix(ctx.H, ctx.Y);
    }
    ctx.has_affinity = true;
  } else if (!cfg.admittance_affinity) {
    // the boundary-score diagnostic is still worth reporting when cheap
    ctx.H = kkt_jacobian(ctx.net, ctx.centralized);
    ctx.has_H = true;
  }
  return ctx;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentContext ctx;
  try {
    ctx = make_context(config);
  } catch (const std::exception& e) {
    ExperimentReport rep;
    rep.k = config.k_list.front();
    rep.failed_stage = "setup";
    rep.error = e.what();
    return rep;
  }
  return run_for_k(ctx, config, config.k_list.front());
}

std::vector<ExperimentReport> sweep_regions(const ExperimentConfig& config) {
  config.validate();
  std::vector<ExperimentReport> out;
  ExperimentContext ctx;
  try {
    ctx = make_context(config);
  } catch (const std::exception& e) {
    for (int k : config.k_list) {
      ExperimentReport rep;
      rep.k = k;
      rep.failed_stage = "setup";
      rep.error = e.what();
      out.push_back(rep);
    }
    return out;
  }
  for (int k : config.k_list) out.push_back(run_for_k(ctx, config, k));
  return out;
}

}  // namespace gridsplit
