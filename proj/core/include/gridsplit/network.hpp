#pragma once

#include <complex>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

namespace gridsplit {

/// Thrown by parse_case on malformed input; carries a 1-based line number
/// when the offending location is known (0 otherwise).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Thrown when a parsed case violates a structural invariant; the message
/// names the violated invariant.
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Bus {
  int id = 0;
  double p_load = 0.0;  // p.u.
  double q_load = 0.0;  // p.u.
  double v_min = 0.0;   // p.u. magnitude bounds
  double v_max = 0.0;
  double shunt_g = 0.0;  // p.u. admittance to ground
  double shunt_b = 0.0;
  bool is_reference = false;
};

struct Branch {
  int from_bus = 0;  // bus ids
  int to_bus = 0;
  double series_r = 0.0;  // p.u.
  double series_x = 0.0;
  double charging_b = 0.0;   // total line charging susceptance, p.u.
  double tap_ratio = 1.0;    // 1.0 if no transformer
  double phase_shift = 0.0;  // radians
  double s_max = 0.0;        // apparent-power limit, p.u.; 0 = unlimited
};

struct Generator {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;  // p.u.
  double q_min = 0.0, q_max = 0.0;
  double cost_a = 0.0;  // $/MW^2 h
  double cost_b = 0.0;  // $/MWh
  double cost_c = 0.0;  // $/h
  // Case-file operating point, kept for power-flow warm starts.
  double p_setpoint = 0.0;  // p.u.
  double v_setpoint = 1.0;  // p.u.
};

/// A validated problem instance. All quantities are in per-unit on base_mva;
/// parse_case does the MW/MVAr conversion.
struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;

  int bus_index(int bus_id) const;  // position in `buses`, throws if unknown
  int reference_index() const;

  /// Generator positions grouped by bus index.
  std::vector<std::vector<int>> generators_by_bus() const;

  /// Throws ValidationError naming the violated invariant.
  void validate() const;
};

/// Per-branch flow coefficients: I_from = y_ff V_f + y_ft V_t and
/// I_to = y_tf V_f + y_tt V_t, in bus-index space.
struct BranchFlow {
  int from = 0;
  int to = 0;
  std::complex<double> y_ff, y_ft, y_tf, y_tt;
  double s_max = 0.0;  // p.u.; 0 = unlimited
};

struct AdmittanceMatrix {
  Eigen::SparseMatrix<std::complex<double>> Y;  // n_b x n_b, bus-index order
  std::vector<BranchFlow> flows;                // one entry per branch
};

/// Standard pi-model Y-bus assembly with taps, phase shifts, line charging
/// and bus shunts.
AdmittanceMatrix build_admittance(const NetworkCase& net);

/// Symmetric neighbor relation induced by branches, keyed by bus id.
std::map<int, std::set<int>> adjacency(const NetworkCase& net);

}  // namespace gridsplit
