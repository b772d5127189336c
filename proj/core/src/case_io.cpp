#include "gridsplit/case_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridsplit {

namespace {

constexpr double kPi = 3.14159265358979323846;

// --- MATPOWER .m subset ---------------------------------------------------
//
// Recognizes: `function mpc = NAME`, `mpc.baseMVA = X;` and the matrices
// mpc.bus / mpc.gen / mpc.branch / mpc.gencost. Quadratic gencost only.

struct MRow {
  std::vector<double> vals;
  int line = 0;
};

struct MFile {
  std::string name;
  double base_mva = 0.0;
  bool has_base = false;
  std::map<std::string, std::vector<MRow>> matrices;
};

MFile scan_matpower(std::istream& in) {
  MFile mf;
  std::string line;
  int lineno = 0;
  std::string matrix;  // non-empty while inside `mpc.X = [ ... ];`

  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('%'); pos != std::string::npos) line.erase(pos);

    if (matrix.empty()) {
      std::istringstream ls(line);
      std::string tok;
      ls >> tok;
      if (tok == "function") {
        std::string eq, name;
        ls >> eq >> eq >> name;  // "mpc = NAME" or "= NAME"
        mf.name = eq == "=" ? name : eq;
        if (mf.name == "=") ls >> mf.name;
        continue;
      }
      if (tok.rfind("mpc.", 0) != 0) continue;
      std::string field = tok.substr(4);
      std::string rest;
      std::getline(ls, rest);
      if (auto eq = rest.find('='); eq != std::string::npos) rest.erase(0, eq + 1);

      if (field == "baseMVA") {
        if (auto sc = rest.find(';'); sc != std::string::npos) rest.erase(sc);
        try {
          mf.base_mva = std::stod(rest);
        } catch (const std::exception&) {
          throw ParseError("cannot parse baseMVA value '" + rest + "'", lineno);
        }
        mf.has_base = true;
        continue;
      }
      if (field == "version") continue;
      if (auto br = rest.find('['); br != std::string::npos) {
        matrix = field;
        line = rest.substr(br + 1);
      } else {
        continue;  // scalar assignment we do not care about
      }
    }

    if (!matrix.empty()) {
      bool closing = false;
      if (auto end = line.find(']'); end != std::string::npos) {
        line.erase(end);
        closing = true;
      }
      // split the line into rows at ';'
      std::string chunk;
      std::istringstream ls(line);
      while (std::getline(ls, chunk, ';')) {
        std::istringstream cs(chunk);
        MRow row;
        row.line = lineno;
        std::string num;
        while (cs >> num) {
          if (!num.empty() && num.back() == ',') num.pop_back();
          if (num.empty()) continue;
          try {
            size_t used = 0;
            row.vals.push_back(std::stod(num, &used));
            if (used != num.size()) throw std::invalid_argument(num);
          } catch (const std::exception&) {
            throw ParseError("cannot parse number '" + num + "' in mpc." + matrix, lineno);
          }
        }
        if (!row.vals.empty()) mf.matrices[matrix].push_back(std::move(row));
      }
      if (closing) matrix.clear();
    }
  }
  if (!matrix.empty())
    throw ParseError("unterminated matrix mpc." + matrix, lineno);
  return mf;
}

NetworkCase from_matpower(std::istream& in) {
  MFile mf = scan_matpower(in);
  if (!mf.has_base) throw ParseError("missing mpc.baseMVA");
  if (!mf.matrices.count("bus")) throw ParseError("missing mpc.bus matrix");
  if (!mf.matrices.count("gen")) throw ParseError("missing mpc.gen matrix");
  if (!mf.matrices.count("branch")) throw ParseError("missing mpc.branch matrix");

  NetworkCase net;
  net.name = mf.name;
  net.base_mva = mf.base_mva;
  const double base = net.base_mva;
  if (!(base > 0)) throw ValidationError("base_mva must be positive");

  for (const MRow& r : mf.matrices["bus"]) {
    if (r.vals.size() < 13)
      throw ParseError("bus row needs 13 columns, got " + std::to_string(r.vals.size()),
                       r.line);
    Bus b;
    b.id = static_cast<int>(r.vals[0]);
    b.is_reference = static_cast<int>(r.vals[1]) == 3;
    b.p_load = r.vals[2] / base;
    b.q_load = r.vals[3] / base;
    b.shunt_g = r.vals[4] / base;
    b.shunt_b = r.vals[5] / base;
    b.v_max = r.vals[11];
    b.v_min = r.vals[12];
    net.buses.push_back(b);
  }

  for (const MRow& r : mf.matrices["branch"]) {
    if (r.vals.size() < 11)
      throw ParseError("branch row needs at least 11 columns, got " +
                           std::to_string(r.vals.size()),
                       r.line);
    if (static_cast<int>(r.vals[10]) == 0) continue;  // out of service
    Branch br;
    br.from_bus = static_cast<int>(r.vals[0]);
    br.to_bus = static_cast<int>(r.vals[1]);
    br.series_r = r.vals[2];
    br.series_x = r.vals[3];
    br.charging_b = r.vals[4];
    br.s_max = r.vals[5] / base;  // RATE_A, 0 stays 0 = unlimited
    br.tap_ratio = r.vals[8] == 0.0 ? 1.0 : r.vals[8];
    br.phase_shift = r.vals[9] * kPi / 180.0;
    net.branches.push_back(br);
  }

  const auto& gens = mf.matrices["gen"];
  const auto* costs = mf.matrices.count("gencost") ? &mf.matrices["gencost"] : nullptr;
  if (costs && costs->size() != gens.size())
    throw ParseError("gencost has " + std::to_string(costs->size()) + " rows for " +
                     std::to_string(gens.size()) +
                     " generators (reactive cost rows are not supported)");

  for (size_t i = 0; i < gens.size(); ++i) {
    const MRow& r = gens[i];
    if (r.vals.size() < 10)
      throw ParseError("gen row needs at least 10 columns, got " +
                           std::to_string(r.vals.size()),
                       r.line);
    if (static_cast<int>(r.vals[7]) <= 0) continue;  // out of service
    Generator g;
    g.bus = static_cast<int>(r.vals[0]);
    g.p_setpoint = r.vals[1] / base;
    g.q_max = r.vals[3] / base;
    g.q_min = r.vals[4] / base;
    g.v_setpoint = r.vals[5];
    g.p_max = r.vals[8] / base;
    g.p_min = r.vals[9] / base;

    if (costs) {
      const MRow& c = (*costs)[i];
      if (c.vals.size() < 4) throw ParseError("gencost row too short", c.line);
      const int model = static_cast<int>(c.vals[0]);
      const int ncost = static_cast<int>(c.vals[3]);
      if (model != 2)
        throw ParseError(
            "only polynomial gencost (model 2) is supported; "
            "piecewise-linear rows are rejected",
            c.line);
      if (ncost > 3)
        throw ParseError("gencost degree " + std::to_string(ncost - 1) +
                             " not supported (quadratic at most)",
                         c.line);
      if (static_cast<int>(c.vals.size()) < 4 + ncost)
        throw ParseError("gencost row shorter than its declared ncost", c.line);
      // coefficients are listed highest order first
      std::vector<double> coef(c.vals.begin() + 4, c.vals.begin() + 4 + ncost);
      if (ncost >= 1) g.cost_c = coef[ncost - 1];
      if (ncost >= 2) g.cost_b = coef[ncost - 2];
      if (ncost >= 3) g.cost_a = coef[ncost - 3];
    }
    net.generators.push_back(g);
  }

  net.validate();
  return net;
}

// --- JSON schema ------------------------------------------------------------

using nlohmann::json;

NetworkCase from_json(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  try {
    NetworkCase net;
    net.name = j.value("name", "");
    net.base_mva = j.at("base_mva").get<double>();
    const double base = net.base_mva;
    if (!(base > 0)) throw ValidationError("base_mva must be positive");

    for (const json& jb : j.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<int>();
      b.p_load = jb.value("p_load_mw", 0.0) / base;
      b.q_load = jb.value("q_load_mvar", 0.0) / base;
      b.v_min = jb.value("v_min", 0.94);
      b.v_max = jb.value("v_max", 1.06);
      b.shunt_g = jb.value("shunt_g_mw", 0.0) / base;
      b.shunt_b = jb.value("shunt_b_mvar", 0.0) / base;
      b.is_reference = jb.value("reference", false);
      net.buses.push_back(b);
    }
    for (const json& jb : j.at("branches")) {
      Branch br;
      br.from_bus = jb.at("from").get<int>();
      br.to_bus = jb.at("to").get<int>();
      br.series_r = jb.at("r").get<double>();
      br.series_x = jb.at("x").get<double>();
      br.charging_b = jb.value("charging_b", 0.0);
      br.tap_ratio = jb.value("tap", 1.0);
      br.phase_shift = jb.value("shift_deg", 0.0) * kPi / 180.0;
      br.s_max = jb.value("s_max_mva", 0.0) / base;
      net.branches.push_back(br);
    }
    for (const json& jg : j.value("generators", json::array())) {
      Generator g;
      g.bus = jg.at("bus").get<int>();
      g.p_min = jg.value("p_min_mw", 0.0) / base;
      g.p_max = jg.at("p_max_mw").get<double>() / base;
      g.q_min = jg.value("q_min_mvar", 0.0) / base;
      g.q_max = jg.value("q_max_mvar", 0.0) / base;
      g.cost_a = jg.value("cost_a", 0.0);
      g.cost_b = jg.value("cost_b", 0.0);
      g.cost_c = jg.value("cost_c", 0.0);
      g.p_setpoint = jg.value("p_mw", 0.0) / base;
      g.v_setpoint = jg.value("v_setpoint", 1.0);
      net.generators.push_back(g);
    }
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad case document: ") + e.what());
  }
}

json to_json(const NetworkCase& net) {
  const double base = net.base_mva;
  json j;
  j["name"] = net.name;
  j["base_mva"] = base;
  j["buses"] = json::array();
  for (const Bus& b : net.buses) {
    j["buses"].push_back({{"id", b.id},
                          {"p_load_mw", b.p_load * base},
                          {"q_load_mvar", b.q_load * base},
                          {"v_min", b.v_min},
                          {"v_max", b.v_max},
                          {"shunt_g_mw", b.shunt_g * base},
                          {"shunt_b_mvar", b.shunt_b * base},
                          {"reference", b.is_reference}});
  }
  j["branches"] = json::array();
  for (const Branch& br : net.branches) {
    j["branches"].push_back({{"from", br.from_bus},
                             {"to", br.to_bus},
                             {"r", br.series_r},
                             {"x", br.series_x},
                             {"charging_b", br.charging_b},
                             {"tap", br.tap_ratio},
                             {"shift_deg", br.phase_shift * 180.0 / kPi},
                             {"s_max_mva", br.s_max * base}});
  }
  j["generators"] = json::array();
  for (const Generator& g : net.generators) {
    j["generators"].push_back({{"bus", g.bus},
                               {"p_min_mw", g.p_min * base},
                               {"p_max_mw", g.p_max * base},
                               {"q_min_mvar", g.q_min * base},
                               {"q_max_mvar", g.q_max * base},
                               {"cost_a", g.cost_a},
                               {"cost_b", g.cost_b},
                               {"cost_c", g.cost_c},
                               {"p_mw", g.p_setpoint * base},
                               {"v_setpoint", g.v_setpoint}});
  }
  return j;
}

std::string to_matpower(const NetworkCase& net) {
  const double base = net.base_mva;
  std::string out;
  char buf[512];
  auto emit = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof(buf), fmt, args...);
    out += buf;
  };
  emit("function mpc = %s\n", net.name.empty() ? "case_export" : net.name.c_str());
  out += "mpc.version = '2';\n";
  emit("mpc.baseMVA = %.17g;\n", base);
  out += "mpc.bus = [\n";
  for (const Bus& b : net.buses) {
    emit("\t%d\t%d\t%.17g\t%.17g\t%.17g\t%.17g\t1\t1\t0\t0\t1\t%.17g\t%.17g;\n", b.id,
         b.is_reference ? 3 : 1, b.p_load * base, b.q_load * base, b.shunt_g * base,
         b.shunt_b * base, b.v_max, b.v_min);
  }
  out += "];\nmpc.gen = [\n";
  for (const Generator& g : net.generators) {
    emit("\t%d\t%.17g\t0\t%.17g\t%.17g\t%.17g\t%.17g\t1\t%.17g\t%.17g\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0;\n",
         g.bus, g.p_setpoint * base, g.q_max * base, g.q_min * base, g.v_setpoint, base,
         g.p_max * base, g.p_min * base);
  }
  out += "];\nmpc.branch = [\n";
  for (const Branch& br : net.branches) {
    emit("\t%d\t%d\t%.17g\t%.17g\t%.17g\t%.17g\t0\t0\t%.17g\t%.17g\t1\t-360\t360;\n",
         br.from_bus, br.to_bus, br.series_r, br.series_x, br.charging_b, br.s_max * base,
         br.tap_ratio == 1.0 ? 0.0 : br.tap_ratio, br.phase_shift * 180.0 / kPi);
  }
  out += "];\nmpc.gencost = [\n";
  for (const Generator& g : net.generators) {
    emit("\t2\t0\t0\t3\t%.17g\t%.17g\t%.17g;\n", g.cost_a, g.cost_b, g.cost_c);
  }
  out += "];\n";
  return out;
}

}  // namespace

NetworkCase parse_case(std::istream& text, CaseFormat format) {
  return format == CaseFormat::MatpowerM ? from_matpower(text) : from_json(text);
}

NetworkCase parse_case(const std::string& text, CaseFormat format) {
  std::istringstream ss(text);
  return parse_case(ss, format);
}

NetworkCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file " + path);
  CaseFormat fmt = CaseFormat::MatpowerM;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") fmt = CaseFormat::Json;
  return parse_case(in, fmt);
}

std::string serialize_case(const NetworkCase& net, CaseFormat format) {
  if (format == CaseFormat::Json) return to_json(net).dump(2);
  return to_matpower(net);
}

}  // namespace gridsplit
