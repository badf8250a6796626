#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "sdcar/json_io.hpp"
#include "sdcar/lattice.hpp"

namespace sdcar::experiments {

enum class ModelKind { Kitaev, Anderson, Custom };
enum class PathRule { Linear, Ramp };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Kitaev: return "kitaev";
    case ModelKind::Anderson: return "anderson";
    case ModelKind::Custom: return "custom";
  }
  return "?";
}

struct ModelSpec {
  ModelKind kind = ModelKind::Kitaev;
  // kitaev
  int n_sites = 12;
  double t = 1.0;
  double mu = 0.0;
  double delta = 1.0;
  // anderson
  LatticeConfig lattice;
  double hopping_scale = 1.0;
  double lambda = 0.0;
  double pairing = 0.0;
  std::optional<std::uint64_t> seed;  // unset: realization 0 of seeds.master
  // custom
  std::string h0_file, h1_file;
  Boundary boundary = Boundary::Open;
};

struct PathSpec {
  std::string param = "mu";
  PathRule rule = PathRule::Linear;
  std::vector<double> knots{0.0, 1.0};
  int grid = 101;
};

struct ToleranceSpec {
  double zero_tol = 1e-8;   // relative to ||H||
  double transport = 1e-6;
  double h_init = 1e-2;
  double h_min = 1e-4;
  double bisect = 1e-8;
  double gap_closed = 1e-6;
  double crossing_delta = 1e-4;
  double index_one = 1e-6;
  double det = 1e-6;
};

struct CtSpec {
  double mu = 0.2;
  double epsilon = 1.0;
  std::vector<Complex> z{Complex(0.0, 3.0), Complex(0.0, 0.0)};
  int instances = 100;
};

struct FiniteSizeSpec {
  std::vector<int> L{4, 6, 8, 10, 12, 14, 16};
  int big = 40;  // kitaev: length of the open parent chain; anderson: parent box radius
};

struct ExperimentConfig {
  ModelSpec model;
  PathSpec path;
  ToleranceSpec tol;
  std::string flow_mode = "kato";
  std::uint64_t master_seed = 0;
  int realizations = 50;
  FiniteSizeSpec finite_size;
  CtSpec ct;
  int weakstar_n_max = 64;
  std::string out_dir = "out";
  bool csv = true;
  std::string source;  // file the config came from, not echoed

  Json to_json() const;
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& what, const YAML::Node& n) {
  const auto m = n.Mark();
  throw Error(ErrorKind::ParseError,
              (m.line >= 0 ? "line " + std::to_string(m.line + 1) + ": " : std::string()) + what);
}

inline void check_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
  if (!n.IsMap()) parse_fail("'" + where + "' must be a mapping", n);
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      parse_fail("unknown key '" + (where.empty() ? key : where + "." + key) + "'", kv.first);
    }
  }
}

template <class T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
  const auto n = parent[key];
  if (!n) return;
  try {
    out = n.as<T>();
  } catch (const YAML::Exception&) {
    parse_fail("bad value for '" + where + "." + key + "'", n);
  }
}

inline Boundary parse_boundary(const YAML::Node& n, const std::string& where) {
  const auto s = n.as<std::string>();
  if (s == "open") return Boundary::Open;
  if (s == "periodic") return Boundary::Periodic;
  parse_fail("'" + where + "' must be open or periodic, got '" + s + "'", n);
}

}  // namespace detail

inline ExperimentConfig parse_config_node(const YAML::Node& root) {
  using detail::check_keys;
  using detail::parse_fail;
  using detail::read;
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  check_keys(root, "", {"model", "path", "tolerances", "flow", "seeds", "ensemble", "finite_size", "ct",
                        "weakstar", "output"});
  if (auto m = root["model"]) {
    std::string kind = "kitaev";
    read(m, "kind", kind, "model");
    if (kind == "kitaev") {
      c.model.kind = ModelKind::Kitaev;
      check_keys(m, "model", {"kind", "n_sites", "t", "mu", "delta", "boundary"});
      read(m, "n_sites", c.model.n_sites, "model");
      read(m, "t", c.model.t, "model");
      read(m, "mu", c.model.mu, "model");
      read(m, "delta", c.model.delta, "model");
      c.model.boundary = Boundary::Periodic;
    } else if (kind == "anderson") {
      c.model.kind = ModelKind::Anderson;
      c.model.mu = -1.0;
      c.model.pairing = 0.0;
      check_keys(m, "model", {"kind", "d", "L", "spins", "boundary", "epsilon", "hopping_scale", "lambda", "mu",
                              "pairing", "seed"});
      read(m, "d", c.model.lattice.d, "model");
      read(m, "L", c.model.lattice.L, "model");
      read(m, "spins", c.model.lattice.spins, "model");
      read(m, "epsilon", c.model.lattice.epsilon, "model");
      read(m, "hopping_scale", c.model.hopping_scale, "model");
      read(m, "lambda", c.model.lambda, "model");
      read(m, "mu", c.model.mu, "model");
      read(m, "pairing", c.model.pairing, "model");
      if (m["seed"]) {
        std::uint64_t sd = 0;
        read(m, "seed", sd, "model");
        c.model.seed = sd;
      }
    } else if (kind == "custom") {
      c.model.kind = ModelKind::Custom;
      check_keys(m, "model", {"kind", "h0_file", "h1_file"});
      read(m, "h0_file", c.model.h0_file, "model");
      read(m, "h1_file", c.model.h1_file, "model");
      if (c.model.h0_file.empty()) parse_fail("custom model needs 'model.h0_file'", m);
      if (c.model.h1_file.empty()) c.model.h1_file = c.model.h0_file;
    } else {
      parse_fail("model.kind must be kitaev, anderson or custom, got '" + kind + "'", m["kind"]);
    }
    if (auto b = m["boundary"]) c.model.boundary = detail::parse_boundary(b, "model.boundary");
    c.model.lattice.boundary = c.model.boundary;
  } else {
    c.model.boundary = Boundary::Periodic;
  }
  if (c.model.kind == ModelKind::Anderson) c.path.param = "lambda";
  if (auto p = root["path"]) {
    check_keys(p, "path", {"param", "rule", "from", "to", "values", "grid"});
    read(p, "param", c.path.param, "path");
    std::string rule = "linear";
    read(p, "rule", rule, "path");
    if (rule == "linear") {
      c.path.rule = PathRule::Linear;
      if (p["values"]) parse_fail("'path.values' belongs to rule ramp", p["values"]);
      read(p, "from", c.path.knots[0], "path");
      read(p, "to", c.path.knots[1], "path");
    } else if (rule == "ramp") {
      c.path.rule = PathRule::Ramp;
      if (!p["values"]) parse_fail("rule ramp needs 'path.values'", p);
      read(p, "values", c.path.knots, "path");
      if (c.path.knots.size() < 2) parse_fail("'path.values' needs at least 2 entries", p["values"]);
    } else {
      parse_fail("path.rule must be linear or ramp, got '" + rule + "'", p["rule"]);
    }
    read(p, "grid", c.path.grid, "path");
  }
  if (auto t = root["tolerances"]) {
    check_keys(t, "tolerances", {"zero_tol", "transport", "h_init", "h_min", "bisect", "gap_closed",
                                 "crossing_delta", "index_one", "det"});
    read(t, "zero_tol", c.tol.zero_tol, "tolerances");
    read(t, "transport", c.tol.transport, "tolerances");
    read(t, "h_init", c.tol.h_init, "tolerances");
    read(t, "h_min", c.tol.h_min, "tolerances");
    read(t, "bisect", c.tol.bisect, "tolerances");
    read(t, "gap_closed", c.tol.gap_closed, "tolerances");
    read(t, "crossing_delta", c.tol.crossing_delta, "tolerances");
    read(t, "index_one", c.tol.index_one, "tolerances");
    read(t, "det", c.tol.det, "tolerances");
  }
  if (auto f = root["flow"]) {
    check_keys(f, "flow", {"mode"});
    read(f, "mode", c.flow_mode, "flow");
    if (c.flow_mode != "kato" && c.flow_mode != "filter") parse_fail("flow.mode must be kato or filter", f["mode"]);
  }
  if (auto s = root["seeds"]) {
    check_keys(s, "seeds", {"master"});
    read(s, "master", c.master_seed, "seeds");
  }
  if (auto e = root["ensemble"]) {
    check_keys(e, "ensemble", {"realizations"});
    read(e, "realizations", c.realizations, "ensemble");
  }
  if (auto f = root["finite_size"]) {
    check_keys(f, "finite_size", {"L", "big"});
    read(f, "L", c.finite_size.L, "finite_size");
    read(f, "big", c.finite_size.big, "finite_size");
  }
  if (auto ct = root["ct"]) {
    check_keys(ct, "ct", {"mu", "epsilon", "z", "instances"});
    read(ct, "mu", c.ct.mu, "ct");
    read(ct, "epsilon", c.ct.epsilon, "ct");
    read(ct, "instances", c.ct.instances, "ct");
    if (auto z = ct["z"]) {
      c.ct.z.clear();
      if (!z.IsSequence()) parse_fail("'ct.z' must be a list of [re, im] pairs", z);
      for (const auto& e : z) {
        if (!e.IsSequence() || e.size() != 2) parse_fail("'ct.z' entries must be [re, im]", e);
        c.ct.z.emplace_back(e[0].as<double>(), e[1].as<double>());
      }
    }
  }
  if (auto w = root["weakstar"]) {
    check_keys(w, "weakstar", {"n_max"});
    read(w, "n_max", c.weakstar_n_max, "weakstar");
  }
  if (auto o = root["output"]) {
    check_keys(o, "output", {"dir", "csv"});
    read(o, "dir", c.out_dir, "output");
    read(o, "csv", c.csv, "output");
  }
  return c;
}

/// Range checks that need the whole config.
inline void validate_config(const ExperimentConfig& c) {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::ParseError, what); };
  if (c.path.grid < 2) bad("path.grid must be >= 2");
  if (c.model.kind == ModelKind::Kitaev) {
    static const std::set<std::string> ok{"t", "mu", "delta"};
    if (!ok.count(c.path.param)) bad("path.param for kitaev must be t, mu or delta, got '" + c.path.param + "'");
    if (c.model.n_sites < 2) bad("model.n_sites must be >= 2");
    if (c.model.boundary == Boundary::Periodic && c.model.n_sites < 3) bad("periodic chain needs n_sites >= 3");
  } else if (c.model.kind == ModelKind::Anderson) {
    static const std::set<std::string> ok{"lambda", "mu", "pairing", "hopping_scale"};
    if (!ok.count(c.path.param)) {
      bad("path.param for anderson must be lambda, mu, pairing or hopping_scale, got '" + c.path.param + "'");
    }
    try {
      c.model.lattice.validate();
    } catch (const Error& e) {
      bad(std::string("model: ") + e.what());
    }
  }
  if (c.realizations < 1) bad("ensemble.realizations must be >= 1");
  if (c.ct.instances < 1) bad("ct.instances must be >= 1");
  if (c.weakstar_n_max < 1) bad("weakstar.n_max must be >= 1");
  if (c.tol.h_min <= 0 || c.tol.h_init < c.tol.h_min) bad("need 0 < tolerances.h_min <= tolerances.h_init");
  if (c.finite_size.L.empty()) bad("finite_size.L must be nonempty");
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  auto c = parse_config_node(root);
  validate_config(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw Error(ErrorKind::ParseError, "cannot open config file " + path);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
  ExperimentConfig c;
  try {
    c = parse_config_node(root);
    validate_config(c);
  } catch (const Error& e) {
    throw Error(ErrorKind::ParseError, path + ": " + std::string(e.what()).substr(std::string("ParseError: ").size()));
  }
  c.source = path;
  return c;
}

inline Json ExperimentConfig::to_json() const {
  Json m;
  m["kind"] = sdcar::experiments::to_string(model.kind);
  switch (model.kind) {
    case ModelKind::Kitaev:
      m["n_sites"] = model.n_sites;
      m["t"] = model.t;
      m["mu"] = model.mu;
      m["delta"] = model.delta;
      m["boundary"] = sdcar::to_string(model.boundary);
      break;
    case ModelKind::Anderson:
      m["d"] = model.lattice.d;
      m["L"] = model.lattice.L;
      m["spins"] = model.lattice.spins;
      m["boundary"] = sdcar::to_string(model.boundary);
      m["epsilon"] = model.lattice.epsilon;
      m["hopping_scale"] = model.hopping_scale;
      m["lambda"] = model.lambda;
      m["mu"] = model.mu;
      m["pairing"] = model.pairing;
      m["seed"] = model.seed ? Json(*model.seed) : Json(nullptr);
      break;
    case ModelKind::Custom:
      m["h0_file"] = model.h0_file;
      m["h1_file"] = model.h1_file;
      break;
  }
  Json p;
  p["param"] = path.param;
  p["rule"] = path.rule == PathRule::Linear ? "linear" : "ramp";
  p["values"] = path.knots;
  p["grid"] = path.grid;
  Json t{{"zero_tol", tol.zero_tol},   {"transport", tol.transport},   {"h_init", tol.h_init},
         {"h_min", tol.h_min},         {"bisect", tol.bisect},         {"gap_closed", tol.gap_closed},
         {"crossing_delta", tol.crossing_delta}, {"index_one", tol.index_one}, {"det", tol.det}};
  Json zs = Json::array();
  for (auto z : ct.z) zs.push_back(complex_to_json(z));
  Json out;
  out["model"] = m;
  out["path"] = p;
  out["tolerances"] = t;
  out["flow"] = {{"mode", flow_mode}};
  out["seeds"] = {{"master", master_seed}};
  out["ensemble"] = {{"realizations", realizations}};
  out["finite_size"] = {{"L", finite_size.L}, {"big", finite_size.big}};
  out["ct"] = {{"mu", ct.mu}, {"epsilon", ct.epsilon}, {"z", zs}, {"instances", ct.instances}};
  out["weakstar"] = {{"n_max", weakstar_n_max}};
  out["output"] = {{"dir", out_dir}, {"csv", csv}};
  return out;
}

}  // namespace sdcar::experiments
