#pragma once

// Manifest loading. A manifest is a YAML document with the top-level keys
// `include`, `manifolds`, `structures`, `maps` and `verify`; the grammar is
// described in docs/manifest.md.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metharm/errors.hpp"
#include "metharm/manifold.hpp"
#include "metharm/metallic.hpp"
#include "metharm/parser.hpp"

namespace metharm {

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"algebraic", "frame_lemmas", "weitzenbock", "generalized", "maps"};
  return names;
}

struct VerifyConfig {
  std::vector<std::string> suites;
  int samples = 200;
  std::uint64_t seed = 42;
  double tol = 1e-8;
  std::optional<std::string> report;
  std::string format = "text";
};

struct MapSpec {
  std::string name;
  std::string source;  // structure names
  std::string target;
  std::vector<Expr> components;
  std::vector<std::string> component_text;
};

struct Manifest {
  std::string origin;
  std::vector<ManifoldPtr> manifolds;
  std::vector<MetallicStructure> structures;
  std::vector<MapSpec> maps;
  VerifyConfig verify;

  const MetallicStructure* structure(const std::string& name) const {
    for (const MetallicStructure& s : structures)
      if (s.name == name) return &s;
    return nullptr;
  }
  ManifoldPtr manifold(const std::string& name) const {
    for (const ManifoldPtr& m : manifolds)
      if (m->name() == name) return m;
    return nullptr;
  }
};

/// Returns the text of an included file, or nullopt when it does not exist.
using IncludeResolver = std::function<std::optional<std::string>(const std::string& name)>;

namespace detail {

inline std::string where(const std::string& origin, const YAML::Node& n) {
  YAML::Mark m = n.Mark();
  if (m.is_null()) return origin;
  return origin + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

[[noreturn]] inline void fail(const std::string& origin, const YAML::Node& n, const std::string& msg) {
  throw ManifestError(where(origin, n) + ": " + msg);
}

template <typename T>
T scalar(const std::string& origin, const YAML::Node& n, const std::string& key) {
  if (!n || !n.IsScalar()) fail(origin, n, "'" + key + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(origin, n, "'" + key + "' has the wrong type");
  }
}

inline const YAML::Node require(const std::string& origin, const YAML::Node& parent, const std::string& key) {
  YAML::Node n = parent[key];
  if (!n) fail(origin, parent, "missing key '" + key + "'");
  return n;
}

inline Expr expression(const std::string& origin, const YAML::Node& n, const std::vector<std::string>& coords) {
  std::string text = scalar<std::string>(origin, n, "expression");
  try {
    return parse(text, coords);
  } catch (const Error& e) {
    fail(origin, n, "in \"" + text + "\": " + e.what());
  }
}

/// String form of a node, used to compare repeated declarations from includes.
inline std::string canonical(const YAML::Node& n) {
  YAML::Emitter e;
  e.SetMapFormat(YAML::Flow);
  e.SetSeqFormat(YAML::Flow);
  e << n;
  return e.c_str();
}

inline ExprMatrix matrix(const std::string& origin, const YAML::Node& n, int dim, const std::vector<std::string>& coords,
                         const std::string& what) {
  if (!n.IsSequence() || static_cast<int>(n.size()) != dim)
    fail(origin, n, what + " must have " + std::to_string(dim) + " rows");
  ExprMatrix m(dim);
  for (int i = 0; i < dim; ++i) {
    YAML::Node row = n[static_cast<std::size_t>(i)];
    if (!row.IsSequence() || static_cast<int>(row.size()) != dim)
      fail(origin, row, what + " row " + std::to_string(i + 1) + " must have " + std::to_string(dim) + " entries");
    for (int j = 0; j < dim; ++j) m(i, j) = expression(origin, row[static_cast<std::size_t>(j)], coords);
  }
  return m;
}

struct Loader {
  IncludeResolver resolve;
  Manifest out;
  std::map<std::string, std::string> manifold_decl, structure_decl;
  std::set<std::string> map_names;
  std::vector<std::string> stack;

  void load(const std::string& text, const std::string& origin, bool top) {
    for (const std::string& s : stack)
      if (s == origin) throw ManifestError(origin + ": include cycle");
    stack.push_back(origin);
    YAML::Node root;
    try {
      root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
      throw ManifestError(origin + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
    if (!root.IsMap()) throw ManifestError(origin + ": top level must be a mapping");
    static const std::set<std::string> keys{"include", "manifolds", "structures", "maps", "verify"};
    for (const auto& kv : root) {
      std::string k = kv.first.as<std::string>();
      if (!keys.count(k)) fail(origin, kv.first, "unknown key '" + k + "'");
    }
    if (YAML::Node inc = root["include"]) {
      if (!inc.IsSequence()) fail(origin, inc, "'include' must be a list of file names");
      for (const YAML::Node& f : inc) {
        std::string name = scalar<std::string>(origin, f, "include");
        std::optional<std::string> body = resolve(name);
        if (!body) fail(origin, f, "cannot read included file '" + name + "'");
        load(*body, name, false);
      }
    }
    if (YAML::Node ms = root["manifolds"]) {
      if (!ms.IsSequence()) fail(origin, ms, "'manifolds' must be a list");
      for (const YAML::Node& m : ms) manifold(origin, m);
    }
    if (YAML::Node ss = root["structures"]) {
      if (!ss.IsSequence()) fail(origin, ss, "'structures' must be a list");
      for (const YAML::Node& s : ss) structure(origin, s);
    }
    if (YAML::Node ps = root["maps"]) {
      if (!ps.IsSequence()) fail(origin, ps, "'maps' must be a list");
      for (const YAML::Node& p : ps) map(origin, p);
    }
    if (top)
      if (YAML::Node v = root["verify"]) verify(origin, v);
    stack.pop_back();
  }

  void manifold(const std::string& origin, const YAML::Node& m) {
    std::string name = scalar<std::string>(origin, require(origin, m, "name"), "name");
    std::string decl = canonical(m);
    if (auto it = manifold_decl.find(name); it != manifold_decl.end()) {
      if (it->second == decl) return;
      fail(origin, m, "manifold '" + name + "' declared twice with different contents");
    }
    YAML::Node cs = require(origin, m, "coords");
    if (!cs.IsSequence() || cs.size() == 0) fail(origin, cs, "'coords' must be a non-empty list");
    std::vector<std::string> coords;
    std::set<std::string> seen;
    for (const YAML::Node& c : cs) {
      std::string v = scalar<std::string>(origin, c, "coords");
      if (v == "pi" || v == "phi") fail(origin, c, "'" + v + "' is reserved");
      if (!seen.insert(v).second) fail(origin, c, "coordinate '" + v + "' repeated");
      coords.push_back(v);
    }
    int n = static_cast<int>(coords.size());
    if (n_declared(m, "dim") && scalar<int>(origin, m["dim"], "dim") != n)
      fail(origin, m["dim"], "'dim' does not match the number of coordinates");
    ExprMatrix g = matrix(origin, require(origin, m, "metric"), n, coords, "metric");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        if (g(i, j).node() != g(j, i).node()) fail(origin, m["metric"], "metric must be symmetric");
    YAML::Node bx = require(origin, m, "box");
    if (!bx.IsSequence() || static_cast<int>(bx.size()) != n) fail(origin, bx, "box must have one interval per coordinate");
    std::vector<Interval> box;
    for (const YAML::Node& iv : bx) {
      if (!iv.IsSequence() || iv.size() != 2) fail(origin, iv, "box interval must be [lo, hi]");
      double lo = scalar<double>(origin, iv[0], "box"), hi = scalar<double>(origin, iv[1], "box");
      if (!(lo < hi)) fail(origin, iv, "box interval must have lo < hi");
      box.push_back({lo, hi});
    }
    manifold_decl[name] = decl;
    out.manifolds.push_back(std::make_shared<ChartedManifold>(name, coords, g, box));
  }

  static bool n_declared(const YAML::Node& m, const char* key) { return static_cast<bool>(m[key]); }

  void structure(const std::string& origin, const YAML::Node& s) {
    std::string name = scalar<std::string>(origin, require(origin, s, "name"), "name");
    std::string decl = canonical(s);
    if (auto it = structure_decl.find(name); it != structure_decl.end()) {
      if (it->second == decl) return;
      fail(origin, s, "structure '" + name + "' declared twice with different contents");
    }
    YAML::Node hn = require(origin, s, "host");
    std::string host = scalar<std::string>(origin, hn, "host");
    ManifoldPtr m = out.manifold(host);
    if (!m) fail(origin, hn, "unknown manifold '" + host + "'");
    double p = scalar<double>(origin, require(origin, s, "p"), "p");
    double q = scalar<double>(origin, require(origin, s, "q"), "q");
    YAML::Node jn = require(origin, s, "J");
    if (jn.IsSequence() && static_cast<int>(jn.size()) != m->dim())
      fail(origin, jn, "J has " + std::to_string(jn.size()) + " rows but manifold '" + host + "' has dimension " +
                           std::to_string(m->dim()));
    ExprMatrix j = matrix(origin, jn, m->dim(), m->coordinates(), "J");
    structure_decl[name] = decl;
    out.structures.push_back(MetallicStructure{name, m, p, q, j});
  }

  void map(const std::string& origin, const YAML::Node& p) {
    MapSpec spec;
    spec.name = scalar<std::string>(origin, require(origin, p, "name"), "name");
    if (!map_names.insert(spec.name).second) fail(origin, p, "map '" + spec.name + "' declared twice");
    YAML::Node sn = require(origin, p, "source"), tn = require(origin, p, "target");
    spec.source = scalar<std::string>(origin, sn, "source");
    spec.target = scalar<std::string>(origin, tn, "target");
    const MetallicStructure* s = out.structure(spec.source);
    const MetallicStructure* t = out.structure(spec.target);
    if (!s) fail(origin, sn, "unknown structure '" + spec.source + "'");
    if (!t) fail(origin, tn, "unknown structure '" + spec.target + "'");
    YAML::Node cn = require(origin, p, "components");
    if (!cn.IsSequence() || static_cast<int>(cn.size()) != t->host->dim())
      fail(origin, cn, "map needs one component per target coordinate (" + std::to_string(t->host->dim()) + ")");
    for (const YAML::Node& c : cn) {
      spec.components.push_back(expression(origin, c, s->host->coordinates()));
      spec.component_text.push_back(c.as<std::string>());
    }
    out.maps.push_back(std::move(spec));
  }

  void verify(const std::string& origin, const YAML::Node& v) {
    VerifyConfig& c = out.verify;
    static const std::set<std::string> keys{"suites", "samples", "seed", "tol", "report", "format"};
    for (const auto& kv : v) {
      std::string k = kv.first.as<std::string>();
      if (!keys.count(k)) fail(origin, kv.first, "unknown verify key '" + k + "'");
    }
    if (YAML::Node s = v["suites"]) {
      if (!s.IsSequence()) fail(origin, s, "'suites' must be a list");
      for (const YAML::Node& n : s) {
        std::string name = scalar<std::string>(origin, n, "suites");
        bool known = false;
        for (const std::string& k : suite_names()) known |= k == name;
        if (!known) fail(origin, n, "unknown suite '" + name + "'");
        c.suites.push_back(name);
      }
    }
    if (v["samples"]) {
      c.samples = scalar<int>(origin, v["samples"], "samples");
      if (c.samples < 1) fail(origin, v["samples"], "'samples' must be positive");
    }
    if (v["seed"]) c.seed = scalar<std::uint64_t>(origin, v["seed"], "seed");
    if (v["tol"]) {
      c.tol = scalar<double>(origin, v["tol"], "tol");
      if (!(c.tol > 0)) fail(origin, v["tol"], "'tol' must be positive");
    }
    if (v["report"]) c.report = scalar<std::string>(origin, v["report"], "report");
    if (v["format"]) {
      c.format = scalar<std::string>(origin, v["format"], "format");
      if (c.format != "text" && c.format != "json") fail(origin, v["format"], "'format' must be text or json");
    }
  }
};

}  // namespace detail

inline std::optional<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) return std::nullopt;
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline Manifest load_manifest_text(const std::string& text, const std::string& origin, IncludeResolver resolve) {
  detail::Loader l{std::move(resolve), {}, {}, {}, {}, {}};
  l.out.origin = origin;
  l.load(text, origin, true);
  if (l.out.verify.suites.empty()) l.out.verify.suites = suite_names();
  return l.out;
}

/// Includes are resolved relative to the manifest's directory.
inline Manifest load_manifest(const std::filesystem::path& path) {
  std::optional<std::string> text = read_file(path);
  if (!text) throw ManifestError(path.string() + ": cannot read file");
  std::filesystem::path dir = path.parent_path();
  return load_manifest_text(*text, path.string(),
                            [dir](const std::string& name) { return read_file(dir / name); });
}

}  // namespace metharm
