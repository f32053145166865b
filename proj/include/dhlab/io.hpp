#pragma once

// JSON for specs and options, checksummed JSON-lines ensembles, the flat
// binary measure layout and CSV exports.

#include "dhlab/core.hpp"
#include "dhlab/ensemble.hpp"
#include "dhlab/measure_lab.hpp"
#include "dhlab/sample_space.hpp"
#include "dhlab/torus_phase.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace dhlab {

using Json = nlohmann::ordered_json;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// ---- specs and options ----------------------------------------------------

inline Json to_json(const HamiltonianSpec& s) {
  Json j;
  j["d"] = s.d;
  j["sigma"] = s.sigma;
  Json terms = Json::array();
  for (const auto& t : s.terms) terms.push_back({{"k", t.k}, {"m", t.m}, {"a", t.a}, {"phase", t.phase}});
  j["terms"] = terms;
  if (s.envelope.active())
    j["envelope"] = {{"plateau", s.envelope.plateau}, {"taper", s.envelope.taper}};
  else
    j["envelope"] = nullptr;
  return j;
}

inline HamiltonianSpec spec_from_json(const Json& j) {
  HamiltonianSpec s;
  try {
    s.d = j.at("d").get<int>();
    s.sigma = j.value("sigma", 0.0);
    if (j.contains("terms"))
      for (const auto& t : j.at("terms"))
        s.terms.push_back({t.at("k").get<std::vector<int>>(), t.value("m", 0), t.at("a").get<double>(),
                           t.value("phase", 0.0)});
    if (j.contains("envelope") && !j.at("envelope").is_null()) {
      s.envelope.plateau = j.at("envelope").at("plateau").get<double>();
      s.envelope.taper = j.at("envelope").at("taper").get<double>();
    }
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("HamiltonianSpec JSON: ") + e.what());
  }
  s.validate();
  return s;
}

/// Hash of the canonical JSON of the spec; sigma excluded (it is carried
/// separately by ensembles and measures).
inline std::uint64_t spec_hash(const HamiltonianSpec& s) {
  HamiltonianSpec c = s;
  c.sigma = 0.0;
  return fnv1a(to_json(c).dump());
}

inline const char* to_string(SeedStrategy s) { return s == SeedStrategy::Grid ? "grid" : "reduced_action"; }

inline SeedStrategy strategy_from_string(const std::string& s) {
  if (s == "grid") return SeedStrategy::Grid;
  if (s == "reduced_action") return SeedStrategy::ReducedAction;
  throw InvalidArgument("unknown seed strategy '" + s + "' (grid | reduced_action)");
}

inline Json to_json(const OrbitOptions& o) {
  return {{"substeps_per_piece", o.substeps_per_piece},
          {"newton_tol", o.newton_tol},
          {"max_iter", o.max_iter},
          {"fd_step", o.fd_step},
          {"cond_limit", o.cond_limit},
          {"continuation_steps", o.continuation_steps},
          {"seeds_per_axis", o.seeds_per_axis},
          {"dedup_tol", o.dedup_tol},
          {"use_cutoff", o.use_cutoff},
          {"strategy", to_string(o.strategy)}};
}

inline OrbitOptions orbit_options_from_json(const Json& j) {
  OrbitOptions o;
  o.substeps_per_piece = j.value("substeps_per_piece", o.substeps_per_piece);
  o.newton_tol = j.value("newton_tol", o.newton_tol);
  o.max_iter = j.value("max_iter", o.max_iter);
  o.fd_step = j.value("fd_step", o.fd_step);
  o.cond_limit = j.value("cond_limit", o.cond_limit);
  o.continuation_steps = j.value("continuation_steps", o.continuation_steps);
  o.seeds_per_axis = j.value("seeds_per_axis", o.seeds_per_axis);
  o.dedup_tol = j.value("dedup_tol", o.dedup_tol);
  o.use_cutoff = j.value("use_cutoff", o.use_cutoff);
  o.strategy = strategy_from_string(j.value("strategy", std::string(to_string(o.strategy))));
  return o;
}

inline Json to_json(const MeasureGrid& g) {
  return {{"d", g.d}, {"T", g.T}, {"nq", g.nq}, {"np", g.np}, {"P", g.P}};
}

inline MeasureGrid measure_grid_from_json(const Json& j) {
  MeasureGrid g;
  g.d = j.value("d", g.d);
  g.T = j.value("T", g.T);
  g.nq = j.value("nq", g.nq);
  g.np = j.value("np", g.np);
  g.P = j.value("P", g.P);
  return g;
}

inline Json to_json(const MeasureMeta& m) {
  return {{"n", m.n}, {"M", m.M}, {"label", m.label}, {"sigma", m.sigma}, {"spec_hash", hex64(m.spec_hash)}};
}

inline MeasureMeta measure_meta_from_json(const Json& j) {
  MeasureMeta m;
  m.n = j.value("n", 0);
  m.M = j.value("M", std::size_t{0});
  m.label = j.value("label", std::string());
  m.sigma = j.value("sigma", 0.0);
  m.spec_hash = std::stoull(j.value("spec_hash", std::string("0")), nullptr, 16);
  return m;
}

// ---- files ----------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Writes through a temporary file and renames, so readers never see a
/// partial artifact.
inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- ensembles as JSON lines ----------------------------------------------
//
// Line 1: header (spec, sigma, n, M, base seed, options, key). Then one
// record per (sample, label), or one record with "error" for a failed
// sample. Last line: {"checksum": FNV-1a of all preceding bytes}.

inline std::string ensemble_jsonl(const OrbitEnsemble& e, const std::string& key = {}) {
  std::string body;
  Json head = {{"kind", "orbit_ensemble"},
               {"n", e.n},
               {"d", e.d()},
               {"M", e.samples.size()},
               {"sigma", e.sigma},
               {"base_seed", e.base_seed},
               {"key", key},
               {"spec", to_json(e.spec)},
               {"options", to_json(e.options)}};
  body += head.dump() + '\n';
  for (const auto& s : e.samples) {
    if (!s.ok) {
      body += Json{{"index", s.index}, {"seed", s.seed}, {"n", e.n}, {"error", s.error}}.dump() + '\n';
      continue;
    }
    if (s.orbits.empty())
      body += Json{{"index", s.index}, {"seed", s.seed}, {"n", e.n}, {"morse_bott", s.morse_bott}}.dump() + '\n';
    for (const auto& o : s.orbits) {
      Json r = {{"index", s.index},
                {"seed", s.seed},
                {"n", e.n},
                {"label", o.label},
                {"morse_bott", s.morse_bott},
                {"action", o.action},
                {"action_legendre", o.action_legendre},
                {"q0", o.q0},
                {"p0", o.p0},
                {"residual", o.residual},
                {"iterations", o.iterations}};
      body += r.dump() + '\n';
    }
  }
  body += Json{{"checksum", hex64(fnv1a(body))}}.dump() + '\n';
  return body;
}

inline void write_ensemble(const std::filesystem::path& path, const OrbitEnsemble& e, const std::string& key = {}) {
  write_file(path, ensemble_jsonl(e, key));
}

struct LoadedEnsemble {
  OrbitEnsemble ensemble;
  std::string key;
};

/// Parses and verifies an ensemble file; any damage raises ChecksumError
/// naming the file.
inline LoadedEnsemble read_ensemble(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto fail = [&](const std::string& why) { throw ChecksumError(path.string() + ": " + why); };
  if (text.empty() || text.back() != '\n') fail("truncated file");
  const std::size_t last = text.rfind('\n', text.size() - 2);
  if (last == std::string::npos) fail("missing checksum line");
  const std::string body = text.substr(0, last + 1);
  std::string stored;
  try {
    stored = Json::parse(text.substr(last + 1)).at("checksum").get<std::string>();
  } catch (const Json::exception&) {
    fail("missing checksum line");
  }
  if (stored != hex64(fnv1a(body))) fail("checksum mismatch");

  LoadedEnsemble out;
  OrbitEnsemble& e = out.ensemble;
  std::istringstream in(body);
  std::string line;
  try {
    std::getline(in, line);
    const Json head = Json::parse(line);
    if (head.value("kind", std::string()) != "orbit_ensemble") fail("not an orbit ensemble");
    e.spec = spec_from_json(head.at("spec"));
    e.sigma = head.at("sigma").get<double>();
    e.n = head.at("n").get<int>();
    e.base_seed = head.at("base_seed").get<std::uint64_t>();
    e.options = orbit_options_from_json(head.at("options"));
    out.key = head.value("key", std::string());
    const std::size_t M = head.at("M").get<std::size_t>();
    while (std::getline(in, line)) {
      const Json r = Json::parse(line);
      const auto index = r.at("index").get<std::uint64_t>();
      if (e.samples.empty() || e.samples.back().index != index) {
        SampleRecord s;
        s.index = index;
        s.seed = r.at("seed").get<std::uint64_t>();
        e.samples.push_back(s);
      }
      SampleRecord& s = e.samples.back();
      if (r.contains("error")) {
        s.ok = false;
        s.error = r.at("error").get<std::string>();
        continue;
      }
      s.morse_bott = r.at("morse_bott").get<bool>();
      if (!r.contains("label")) continue;
      OrbitRecord o;
      o.label = r.at("label").get<std::string>();
      o.action = r.at("action").get<double>();
      o.action_legendre = r.at("action_legendre").get<double>();
      o.q0 = r.at("q0").get<std::vector<double>>();
      o.p0 = r.at("p0").get<std::vector<double>>();
      o.residual = r.at("residual").get<double>();
      o.iterations = r.at("iterations").get<int>();
      s.orbits.push_back(std::move(o));
    }
    if (e.samples.size() != M) fail("sample count differs from the header");
  } catch (const Json::exception& ex) {
    fail(std::string("malformed record: ") + ex.what());
  } catch (const InvalidArgument& ex) {
    fail(std::string("invalid header: ") + ex.what());
  }
  return out;
}

// ---- measures -------------------------------------------------------------
//
// "DHLM" | u32 version | u64 header bytes | header JSON | f64 mass, row-major
// time-q-p, little endian as on every supported host.

inline constexpr char kMeasureMagic[4] = {'D', 'H', 'L', 'M'};
inline constexpr std::uint32_t kMeasureVersion = 1;

inline std::string measure_bytes(const EmpiricalMeasure& m, const Json& extra = Json::object()) {
  Json head = {{"grid", to_json(m.grid)}, {"meta", to_json(m.meta)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) head[it.key()] = it.value();
  const std::string h = head.dump();
  const std::uint64_t hl = h.size();
  std::string out(kMeasureMagic, 4);
  out.append(reinterpret_cast<const char*>(&kMeasureVersion), 4);
  out.append(reinterpret_cast<const char*>(&hl), 8);
  out += h;
  out.append(reinterpret_cast<const char*>(m.mass.data()), m.mass.size() * sizeof(double));
  return out;
}

inline void write_measure(const std::filesystem::path& path, const EmpiricalMeasure& m, const Json& extra = Json::object()) {
  write_file(path, measure_bytes(m, extra));
}

inline EmpiricalMeasure read_measure(const std::filesystem::path& path) {
  const std::string b = read_file(path);
  const auto fail = [&](const std::string& why) { throw ChecksumError(path.string() + ": " + why); };
  if (b.size() < 16 || std::memcmp(b.data(), kMeasureMagic, 4) != 0) fail("not a measure file");
  std::uint32_t version = 0;
  std::uint64_t hl = 0;
  std::memcpy(&version, b.data() + 4, 4);
  std::memcpy(&hl, b.data() + 8, 8);
  if (version != kMeasureVersion) fail("unsupported version " + std::to_string(version));
  if (16 + hl > b.size()) fail("truncated header");
  EmpiricalMeasure m;
  try {
    const Json head = Json::parse(b.substr(16, hl));
    m.grid = measure_grid_from_json(head.at("grid"));
    m.meta = measure_meta_from_json(head.at("meta"));
  } catch (const Json::exception& e) {
    fail(std::string("bad header: ") + e.what());
  }
  const std::size_t count = m.grid.slices() * m.grid.slice_cells();
  if (b.size() != 16 + hl + count * sizeof(double)) fail("payload size mismatch");
  m.mass.resize(count);
  std::memcpy(m.mass.data(), b.data() + 16 + hl, count * sizeof(double));
  return m;
}

/// Long-format marginals: one row per (slice, axis, bin).
inline std::string marginals_csv(const EmpiricalMeasure& m) {
  std::ostringstream os;
  os.precision(17);
  os << "n,M,label,sigma,T,nq,np,P,j,t,axis,bin,center,mass\n";
  const auto& g = m.grid;
  for (int j = 0; j <= g.T; ++j)
    for (int axis = 0; axis < 2 * g.d; ++axis) {
      const bool is_q = axis < g.d;
      const auto v = m.marginal(j, axis);
      const std::string name = (is_q ? "q" : "p") + std::to_string(1 + (is_q ? axis : axis - g.d));
      for (std::size_t k = 0; k < v.size(); ++k) {
        const double c = is_q ? g.q_center(static_cast<int>(k)) : g.p_center(static_cast<int>(k));
        os << m.meta.n << ',' << m.meta.M << ',' << m.meta.label << ',' << m.meta.sigma << ',' << g.T << ','
           << g.nq << ',' << g.np << ',' << g.P << ',' << j << ',' << g.time(j) << ',' << name << ',' << k << ','
           << c << ',' << v[k] << '\n';
      }
    }
  return os.str();
}

/// Walk at its nodes: t, W_1..W_d.
inline std::string walk_csv(const WalkPath& w) {
  std::ostringstream os;
  os.precision(17);
  os << 't';
  for (int c = 0; c < w.d(); ++c) os << ",W_" << c + 1;
  os << '\n';
  for (int i = 0; i <= w.n(); ++i) {
    os << static_cast<double>(i) / w.n();
    for (int c = 0; c < w.d(); ++c) os << ',' << w.node(i, c);
    os << '\n';
  }
  return os.str();
}

}  // namespace dhlab
