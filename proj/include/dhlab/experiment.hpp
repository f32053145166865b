#pragma once

// Experiment configuration and the drivers behind the CLI: orbit ensembles
// over an n-ladder, convergence reports, Fokker-Planck checks and Floer
// certificates. Runs are single-threaded and emit results in task-key order
// (n, then sample index), so identical configs give identical files.

#include "dhlab/ensemble.hpp"
#include "dhlab/floer_continuation.hpp"
#include "dhlab/fokker_planck.hpp"
#include "dhlab/io.hpp"
#include "dhlab/measure_lab.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dhlab {

namespace fs = std::filesystem;

struct FloerConfig {
  int n = 256;
  int samples = 32;
  FloerOptions options;
  int export_cylinders = 1;  // CSV grids written for the first few pairs
};

struct ExperimentConfig {
  HamiltonianSpec spec;
  double sigma = 0.3;
  std::vector<int> n_ladder{64, 128, 256, 512};
  int M = 1000;
  std::uint64_t seed = 2024;
  OrbitOptions orbit;
  MeasureGrid measure;
  FPGrid fp;
  PeriodicOptions periodic;
  int weak_bank = 16;
  double weak_width = 0.5;
  double tightness_alpha = 0.25;
  int tightness_samples = 1000;
  std::optional<FloerConfig> floer;
  std::string output_dir = "out";

  void validate() const {
    spec.validate();
    require(spec.d == 1 || spec.d == 2, "config: d must be 1 or 2");
    require(sigma >= 0.0, "config: sigma must be nonnegative");
    require(!n_ladder.empty(), "config: n_ladder is empty");
    for (std::size_t i = 0; i < n_ladder.size(); ++i) {
      require(n_ladder[i] >= 1, "config: n_ladder entries must be positive");
      require(i == 0 || n_ladder[i] > n_ladder[i - 1], "config: n_ladder must be strictly increasing");
    }
    require(M >= 1, "config: M must be at least 1");
    require(measure.d == spec.d, "config: measure grid dimension differs from the spec");
    measure.validate();
    require(fp.d == spec.d, "config: FP grid dimension differs from the spec");
    fp.measure_grid().validate();
    require(weak_bank >= 1, "config: weak_bank must be at least 1");
    require(weak_width > 0.0, "config: weak_width must be positive");
    require(tightness_alpha > 0.0 && tightness_alpha <= 1.0, "config: tightness_alpha must lie in (0,1]");
    if (floer) {
      require(floer->n >= 1 && floer->samples >= 1, "config: floer n and samples must be positive");
      require(floer->options.Nt % 2 == 1 && floer->options.Ns % 2 == 0, "config: floer needs odd Nt and even Ns");
      require(floer->options.S > 0.0 && floer->options.tau_steps >= 1, "config: floer S and tau_steps must be positive");
    }
  }
};

inline Json to_json(const ExperimentConfig& c) {
  HamiltonianSpec spec = c.spec;
  spec.sigma = c.sigma;
  Json j;
  j["spec"] = to_json(spec);
  j["sigma"] = c.sigma;
  j["n_ladder"] = c.n_ladder;
  j["M"] = c.M;
  j["seed"] = c.seed;
  j["orbit"] = to_json(c.orbit);
  j["measure_grid"] = to_json(c.measure);
  j["fp_grid"] = {{"d", c.fp.d}, {"nq", c.fp.nq}, {"np", c.fp.np}, {"P", c.fp.P},
                  {"T", c.fp.T}, {"steps", c.fp.steps}, {"cfl", c.fp.cfl}};
  j["periodic"] = {{"power_iters", c.periodic.power_iters},
                   {"tol", c.periodic.tol},
                   {"check_uniqueness", c.periodic.check_uniqueness},
                   {"uniqueness_tol", c.periodic.uniqueness_tol}};
  j["weak"] = {{"bank", c.weak_bank}, {"width", c.weak_width}};
  j["tightness"] = {{"alpha", c.tightness_alpha}, {"samples", c.tightness_samples}};
  if (c.floer) {
    const auto& f = *c.floer;
    j["floer"] = {{"n", f.n},
                  {"samples", f.samples},
                  {"S", f.options.S},
                  {"Ns", f.options.Ns},
                  {"Nt", f.options.Nt},
                  {"tau_steps", f.options.tau_steps},
                  {"tol", f.options.tol},
                  {"max_newton", f.options.max_newton},
                  {"min_tau_fraction", f.options.min_tau_fraction},
                  {"export_cylinders", f.export_cylinders}};
  } else {
    j["floer"] = nullptr;
  }
  j["output_dir"] = c.output_dir;
  return j;
}

/// Missing fields take their defaults; the measure and FP grids inherit
/// d from the spec and the FP grid inherits the measure bins.
inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    c.spec = spec_from_json(j.at("spec"));
    c.sigma = j.value("sigma", c.spec.sigma != 0.0 ? c.spec.sigma : c.sigma);
    c.spec.sigma = c.sigma;
    if (j.contains("n_ladder")) c.n_ladder = j.at("n_ladder").get<std::vector<int>>();
    c.M = j.value("M", c.M);
    c.seed = j.value("seed", c.seed);
    if (j.contains("orbit")) c.orbit = orbit_options_from_json(j.at("orbit"));
    c.measure.d = c.spec.d;
    if (j.contains("measure_grid")) {
      c.measure = measure_grid_from_json(j.at("measure_grid"));
      c.measure.d = j.at("measure_grid").value("d", c.spec.d);
    }
    c.fp = FPGrid{c.measure.d, c.measure.nq, c.measure.np, c.measure.P, c.measure.T};
    if (j.contains("fp_grid")) {
      const auto& f = j.at("fp_grid");
      c.fp.d = f.value("d", c.fp.d);
      c.fp.nq = f.value("nq", c.fp.nq);
      c.fp.np = f.value("np", c.fp.np);
      c.fp.P = f.value("P", c.fp.P);
      c.fp.T = f.value("T", c.fp.T);
      c.fp.steps = f.value("steps", c.fp.steps);
      c.fp.cfl = f.value("cfl", c.fp.cfl);
    }
    if (j.contains("periodic")) {
      const auto& p = j.at("periodic");
      c.periodic.power_iters = p.value("power_iters", c.periodic.power_iters);
      c.periodic.tol = p.value("tol", c.periodic.tol);
      c.periodic.check_uniqueness = p.value("check_uniqueness", c.periodic.check_uniqueness);
      c.periodic.uniqueness_tol = p.value("uniqueness_tol", c.periodic.uniqueness_tol);
    }
    if (j.contains("weak")) {
      c.weak_bank = j.at("weak").value("bank", c.weak_bank);
      c.weak_width = j.at("weak").value("width", c.weak_width);
    }
    if (j.contains("tightness")) {
      c.tightness_alpha = j.at("tightness").value("alpha", c.tightness_alpha);
      c.tightness_samples = j.at("tightness").value("samples", c.tightness_samples);
    }
    if (j.contains("floer") && !j.at("floer").is_null()) {
      const auto& f = j.at("floer");
      FloerConfig fc;
      fc.n = f.value("n", fc.n);
      fc.samples = f.value("samples", fc.samples);
      fc.options.S = f.value("S", fc.options.S);
      fc.options.Ns = f.value("Ns", fc.options.Ns);
      fc.options.Nt = f.value("Nt", fc.options.Nt);
      fc.options.tau_steps = f.value("tau_steps", fc.options.tau_steps);
      fc.options.tol = f.value("tol", fc.options.tol);
      fc.options.max_newton = f.value("max_newton", fc.options.max_newton);
      fc.options.min_tau_fraction = f.value("min_tau_fraction", fc.options.min_tau_fraction);
      fc.export_cylinders = f.value("export_cylinders", fc.export_cylinders);
      c.floer = fc;
    }
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

/// Writes the config with every default materialised.
inline void write_config_copy(const ExperimentConfig& c) {
  write_file(fs::path(c.output_dir) / "config.json", to_json(c).dump(2) + "\n");
}

/// Content key of the orbit ensemble at one n.
inline std::string orbit_key(const ExperimentConfig& c, int n) {
  const Json j = {{"spec", to_json(c.spec)}, {"sigma", c.sigma}, {"n", n},
                  {"M", c.M}, {"seed", c.seed}, {"orbit", to_json(c.orbit)}};
  return hex64(fnv1a(j.dump()));
}

inline fs::path ensemble_path(const ExperimentConfig& c, int n) {
  return fs::path(c.output_dir) / "ensembles" / ("orbits_n" + std::to_string(n) + ".jsonl");
}

/// Labels of an ensemble ordered by mean action.
inline std::vector<std::string> ordered_labels(const OrbitEnsemble& e) {
  std::vector<std::pair<double, std::string>> v;
  for (const auto& [label, st] : action_table(e)) v.push_back({st.mean, label});
  std::sort(v.begin(), v.end());
  std::vector<std::string> out;
  for (auto& [m, l] : v) out.push_back(l);
  return out;
}

// ---- orbits ---------------------------------------------------------------

struct GapRow {
  std::string lo, hi;
  std::size_t samples = 0;  // samples carrying both labels
  double min = 0.0, mean = 0.0, q05 = 0.0;
};

struct OrbitLevel {
  int n = 0;
  std::size_t samples = 0;
  std::vector<std::pair<std::uint64_t, std::string>> failures;  // (sample index, error)
  bool morse_bott = false;
  bool resumed = false;
  double full_family_fraction = 0.0;  // samples with at least d+1 orbits
  std::map<std::string, LabelStats> actions;
  std::vector<GapRow> gaps;
  double mb_action_mean = 0.0;       // Morse-Bott case only
  double mb_reference_action = 0.0;  // sigma^2/2 mean W(1)^2 over the same samples
};

struct OrbitsReport {
  std::vector<OrbitLevel> levels;
};

/// Gap statistics between consecutive labels of the action chain.
inline std::vector<GapRow> gap_table(const OrbitEnsemble& e) {
  std::vector<GapRow> rows;
  const auto labels = ordered_labels(e);
  for (std::size_t k = 0; k + 1 < labels.size(); ++k) {
    GapRow r;
    r.lo = labels[k];
    r.hi = labels[k + 1];
    std::vector<double> g;
    for (const auto& s : e.samples)
      if (auto v = sample_gap(s, r.lo, r.hi)) g.push_back(*v);
    r.samples = g.size();
    if (!g.empty()) {
      r.min = *std::min_element(g.begin(), g.end());
      for (double x : g) r.mean += x;
      r.mean /= static_cast<double>(g.size());
      r.q05 = quantile(g, 0.05);
    }
    rows.push_back(r);
  }
  return rows;
}

inline OrbitLevel summarize_level(const OrbitEnsemble& e) {
  OrbitLevel L;
  L.n = e.n;
  L.samples = e.samples.size();
  std::size_t full = 0, mb = 0;
  for (const auto& s : e.samples) {
    if (!s.ok) {
      L.failures.push_back({s.index, s.error});
      continue;
    }
    if (s.morse_bott) ++mb;
    if (static_cast<int>(s.orbits.size()) >= e.d() + 1 || s.morse_bott) ++full;
  }
  L.morse_bott = mb > 0;
  L.full_family_fraction = L.samples ? static_cast<double>(full) / static_cast<double>(L.samples) : 0.0;
  L.actions = action_table(e);
  L.gaps = gap_table(e);
  if (L.morse_bott) {
    double a = 0.0, w2 = 0.0;
    std::size_t count = 0;
    for (const auto& s : e.samples) {
      if (!s.ok || s.orbits.empty()) continue;
      const WalkPath w = make_walk(e.n, e.d(), s.seed);
      double sq = 0.0;
      for (int c = 0; c < e.d(); ++c) sq += w.node(e.n, c) * w.node(e.n, c);
      a += s.orbits.front().action;
      w2 += sq;
      ++count;
    }
    if (count) {
      L.mb_action_mean = a / static_cast<double>(count);
      L.mb_reference_action = 0.5 * e.sigma * e.sigma * w2 / static_cast<double>(count);
    }
  }
  return L;
}

/// Loads the ensemble at n when a valid file with the same content key
/// exists, otherwise solves and writes it. A damaged file is replaced.
inline OrbitEnsemble ensure_ensemble(const ExperimentConfig& c, int n, bool* resumed = nullptr) {
  const auto path = ensemble_path(c, n);
  const std::string key = orbit_key(c, n);
  if (resumed) *resumed = false;
  if (fs::exists(path)) {
    try {
      auto loaded = read_ensemble(path);
      if (loaded.key == key) {
        if (resumed) *resumed = true;
        return std::move(loaded.ensemble);
      }
    } catch (const ChecksumError&) {
    }
  }
  auto e = build_ensemble(c.spec, c.sigma, n, c.seed, 0, static_cast<std::uint64_t>(c.M), c.orbit);
  write_ensemble(path, e, key);
  return e;
}

inline OrbitsReport run_orbits(const ExperimentConfig& c) {
  c.validate();
  write_config_copy(c);
  OrbitsReport rep;
  std::ostringstream actions, gaps;
  actions.precision(12);
  gaps.precision(12);
  actions << "n,M,seed,sigma,label,count,mean,q05,q50,q95\n";
  gaps << "n,M,seed,sigma,lo,hi,samples,min_gap,mean_gap,q05_gap\n";
  Json summary = Json::array();
  for (int n : c.n_ladder) {
    bool resumed = false;
    const auto e = ensure_ensemble(c, n, &resumed);
    OrbitLevel L = summarize_level(e);
    L.resumed = resumed;
    for (const auto& [label, st] : L.actions)
      actions << n << ',' << c.M << ',' << c.seed << ',' << c.sigma << ',' << label << ',' << st.count << ','
              << st.mean << ',' << st.q05 << ',' << st.q50 << ',' << st.q95 << '\n';
    for (const auto& g : L.gaps)
      gaps << n << ',' << c.M << ',' << c.seed << ',' << c.sigma << ',' << g.lo << ',' << g.hi << ',' << g.samples
           << ',' << g.min << ',' << g.mean << ',' << g.q05 << '\n';
    Json fails = Json::array();
    for (const auto& [idx, err] : L.failures) fails.push_back({{"index", idx}, {"error", err}});
    Json level = {{"n", n},
                  {"M", c.M},
                  {"seed", c.seed},
                  {"samples", L.samples},
                  {"failures", fails},
                  {"full_family_fraction", L.full_family_fraction},
                  {"morse_bott", L.morse_bott}};
    if (L.morse_bott) {
      level["mb_action_mean"] = L.mb_action_mean;
      level["mb_reference_action"] = L.mb_reference_action;
      level["mb_reference_limit"] = 0.5 * c.sigma * c.sigma;
    }
    summary.push_back(level);
    rep.levels.push_back(std::move(L));
  }
  const fs::path out(c.output_dir);
  write_file(out / "actions.csv", actions.str());
  write_file(out / "gaps.csv", gaps.str());
  write_file(out / "orbits_summary.json", summary.dump(2) + "\n");
  return rep;
}

// ---- measures and convergence ---------------------------------------------

/// Measures per label at one n, written as binary plus CSV marginals.
inline std::map<std::string, EmpiricalMeasure> build_measures(const ExperimentConfig& c, const OrbitEnsemble& e) {
  std::map<std::string, EmpiricalMeasure> out;
  const auto h = spec_hash(c.spec);
  const fs::path dir = fs::path(c.output_dir) / "measures";
  for (const auto& label : ordered_labels(e)) {
    auto m = accumulate(e, label, c.measure, h);
    const std::string stem = "rho_n" + std::to_string(e.n) + "_" + label;
    write_measure(dir / (stem + ".bin"), m, {{"seed", c.seed}});
    write_file(dir / (stem + "_marginals.csv"), marginals_csv(m));
    out.emplace(label, std::move(m));
  }
  return out;
}

inline fs::path fp_path(const ExperimentConfig& c) { return fs::path(c.output_dir) / "fp" / "periodic.bin"; }

inline std::string fp_key(const ExperimentConfig& c) {
  const Json j = {{"spec", to_json(c.spec)}, {"sigma", c.sigma}, {"fp_grid", to_json(c)["fp_grid"]},
                  {"periodic", to_json(c)["periodic"]}};
  return hex64(fnv1a(j.dump()));
}

struct FPResult {
  EmpiricalMeasure measure;
  int iterations = 0;
  double defect = 0.0;
  bool nonunique = false;
  bool resumed = false;
};

/// Periodic Fokker-Planck solution, reused from disk when the key matches.
inline FPResult ensure_periodic(const ExperimentConfig& c) {
  const auto path = fp_path(c);
  const std::string key = fp_key(c);
  if (fs::exists(path)) {
    try {
      const std::string b = read_file(path);
      auto m = read_measure(path);
      std::uint64_t hl = 0;
      std::memcpy(&hl, b.data() + 8, 8);
      const Json head = Json::parse(b.substr(16, hl));
      if (head.value("key", std::string()) == key) {
        FPResult r;
        r.measure = std::move(m);
        r.iterations = head.value("iterations", 0);
        r.defect = head.value("defect", 0.0);
        r.nonunique = head.value("nonunique", false);
        r.resumed = true;
        return r;
      }
    } catch (const std::exception&) {
    }
  }
  FokkerPlanck fp(c.spec, c.sigma, c.fp);
  auto sol = periodic_solve(fp, c.periodic);
  sol.measure.meta = MeasureMeta{0, 0, "fp", c.sigma, spec_hash(c.spec)};
  write_measure(path, sol.measure,
                {{"key", key}, {"iterations", sol.iterations}, {"defect", sol.defect}, {"nonunique", sol.nonunique}});
  write_file(fs::path(c.output_dir) / "fp" / "periodic_marginals.csv", marginals_csv(sol.measure));
  return FPResult{std::move(sol.measure), sol.iterations, sol.defect, sol.nonunique, false};
}

struct LabelTrend {
  std::string label;
  std::vector<std::pair<int, double>> cauchy;  // (n, distance to the next rung)
  std::vector<std::pair<int, double>> weak;
  std::vector<std::pair<int, double>> control;
  double fp_distance = -1.0;  // at the largest n; negative when not computed
  bool cauchy_decreasing = false;
  bool weak_decreasing = false;
  double control_ratio = 0.0;  // min over n of control / weak
};

struct ConvergenceReport {
  std::vector<std::string> notices;
  std::vector<std::pair<int, std::string>> missing;  // (n, reason)
  std::vector<QuantileRow> tightness;
  std::vector<LabelTrend> labels;
  double bin_width = 0.0;
  bool fp_computed = false;
  bool fp_nonunique = false;
  int fp_iterations = 0;

  /// Certificates: strictly decreasing Cauchy and weak-residual columns,
  /// control at least 10x the residual and FP agreement within 3 bin widths.
  bool passed() const {
    if (!missing.empty() || labels.empty()) return false;
    for (const auto& t : labels) {
      if (t.cauchy.size() >= 2 && !t.cauchy_decreasing) return false;
      if (t.weak.size() >= 2 && !t.weak_decreasing) return false;
      if (t.control_ratio < 10.0) return false;
      if (fp_computed && !(t.fp_distance >= 0.0 && t.fp_distance <= 3.0 * bin_width)) return false;
    }
    return true;
  }
};

inline bool strictly_decreasing(const std::vector<std::pair<int, double>>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i].second < v[i - 1].second)) return false;
  return true;
}

/// Reads the ensembles of the ladder (missing or damaged files are reported
/// per n; a checksum failure is rethrown naming the file), then writes
/// convergence.csv and report.json.
inline ConvergenceReport run_convergence(const ExperimentConfig& c, bool with_fp = true) {
  c.validate();
  ConvergenceReport rep;
  rep.bin_width = c.measure.bin_width();
  std::vector<int> ns;
  std::map<int, std::map<std::string, EmpiricalMeasure>> measures;
  std::map<int, std::map<std::string, double>> controls;
  std::ostringstream csv;
  csv.precision(12);
  csv << "section,metric,label,n,n_next,M,seed,T,nq,np,P,value\n";
  const auto row = [&](const std::string& section, const std::string& metric, const std::string& label, int n,
                       int n2, double v) {
    csv << section << ',' << metric << ',' << label << ',' << n << ',' << n2 << ',' << c.M << ',' << c.seed << ','
        << c.measure.T << ',' << c.measure.nq << ',' << c.measure.np << ',' << c.measure.P << ',' << v << '\n';
  };

  for (int n : c.n_ladder) {
    const auto path = ensemble_path(c, n);
    if (!fs::exists(path)) {
      rep.missing.push_back({n, "missing ensemble file " + path.string()});
      continue;
    }
    const auto e = read_ensemble(path).ensemble;
    ns.push_back(n);
    measures[n] = build_measures(c, e);
    const auto q = tightness_report(e, "", c.tightness_alpha, static_cast<std::size_t>(c.tightness_samples));
    rep.tightness.push_back(q);
    row("tightness", "c0_q50", "", n, 0, q.c0_q50);
    row("tightness", "c0_q90", "", n, 0, q.c0_q90);
    row("tightness", "c0_q99", "", n, 0, q.c0_q99);
    row("tightness", "holder_q50", "", n, 0, q.holder_q50);
    row("tightness", "holder_q90", "", n, 0, q.holder_q90);
    row("tightness", "holder_q99", "", n, 0, q.holder_q99);
    for (auto& [label, m] : measures[n]) {
      const auto ctrl = accumulate(corrupted_control(ensemble_slices(e, label, c.measure.T), c.measure.T),
                                   c.measure, m.meta);
      controls[n][label] = weak_residual(ctrl, c.spec, c.sigma, c.weak_bank, c.weak_width);
    }
  }

  std::vector<std::string> labels;
  if (!ns.empty())
    for (const auto& [label, m] : measures[ns.back()]) labels.push_back(label);

  std::optional<FPResult> fp;
  if (with_fp && !ns.empty()) {
    fp = ensure_periodic(c);
    rep.fp_computed = true;
    rep.fp_nonunique = fp->nonunique;
    rep.fp_iterations = fp->iterations;
    row("fp", "iterations", "fp", 0, 0, fp->iterations);
    row("fp", "defect", "fp", 0, 0, fp->defect);
    row("fp", "weak_residual", "fp", 0, 0, weak_residual(fp->measure, c.spec, c.sigma, c.weak_bank, c.weak_width));
  }

  if (ns.size() < 2) rep.notices.push_back("Cauchy section omitted: the ladder has fewer than two available n");
  for (const auto& label : labels) {
    LabelTrend t;
    t.label = label;
    t.control_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ns.size(); ++k) {
      const int n = ns[k];
      const auto it = measures[n].find(label);
      if (it == measures[n].end()) continue;
      const double w = weak_residual(it->second, c.spec, c.sigma, c.weak_bank, c.weak_width);
      const double ctrl = controls[n][label];
      t.weak.push_back({n, w});
      t.control.push_back({n, ctrl});
      t.control_ratio = std::min(t.control_ratio, w > 0.0 ? ctrl / w : std::numeric_limits<double>::infinity());
      row("weak", "residual", label, n, 0, w);
      row("weak", "control", label, n, 0, ctrl);
      row("action", "action_of_measure", label, n, 0, action_of_measure(it->second, c.spec));
      if (k + 1 < ns.size()) {
        const auto jt = measures[ns[k + 1]].find(label);
        if (jt != measures[ns[k + 1]].end()) {
          const double dist = measure_distance(it->second, jt->second);
          t.cauchy.push_back({n, dist});
          row("cauchy", "measure_distance", label, n, ns[k + 1], dist);
        }
      }
    }
    if (fp && fp->measure.grid == measures[ns.back()].at(label).grid) {
      t.fp_distance = measure_distance(fp->measure, measures[ns.back()].at(label));
      row("fp", "measure_distance", label, ns.back(), 0, t.fp_distance);
    } else if (fp) {
      rep.notices.push_back("FP grid differs from the measure grid; cross-validation skipped for " + label);
    }
    t.cauchy_decreasing = strictly_decreasing(t.cauchy);
    t.weak_decreasing = strictly_decreasing(t.weak);
    rep.labels.push_back(std::move(t));
  }

  Json j;
  j["passed"] = rep.passed();
  j["bin_width"] = rep.bin_width;
  j["notices"] = rep.notices;
  Json miss = Json::array();
  for (const auto& [n, why] : rep.missing) miss.push_back({{"n", n}, {"reason", why}});
  j["missing"] = miss;
  Json lab = Json::array();
  for (const auto& t : rep.labels)
    lab.push_back({{"label", t.label},
                   {"cauchy_decreasing", t.cauchy_decreasing},
                   {"weak_decreasing", t.weak_decreasing},
                   {"control_ratio", t.control_ratio},
                   {"fp_distance", t.fp_distance}});
  j["labels"] = lab;
  if (rep.fp_computed) j["fp"] = {{"iterations", rep.fp_iterations}, {"nonunique", rep.fp_nonunique}};
  const fs::path out(c.output_dir);
  write_file(out / "convergence.csv", csv.str());
  write_file(out / "report.json", j.dump(2) + "\n");
  return rep;
}

// ---- Fokker-Planck check --------------------------------------------------

struct FPCheck {
  double stationary_l1 = -1.0;        // F = 0 only
  double stationary_distance = -1.0;  // F = 0 only
  double weak = 0.0;
  int iterations = 0;
  double defect = 0.0;
  bool nonunique = false;
  double bin_width = 0.0;

  bool passed() const {
    if (stationary_l1 >= 0.0 && (stationary_l1 >= 1e-3 || stationary_distance >= 2.0 * bin_width)) return false;
    return weak < 1e-3;
  }
};

inline FPCheck run_fpcheck(const ExperimentConfig& c) {
  c.validate();
  FPCheck r;
  FokkerPlanck fp(c.spec, c.sigma, c.fp);
  r.bin_width = c.fp.measure_grid().bin_width();
  const auto sol = ensure_periodic(c);
  r.iterations = sol.iterations;
  r.defect = sol.defect;
  r.nonunique = sol.nonunique;
  r.weak = weak_residual(sol.measure, c.spec, c.sigma, c.weak_bank, c.weak_width);
  if (c.spec.is_free()) {
    const auto rho = fp.product_density(c.sigma);
    r.stationary_l1 = fp.l1(fp_apply(fp, rho, 0.0));
    const auto exact = fp.to_measure(std::vector<std::vector<double>>(c.fp.T + 1, rho));
    r.stationary_distance = measure_distance(sol.measure, exact);
  }
  Json j = {{"passed", r.passed()}, {"iterations", r.iterations}, {"defect", r.defect},
            {"nonunique", r.nonunique}, {"weak_residual", r.weak}, {"bin_width", r.bin_width}};
  if (r.stationary_l1 >= 0.0) {
    j["stationary_rhs_l1"] = r.stationary_l1;
    j["stationary_distance"] = r.stationary_distance;
  }
  write_file(fs::path(c.output_dir) / "fp" / "fpcheck.json", j.dump(2) + "\n");
  return r;
}

// ---- Floer certificates ---------------------------------------------------

struct CylinderRow {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  int pair = 0;
  std::string lo, hi;
  std::string status;  // certified | violated | trivial | stall | orbit_failure
  double energy = 0.0, gap = 0.0, residual = 0.0, tau = 0.0;
  std::string error;
};

struct FloerReport {
  std::vector<CylinderRow> rows;
  bool degenerate = false;  // Morse-Bott family: no strict gaps to certify

  std::size_t count(const std::string& status) const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](const auto& r) { return r.status == status; }));
  }
  bool all_certified() const { return !rows.empty() && !degenerate && count("certified") == rows.size(); }
};

inline constexpr double kEnergySlack = 1e-3;
inline constexpr double kEnergyFloor = 1e-3;

inline FloerReport run_floer(const ExperimentConfig& c) {
  c.validate();
  if (c.spec.d != 1)
    throw InvalidArgument("floer: cylinders are implemented for d = 1 only; this config has d = " +
                          std::to_string(c.spec.d));
  require(c.floer.has_value(), "floer: the config has no floer section");
  const auto& fc = *c.floer;
  FloerReport rep;
  const fs::path dir = fs::path(c.output_dir) / "floer";
  int exported = 0;
  for (int i = 0; i < fc.samples; ++i) {
    const std::uint64_t seed = rng::sample_seed(c.seed, static_cast<std::uint64_t>(i));
    const WalkPath walk = make_walk(fc.n, 1, seed);
    OrbitProblem<1> prob(c.spec, walk, c.sigma, c.orbit);
    OrbitFamily<1> fam;
    try {
      fam = find_orbit_family(prob);
    } catch (const SolverError& e) {
      CylinderRow r;
      r.index = static_cast<std::uint64_t>(i);
      r.seed = seed;
      r.status = "orbit_failure";
      r.error = e.what();
      rep.rows.push_back(r);
      continue;
    }
    FloerProblem fp(c.spec, walk, c.sigma, fc.options);
    std::vector<std::pair<int, int>> pairs;
    if (fam.morse_bott) {
      rep.degenerate = true;
      pairs.push_back({0, 0});
    } else {
      for (int k = 0; k + 1 < static_cast<int>(fam.orbits.size()); ++k) pairs.push_back({k, k + 1});
    }
    for (int k = 0; k < static_cast<int>(pairs.size()); ++k) {
      const auto& lo = fam.orbits[pairs[k].first];
      const auto& hi = fam.orbits[pairs[k].second];
      CylinderRow r;
      r.index = static_cast<std::uint64_t>(i);
      r.seed = seed;
      r.pair = k;
      r.lo = lo.label;
      r.hi = hi.label;
      r.gap = hi.action - lo.action;
      try {
        const auto cyl = solve_cylinder(fp, lo, hi);
        r.energy = cyl.energy;
        r.residual = cyl.residual_norm;
        r.tau = cyl.tau;
        if (fam.morse_bott)
          r.status = "trivial";
        else
          r.status = (r.energy <= r.gap + kEnergySlack && r.energy >= kEnergyFloor) ? "certified" : "violated";
        if (exported < fc.export_cylinders) {
          std::ostringstream os;
          write_cylinder_csv(os, cyl);
          write_file(dir / ("cylinder_" + std::to_string(i) + "_" + std::to_string(k) + ".csv"), os.str());
          ++exported;
        }
      } catch (const SolverError& e) {
        r.status = "stall";
        r.tau = e.value();
        r.error = e.what();
      }
      rep.rows.push_back(r);
    }
  }
  std::ostringstream csv;
  csv.precision(12);
  csv << "index,seed,n,pair,lo,hi,energy,gap,slack,residual,tau,status\n";
  for (const auto& r : rep.rows)
    csv << r.index << ',' << r.seed << ',' << fc.n << ',' << r.pair << ',' << r.lo << ',' << r.hi << ',' << r.energy
        << ',' << r.gap << ',' << r.gap - r.energy << ',' << r.residual << ',' << r.tau << ',' << r.status << '\n';
  write_file(dir / "certificates.csv", csv.str());
  Json failures = Json::array();
  for (const auto& r : rep.rows)
    if (r.status != "certified" && r.status != "trivial")
      failures.push_back({{"index", r.index}, {"pair", r.pair}, {"status", r.status}, {"error", r.error}});
  std::string verdict = rep.all_certified() ? "all gaps certified strict" : "certification incomplete";
  if (rep.degenerate) verdict = "degenerate Morse-Bott family: gaps vanish, no strict gap to certify";
  const Json j = {{"certificate", verdict},
                  {"all_certified", rep.all_certified()},
                  {"degenerate", rep.degenerate},
                  {"cylinders", rep.rows.size()},
                  {"certified", rep.count("certified")},
                  {"failures", failures}};
  write_file(dir / "summary.json", j.dump(2) + "\n");
  return rep;
}

// ---- walk samples ---------------------------------------------------------

struct SampleSummary {
  int n = 0, d = 0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double q50 = 0.0, q90 = 0.0, q99 = 0.0;
};

/// CSV of sample `index` and Hoelder-alpha quantiles over `count` samples.
inline SampleSummary run_sample(int n, int d, std::uint64_t seed, std::uint64_t index, int count, double alpha,
                                const fs::path& out_dir) {
  require(n >= 1 && d >= 1 && d <= kMaxDim && count >= 1, "sample: need n >= 1, d in {1,2}, count >= 1");
  write_file(out_dir / ("walk_n" + std::to_string(n) + "_i" + std::to_string(index) + ".csv"),
             walk_csv(make_walk(n, d, rng::sample_seed(seed, index))));
  std::vector<double> h;
  for (int i = 0; i < count; ++i)
    h.push_back(holder_seminorm(make_walk(n, d, rng::sample_seed(seed, static_cast<std::uint64_t>(i))), alpha));
  SampleSummary s{n, d, seed, alpha, quantile(h, 0.5), quantile(h, 0.9), quantile(h, 0.99)};
  const Json j = {{"n", n}, {"d", d}, {"seed", seed}, {"alpha", alpha}, {"samples", count},
                  {"quantiles", {{"q50", s.q50}, {"q90", s.q90}, {"q99", s.q99}}}};
  write_file(out_dir / ("walk_summary_n" + std::to_string(n) + ".json"), j.dump(2) + "\n");
  return s;
}

}  // namespace dhlab
