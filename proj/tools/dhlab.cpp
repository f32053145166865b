// dhlab: experiment driver.
//
//   dhlab sample  --n 256 --count 1000 --out runs/walks
//   dhlab orbits  --config configs/pendulum.json
//   dhlab measure --config configs/pendulum.json
//   dhlab fpcheck --config configs/free.json
//   dhlab report  --config configs/pendulum.json
//   dhlab floer   --config configs/pendulum.json
//
// Exit codes: 0 all requested certificates pass, 1 a certificate fails,
// 2 invalid configuration or arguments, 3 damaged or missing artifact,
// 4 solver failure.

#include "dhlab/dhlab.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace dhlab;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  double sigma = -1.0;
  int M = 0;
  std::int64_t seed = -1;
  std::vector<int> ladder;
  std::string strategy;
};

void add_config_flags(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("-o,--out", o.out, "output directory (overrides output_dir)");
  app->add_option("--sigma", o.sigma, "diffusion strength");
  app->add_option("-M,--samples-per-n", o.M, "samples per n");
  app->add_option("--seed", o.seed, "base seed");
  app->add_option("--n-ladder", o.ladder, "step counts, strictly increasing");
  app->add_option("--strategy", o.strategy, "orbit seeding: grid | reduced_action");
}

ExperimentConfig resolve(const Overrides& o) {
  Json j = Json::parse(read_file(o.config));
  if (!o.out.empty()) j["output_dir"] = o.out;
  if (o.sigma >= 0.0) j["sigma"] = o.sigma;
  if (o.M > 0) j["M"] = o.M;
  if (o.seed >= 0) j["seed"] = o.seed;
  if (!o.ladder.empty()) j["n_ladder"] = o.ladder;
  if (!o.strategy.empty()) j["orbit"]["strategy"] = o.strategy;
  return config_from_json(j);
}

void print_verdict(bool ok, const std::string& what) {
  std::printf("%s: %s\n", what.c_str(), ok ? "PASS" : "FAIL");
}

int cmd_orbits(const ExperimentConfig& c) {
  const auto rep = run_orbits(c);
  bool ok = true;
  for (const auto& L : rep.levels) {
    std::printf("n=%d samples=%zu failures=%zu full_family=%.4f%s%s\n", L.n, L.samples, L.failures.size(),
                L.full_family_fraction, L.morse_bott ? " morse_bott" : "", L.resumed ? " (resumed)" : "");
    for (const auto& [idx, err] : L.failures) std::printf("  sample %llu: %s\n", static_cast<unsigned long long>(idx), err.c_str());
    for (const auto& [label, st] : L.actions)
      std::printf("  %-4s count=%zu mean=%.6f q05=%.6f q95=%.6f\n", label.c_str(), st.count, st.mean, st.q05, st.q95);
    for (const auto& g : L.gaps) {
      std::printf("  gap %s -> %s: min=%.6f mean=%.6f\n", g.lo.c_str(), g.hi.c_str(), g.min, g.mean);
      ok = ok && g.min > 0.0;
    }
    if (L.morse_bott)
      std::printf("  morse-bott action mean=%.6f reference sigma^2/2 mean W(1)^2=%.6f\n", L.mb_action_mean,
                  L.mb_reference_action);
    ok = ok && L.failures.empty();
  }
  print_verdict(ok, "orbits");
  return ok ? 0 : 1;
}

int cmd_measure(const ExperimentConfig& c) {
  bool ok = true;
  for (int n : c.n_ladder) {
    const auto path = ensemble_path(c, n);
    if (!std::filesystem::exists(path)) {
      std::printf("n=%d: missing ensemble file %s\n", n, path.string().c_str());
      ok = false;
      continue;
    }
    const auto e = read_ensemble(path).ensemble;
    for (const auto& [label, m] : build_measures(c, e))
      std::printf("n=%d label=%s M=%zu action=%.6f\n", n, label.c_str(), m.meta.M, action_of_measure(m, c.spec));
  }
  print_verdict(ok, "measure");
  return ok ? 0 : 1;
}

int cmd_fpcheck(const ExperimentConfig& c) {
  const auto r = run_fpcheck(c);
  std::printf("periodic_solve: %d periods, defect %.3e%s\n", r.iterations, r.defect, r.nonunique ? " (non-unique)" : "");
  std::printf("weak residual of the periodic solution: %.3e\n", r.weak);
  if (r.stationary_l1 >= 0.0)
    std::printf("free stationary profile: rhs L1 %.3e, distance %.4f (bin width %.4f)\n", r.stationary_l1,
                r.stationary_distance, r.bin_width);
  print_verdict(r.passed(), "fpcheck");
  return r.passed() ? 0 : 1;
}

int cmd_report(const ExperimentConfig& c, bool with_fp) {
  const auto rep = run_convergence(c, with_fp);
  for (const auto& s : rep.notices) std::printf("notice: %s\n", s.c_str());
  for (const auto& [n, why] : rep.missing) std::printf("n=%d: %s\n", n, why.c_str());
  for (const auto& q : rep.tightness)
    std::printf("tightness n=%d: C0 q99=%.4f Holder q99=%.4f\n", q.n, q.c0_q99, q.holder_q99);
  for (const auto& t : rep.labels) {
    std::printf("label %s:\n", t.label.c_str());
    for (const auto& [n, d] : t.cauchy) std::printf("  cauchy n=%d: %.5f\n", n, d);
    for (std::size_t k = 0; k < t.weak.size(); ++k)
      std::printf("  weak n=%d: %.4e (control %.4e)\n", t.weak[k].first, t.weak[k].second, t.control[k].second);
    if (t.fp_distance >= 0.0) std::printf("  fp distance: %.4f (3 bin widths = %.4f)\n", t.fp_distance, 3 * rep.bin_width);
    std::printf("  cauchy decreasing: %s, weak decreasing: %s, control ratio: %.2f\n",
                t.cauchy_decreasing ? "yes" : "no", t.weak_decreasing ? "yes" : "no", t.control_ratio);
  }
  print_verdict(rep.passed(), "report");
  return rep.passed() ? 0 : 1;
}

int cmd_floer(ExperimentConfig c, int samples) {
  if (!c.floer) c.floer = FloerConfig{};
  if (samples > 0) c.floer->samples = samples;
  const auto rep = run_floer(c);
  for (const auto& r : rep.rows)
    std::printf("sample %llu pair %d %s->%s: energy=%.6f gap=%.6f %s%s%s\n", static_cast<unsigned long long>(r.index),
                r.pair, r.lo.c_str(), r.hi.c_str(), r.energy, r.gap, r.status.c_str(), r.error.empty() ? "" : ": ",
                r.error.c_str());
  if (rep.degenerate) std::printf("degenerate Morse-Bott family: gaps vanish, nothing strict to certify\n");
  std::printf("certified %zu of %zu cylinders\n", rep.count("certified"), rep.rows.size());
  print_verdict(rep.all_certified(), "floer");
  return rep.all_certified() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed random-walk Hamiltonian orbits: ensembles, measures, Fokker-Planck and Floer checks"};
  app.require_subcommand(1);

  int n = 256, d = 1, count = 1000;
  std::uint64_t seed = 2024, index = 0;
  double alpha = 0.25;
  std::string walk_out = "walks";
  auto* sample = app.add_subcommand("sample", "export a walk and Hoelder quantiles over samples");
  sample->add_option("--n", n, "steps")->check(CLI::PositiveNumber);
  sample->add_option("--d", d, "dimension")->check(CLI::Range(1, 2));
  sample->add_option("--seed", seed, "base seed");
  sample->add_option("--index", index, "sample index to export");
  sample->add_option("--count", count, "samples for the quantiles")->check(CLI::PositiveNumber);
  sample->add_option("--alpha", alpha, "Hoelder exponent")->check(CLI::Range(0.0, 1.0));
  sample->add_option("-o,--out", walk_out, "output directory");

  Overrides o;
  auto* orbits = app.add_subcommand("orbits", "solve orbit ensembles over the n-ladder");
  add_config_flags(orbits, o);
  auto* measure = app.add_subcommand("measure", "bin stored ensembles into empirical measures");
  add_config_flags(measure, o);
  auto* fpcheck = app.add_subcommand("fpcheck", "periodic Fokker-Planck solution and its checks");
  add_config_flags(fpcheck, o);
  bool no_fp = false;
  auto* report = app.add_subcommand("report", "convergence report from stored ensembles");
  add_config_flags(report, o);
  report->add_flag("--no-fp", no_fp, "skip the Fokker-Planck cross-validation");
  int floer_samples = 0;
  auto* floer = app.add_subcommand("floer", "energy-action certificates from Floer cylinders (d = 1)");
  add_config_flags(floer, o);
  floer->add_option("--floer-samples", floer_samples, "number of samples (overrides floer.samples)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed()) {
      const auto s = run_sample(n, d, seed, index, count, alpha, walk_out);
      std::printf("n=%d d=%d alpha=%.3f Hoelder quantiles q50=%.4f q90=%.4f q99=%.4f\n", s.n, s.d, s.alpha, s.q50,
                  s.q90, s.q99);
      return 0;
    }
    const ExperimentConfig c = resolve(o);
    if (orbits->parsed()) return cmd_orbits(c);
    if (measure->parsed()) return cmd_measure(c);
    if (fpcheck->parsed()) return cmd_fpcheck(c);
    if (report->parsed()) return cmd_report(c, !no_fp);
    if (floer->parsed()) return cmd_floer(c, floer_samples);
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ChecksumError& e) {
    std::fprintf(stderr, "integrity error: %s\n", e.what());
    return 3;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure (%s): %s\n", to_string(e.kind()), e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
