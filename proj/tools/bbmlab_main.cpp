// bbmlab: command-line laboratory for branching Brownian motion, its
// reaction-diffusion front dual, and the limiting extremal point process.
// Every experiment is a subcommand with a reproducible key=value config and
// machine-readable outputs (CSV rows plus a JSON manifest).

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "bbmlab/acceptance.hpp"
#include "bbmlab/experiments.hpp"
#include "bbmlab/io.hpp"

namespace fs = std::filesystem;
using namespace bbm;
using namespace bbm::experiments;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 20260809;
  int threads = default_threads();
  std::string out_dir = ".";
};

Config load_config(const CommonOptions& opt) {
  Config cfg;
  if (!opt.config_path.empty()) cfg = Config::from_file(opt.config_path);
  for (const auto& kv : opt.overrides) cfg.apply_override(kv);
  return cfg;
}

RunContext context_of(const CommonOptions& opt) {
  RunContext ctx;
  ctx.seed = opt.seed;
  ctx.threads = opt.threads;
  return ctx;
}

std::string out_path(const CommonOptions& opt, const std::string& name) {
  fs::create_directories(opt.out_dir);
  return (fs::path(opt.out_dir) / name).string();
}

json base_manifest(const std::string& experiment, const CommonOptions& opt,
                   const Config& cfg) {
  return json{{"experiment", experiment},
              {"config", cfg.to_json()},
              {"seed", opt.seed},
              {"threads", opt.threads},
              {"metrics", json::object()},
              {"criteria", json::array()},
              {"outputs", json::array()}};
}

void add_criterion(json& manifest, const std::string& name, bool pass,
                   const json& extra = json::object()) {
  json c = extra;
  c["name"] = name;
  c["pass"] = pass;
  manifest["criteria"].push_back(c);
}

int finish(json& manifest, const CommonOptions& opt,
           const std::string& experiment) {
  const std::string mpath = out_path(opt, experiment + "_manifest.json");
  write_json_file(mpath, manifest);
  bool all_pass = true;
  for (const auto& c : manifest["criteria"]) {
    if (!c.at("pass").get<bool>()) {
      all_pass = false;
      std::cerr << "criterion failed: " << c.at("name").get<std::string>()
                << "\n";
    }
  }
  std::cout << "manifest: " << mpath << "\n";
  return all_pass ? 0 : 1;
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i)
    out.push_back(lo * std::pow(hi / lo, n == 1 ? 0.0 : i / (n - 1.0)));
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_simulate(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"norm", "t", "checkpoints", "pruning_gap"});
  SimConfig sc;
  sc.norm = Normalization::from_name(cfg.get_string("norm", "standard"));
  sc.t_end = cfg.get_double("t", 6.0);
  sc.checkpoints =
      default_checkpoints(sc.t_end, static_cast<int>(cfg.get_long("checkpoints", 64)));
  const double gap = cfg.get_double("pruning_gap", 0.0);
  if (gap > 0.0) sc.pruning = PruningPolicy::gap_to_extremum(gap);
  sc.seed = opt.seed;
  const auto snap = simulate(sc);

  json manifest = base_manifest("simulate", opt, cfg);
  const std::string snap_path = out_path(opt, "snapshot.json");
  write_json_file(snap_path, snapshot_to_json(snap));
  const std::string leaves_path = out_path(opt, "leaves.csv");
  {
    std::ofstream os(leaves_path);
    write_point_measure_csv(os, snap.leaf_positions());
  }
  const auto mr = martingales(snap);
  manifest["metrics"] = {{"leaves", snap.leaves.size()},
                         {"pruned", snap.pruned_count},
                         {"extremum", extremum(snap.leaf_positions(),
                                               sc.norm.direction)},
                         {"martingale_z", mr.z_value},
                         {"martingale_m", mr.m_value},
                         {"martingale_approximate", mr.approximate}};
  manifest["outputs"] = {snap_path, leaves_path};
  return finish(manifest, opt, "simulate");
}

int cmd_fkpp_front(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t_end", "t_start", "snapshots", "x_min", "x_max",
                          "dx", "dt", "write_fields"});
  Grid grid;
  grid.x_min = cfg.get_double("x_min", grid.x_min);
  grid.x_max = cfg.get_double("x_max", grid.x_max);
  grid.dx = cfg.get_double("dx", grid.dx);
  grid.dt = cfg.get_double("dt", grid.dt);
  const double t_end = cfg.get_double("t_end", 200.0);
  const double t_start = cfg.get_double("t_start", t_end / 10.0);
  const int n_snap = static_cast<int>(cfg.get_long("snapshots", 9));
  const auto scan = front_median_scan(log_spaced(t_start, t_end, n_snap), grid);

  json manifest = base_manifest("fkpp-front", opt, cfg);
  const std::string csv = out_path(opt, "front_medians.csv");
  {
    CsvWriter w(csv, {"t", "median", "median_minus_sqrt2_t"}, cfg.to_json());
    for (std::size_t i = 0; i < scan.times.size(); ++i)
      w.row({scan.times[i], scan.medians[i],
             scan.medians[i] - kSqrt2 * scan.times[i]});
  }
  manifest["metrics"] = {{"log_slope", scan.log_slope.slope},
                         {"log_slope_stderr", scan.log_slope.stderr}};
  manifest["outputs"] = {csv};
  if (cfg.get_long("write_fields", 0) != 0) {
    const auto fields = evolve(InitialCondition::heaviside(0.0), t_end, grid,
                               {t_end});
    const std::string fpath = out_path(opt, "field.csv");
    std::ofstream os(fpath);
    write_field_csv(os, fields.back());
    write_json_file(out_path(opt, "field.json"),
                    field_sidecar_json(fields.back()));
    manifest["outputs"].push_back(fpath);
  }
  return finish(manifest, opt, "fkpp-front");
}

int cmd_median_scan(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t_min", "t_max", "points", "mc_t_max", "mc_replicas"});
  const double t_min = cfg.get_double("t_min", 4.0);
  const double t_max = cfg.get_double("t_max", 64.0);
  const int points = static_cast<int>(cfg.get_long("points", 7));
  const double mc_t_max = cfg.get_double("mc_t_max", 10.0);
  const long mc_replicas = cfg.get_long("mc_replicas", 2000);
  const auto ctx = context_of(opt);

  const auto times = log_spaced(t_min, t_max, points);
  const auto pde = front_median_scan(times);
  json manifest = base_manifest("median-scan", opt, cfg);
  const std::string csv = out_path(opt, "median_scan.csv");
  CsvWriter w(csv, {"t", "front_median", "independent_median", "mc_median"},
              cfg.to_json());
  bool overestimates = true;
  for (int i = 0; i < points; ++i) {
    const double t = times[i];
    double mc_med = std::numeric_limits<double>::quiet_NaN();
    if (t <= mc_t_max) {
      auto maxes = parallel_map<double>(mc_replicas, ctx.threads, [&](std::size_t k) {
        SimConfig sc;
        sc.norm = Normalization::standard();
        sc.t_end = t;
        sc.pruning = PruningPolicy::gap_to_extremum(12.0);
        sc.seed = derive_seed(ctx.seed + i, k);
        return extremum(simulate(sc).leaf_positions(), Direction::Max);
      });
      std::vector<double> m(maxes.begin(), maxes.end());
      mc_med = median_inplace(m);
    }
    const double indep = independent_median(t);
    if (indep <= pde.medians[i]) overestimates = false;
    w.row({t, pde.medians[i], indep, mc_med});
  }
  manifest["metrics"] = {{"front_log_slope", pde.log_slope.slope}};
  manifest["outputs"] = {csv};
  // the independent-particles proxy overestimates the interacting median
  add_criterion(manifest, "independent median exceeds front median",
                overestimates);
  return finish(manifest, opt, "median-scan");
}

int cmd_duality(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys(
      {"t", "replicas", "phi_lo", "phi_hi", "phi_height", "grid_allowance"});
  const double t = cfg.get_double("t", 6.0);
  const CompactBump phi = CompactBump::cosine(cfg.get_double("phi_lo", -1.0),
                                              cfg.get_double("phi_hi", 2.0),
                                              cfg.get_double("phi_height", 1.2));
  const auto res = mckean_duality(phi, t,
                                  Normalization::standard().centering(t),
                                  cfg.get_long("replicas", 10000),
                                  context_of(opt),
                                  cfg.get_double("grid_allowance", 1e-3));
  json manifest = base_manifest("duality", opt, cfg);
  manifest["metrics"] = {{"mc_mean", res.mc.mean},
                         {"mc_half_width", res.mc.half_width},
                         {"pde_value", res.pde_value},
                         {"tolerance", res.tolerance}};
  add_criterion(manifest, "laplace functional matches the front dual", res.pass,
                {{"difference", std::fabs(res.mc.mean - res.pde_value)}});
  return finish(manifest, opt, "duality");
}

int cmd_martingales(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t", "replicas", "z_replicas"});
  const auto res = martingale_means(cfg.get_double("t", 5.0),
                                    cfg.get_long("replicas", 10000),
                                    context_of(opt),
                                    cfg.get_long("z_replicas", 0));
  json manifest = base_manifest("martingales", opt, cfg);
  manifest["metrics"] = {
      {"tilted_additive_mean", res.tilted_additive.mean},
      {"tilted_additive_half_width", res.tilted_additive.half_width},
      {"standard_derivative_mean", res.standard_derivative.mean},
      {"standard_derivative_mom", res.standard_derivative.median_of_means},
      {"mom_band", {res.band_lo, res.band_hi}}};
  add_criterion(manifest, "additive martingale mean is one", res.pass_tilted);
  add_criterion(manifest, "derivative martingale band covers zero",
                res.pass_standard);
  return finish(manifest, opt, "martingales");
}

int cmd_genealogy(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t", "replicas", "band", "bins"});
  const auto hist = genealogy_histogram(cfg.get_double("t", 12.0),
                                        cfg.get_long("replicas", 2000),
                                        cfg.get_double("band", 2.0),
                                        context_of(opt),
                                        static_cast<int>(cfg.get_long("bins", 24)));
  json manifest = base_manifest("genealogy", opt, cfg);
  const std::string csv = out_path(opt, "split_time_histogram.csv");
  CsvWriter w(csv, {"bin_lo", "bin_hi", "count"}, cfg.to_json());
  for (std::size_t b = 0; b + 1 < hist.bin_edges.size(); ++b)
    w.row({hist.bin_edges[b], hist.bin_edges[b + 1],
           static_cast<double>(hist.counts[b])});
  manifest["metrics"] = {{"pairs_total", hist.pairs_total}};
  manifest["outputs"] = {csv};
  return finish(manifest, opt, "genealogy");
}

int cmd_localization(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t", "alpha", "replicas"});
  MaxEnsembleConfig mc;
  mc.t = cfg.get_double("t", 12.0);
  mc.alpha = cfg.get_double("alpha", 0.3);
  mc.replicas = cfg.get_long("replicas", 2000);
  const auto ens = max_ensemble(mc, context_of(opt));
  long n1 = 0, n2 = 0, n3 = 0;
  for (const auto& r : ens.replicas) {
    n1 += r.upper_r1 ? 1 : 0;
    n2 += r.upper_r2 ? 1 : 0;
    n3 += r.upper_r3 ? 1 : 0;
  }
  const double n = static_cast<double>(ens.replicas.size());
  json manifest = base_manifest("localization", opt, cfg);
  const std::string csv = out_path(opt, "envelope_exceedance.csv");
  CsvWriter w(csv, {"r", "upper_exceedance_frequency"}, cfg.to_json());
  w.row({1.0, n1 / n});
  w.row({2.0, n2 / n});
  w.row({3.0, n3 / n});
  manifest["metrics"] = {{"freq_r1", n1 / n}, {"freq_r2", n2 / n},
                         {"freq_r3", n3 / n}};
  manifest["outputs"] = {csv};
  add_criterion(manifest, "exceedance frequency decreases in r", n3 < n1);
  return finish(manifest, opt, "localization");
}

int cmd_rotation_lemma(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t", "samples"});
  const auto res = rotation_lemma(static_cast<int>(cfg.get_long("t", 12)),
                                  cfg.get_long("samples", 10000), opt.seed);
  json manifest = base_manifest("rotation-lemma", opt, cfg);
  manifest["metrics"] = {{"samples", res.samples},
                         {"single_rotation", res.single_rotation},
                         {"redraws", res.redraws}};
  add_criterion(manifest, "exactly one qualifying rotation per sample",
                res.single_rotation == res.samples);
  return finish(manifest, opt, "rotation-lemma");
}

int cmd_sample_extremal(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"norm", "x_lo", "x_hi", "samples", "decoration",
                          "zeta", "bank_size", "bank_t"});
  const auto norm = Normalization::from_name(cfg.get_string("norm", "standard"));
  const double x_lo = cfg.get_double("x_lo", -2.0);
  const double x_hi = cfg.has("x_hi")
                          ? cfg.get_double("x_hi", 0.0)
                          : std::numeric_limits<double>::infinity();
  const long n = cfg.get_long("samples", 1000);
  const std::string deco = cfg.get_string("decoration", "bank");
  const auto ctx = context_of(opt);

  DecorationSource source = DecorationSource::delta0();
  if (deco == "bank") {
    source = DecorationSource::from_bank(standard_decoration_bank(
        cfg.get_long("bank_size", 2000), cfg.get_double("bank_t", 10.0),
        cfg.get_double("zeta", 2.5), ctx));
  } else if (deco == "sampler") {
    DecorationConfig dc;
    dc.zeta = cfg.get_double("zeta", 3.0);
    source = DecorationSource::sampler(dc);
  } else if (deco != "delta0") {
    throw ConfigError("decoration must be delta0|bank|sampler");
  }

  json manifest = base_manifest("sample-extremal", opt, cfg);
  const std::string csv = out_path(opt, "extremal_samples.csv");
  CsvWriter w(csv, {"sample", "position"}, cfg.to_json());
  std::vector<double> extrema;
  for (long i = 0; i < n; ++i) {
    const auto pm = assemble(norm, x_lo, x_hi, source, derive_seed(opt.seed, i));
    for (double x : pm.atoms()) w.row({static_cast<double>(i), x});
    if (!pm.empty()) extrema.push_back(extremum(pm, norm.direction));
  }
  manifest["metrics"] = {{"samples", n},
                         {"mean_extremum",
                          extrema.empty() ? 0.0 : mean_of(extrema)}};
  manifest["outputs"] = {csv};
  return finish(manifest, opt, "sample-extremal");
}

int cmd_decoration_compare(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys(
      {"t", "zeta", "samples", "horizon", "b_max", "dt", "ks_threshold"});
  DecorationConfig dc;
  dc.zeta = cfg.get_double("zeta", 3.0);
  dc.horizon = cfg.get_double("horizon", 0.0);
  dc.b_max = cfg.get_double("b_max", 8.0);
  dc.dt = cfg.get_double("dt", 0.005);
  const auto res = decoration_compare(cfg.get_long("samples", 3000),
                                      cfg.get_double("t", 12.0), dc,
                                      context_of(opt));
  json manifest = base_manifest("decoration-compare", opt, cfg);
  manifest["metrics"] = {{"ks", res.ks},
                         {"sampler_acceptance", res.sampler_acceptance},
                         {"sim_no_gap_fraction", res.sim_no_gap_fraction},
                         {"sampler_no_gap_fraction", res.sampler_no_gap_fraction}};
  add_criterion(manifest, "gap distributions agree",
                res.ks < cfg.get_double("ks_threshold", 0.05),
                {{"ks", res.ks}});
  return finish(manifest, opt, "decoration-compare");
}

int cmd_auxiliary_compare(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t", "samples", "ks_threshold"});
  const auto res = auxiliary_compare(cfg.get_double("t", 10.0),
                                     cfg.get_long("samples", 4000),
                                     context_of(opt));
  json manifest = base_manifest("auxiliary-compare", opt, cfg);
  manifest["metrics"] = {{"ks", res.ks},
                         {"deterministic_ks_bound", res.deterministic_ks_bound},
                         {"z_positive_fraction", res.z_positive_fraction}};
  add_criterion(manifest, "auxiliary extremum law matches the cloud",
                res.ks < cfg.get_double("ks_threshold", 0.07), {{"ks", res.ks}});
  return finish(manifest, opt, "auxiliary-compare");
}

int cmd_conditioned_overshoot(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t", "a", "b", "n_target", "replica_cap", "tolerance"});
  ConditionedTailConfig cc;
  cc.t = cfg.get_double("t", 9.0);
  cc.a = cfg.get_double("a", 0.7);
  cc.b = cfg.get_double("b", 0.0);
  cc.n_target = cfg.get_long("n_target", 1500);
  cc.replica_cap = cfg.get_long("replica_cap", 2000000);
  const auto res = conditioned_overshoot(cc, context_of(opt));
  json manifest = base_manifest("conditioned-overshoot", opt, cfg);
  manifest["metrics"] = {{"mean_overshoot", res.overshoot.mean},
                         {"half_width", res.overshoot.half_width},
                         {"accepted", res.accepted},
                         {"acceptance_rate", res.acceptance_rate}};
  const double target = 1.0 / kSqrt2;
  const double tol = cfg.get_double("tolerance", 0.15);
  add_criterion(manifest, "overshoot mean near 1/sqrt2",
                std::fabs(res.overshoot.mean - target) <= tol * target,
                {{"mean", res.overshoot.mean}, {"target", target}});
  return finish(manifest, opt, "conditioned-overshoot");
}

int cmd_superposability(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys(
      {"samples", "window_lo", "bank_size", "bank_t", "bank_zeta", "ks_threshold"});
  const auto ctx = context_of(opt);
  const auto bank = standard_decoration_bank(cfg.get_long("bank_size", 4000),
                                             cfg.get_double("bank_t", 10.0),
                                             cfg.get_double("bank_zeta", 2.5), ctx);
  const auto res = superposability(cfg.get_long("samples", 10000),
                                   cfg.get_double("window_lo", -2.0),
                                   DecorationSource::from_bank(bank), ctx);
  json manifest = base_manifest("superposability", opt, cfg);
  manifest["metrics"] = {{"ks", res.ks}, {"n", res.n}};
  add_criterion(manifest, "extremum law is superposition-stable",
                res.ks < cfg.get_double("ks_threshold", 0.02), {{"ks", res.ks}});
  return finish(manifest, opt, "superposability");
}

int cmd_many_to_one(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({"t", "replicas"});
  const auto res = many_to_one(cfg.get_double("t", 3.0),
                               cfg.get_long("replicas", 10000), context_of(opt));
  json manifest = base_manifest("many-to-one", opt, cfg);
  manifest["metrics"] = {{"direct_mean", res.direct.mean},
                         {"direct_half_width", res.direct.half_width},
                         {"weighted_mean", res.weighted.mean},
                         {"weighted_half_width", res.weighted.half_width}};
  add_criterion(manifest, "path-functional identity holds", res.pass);
  return finish(manifest, opt, "many-to-one");
}

int cmd_psi_sandwich(const CommonOptions& opt) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({});
  const auto res = psi_sandwich();
  json manifest = base_manifest("psi-sandwich", opt, cfg);
  manifest["metrics"] = {{"ratio_fine", res.ratio_fine},
                         {"ratio_coarse", res.ratio_coarse}};
  add_criterion(manifest, "tail estimate sandwich tightens", res.pass);
  return finish(manifest, opt, "psi-sandwich");
}

int cmd_acceptance(const CommonOptions& opt, const std::string& criteria_arg) {
  const Config cfg = load_config(opt);
  cfg.require_known_keys({});
  auto ctx = context_of(opt);
  std::vector<int> ids = all_criterion_ids();
  if (!criteria_arg.empty()) {
    ids.clear();
    const char* p = criteria_arg.c_str();
    while (*p) {
      ids.push_back(std::atoi(p));
      while (*p && *p != ',') ++p;
      if (*p == ',') ++p;
    }
  }
  const auto results = run_criteria(ids, ctx);
  json manifest = base_manifest("acceptance", opt, cfg);
  int failed = 0;
  for (const auto& r : results) {
    add_criterion(manifest, r.name, r.pass,
                  {{"id", r.id},
                   {"value", r.value},
                   {"detail", r.detail},
                   {"seconds", r.seconds},
                   {"metrics", r.metrics}});
    failed += r.pass ? 0 : 1;
  }
  manifest["metrics"] = {{"criteria", results.size()}, {"failed", failed}};
  return finish(manifest, opt, "acceptance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"branching Brownian motion laboratory"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string criteria_arg;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "key=value config file");
    sub->add_option("--set", opt.overrides, "override: key=value (repeatable)");
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--threads", opt.threads, "replica-level worker threads");
    sub->add_option("--out-dir", opt.out_dir, "output directory");
  };

  std::map<std::string, std::function<int()>> dispatch;
  const auto make = [&](const std::string& name, const std::string& desc,
                        std::function<int()> fn) {
    auto* sub = app.add_subcommand(name, desc);
    add_common(sub);
    dispatch[name] = std::move(fn);
    return sub;
  };

  make("simulate", "one event-driven run with genealogy",
       [&] { return cmd_simulate(opt); });
  make("fkpp-front", "front solver median scan",
       [&] { return cmd_fkpp_front(opt); });
  make("median-scan", "front, independent, and simulator medians on one axis",
       [&] { return cmd_median_scan(opt); });
  make("duality", "laplace functional vs front dual",
       [&] { return cmd_duality(opt); });
  make("martingales", "additive and derivative martingale means",
       [&] { return cmd_martingales(opt); });
  make("genealogy", "split-time histogram of near-centering pairs",
       [&] { return cmd_genealogy(opt); });
  make("localization", "envelope exceedance frequency against r",
       [&] { return cmd_localization(opt); });
  make("rotation-lemma", "cycle-lemma rotation census",
       [&] { return cmd_rotation_lemma(opt); });
  make("sample-extremal", "decorated Poisson process samples",
       [&] { return cmd_sample_extremal(opt); });
  make("decoration-compare", "simulator vs spine-sampler decoration gaps",
       [&] { return cmd_decoration_compare(opt); });
  make("auxiliary-compare", "auxiliary process vs recentred cloud",
       [&] { return cmd_auxiliary_compare(opt); });
  make("conditioned-overshoot", "overshoot law above a square-root barrier",
       [&] { return cmd_conditioned_overshoot(opt); });
  make("superposability", "superposition stability of the assembled process",
       [&] { return cmd_superposability(opt); });
  make("many-to-one", "path-functional identity with tabulated minimum law",
       [&] { return cmd_many_to_one(opt); });
  make("psi-sandwich", "gaussian tail estimate sandwich",
       [&] { return cmd_psi_sandwich(opt); });
  auto* acc = make("acceptance", "run the acceptance criteria",
                   [&] { return cmd_acceptance(opt, criteria_arg); });
  acc->add_option("--criteria", criteria_arg, "comma-separated criterion ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    for (auto& [name, fn] : dispatch)
      if (app.got_subcommand(name)) return fn();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
