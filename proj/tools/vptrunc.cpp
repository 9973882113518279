// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, moment estimation, Gaussianity
// curves, truncation-step selection, sampling and the end-to-end benchmark.
//
// Exit codes: 0 success, 2 parameter error, 3 data/contract error,
// 4 fallback decision under `tstar --strict`.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vptrunc/vptrunc.hpp"

namespace fs = std::filesystem;
using vptrunc::json;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 42;
  std::string config_path;
  std::string out_dir = ".";
  std::string format = "csv";
};

/// Merges CLI flags over config-file values over defaults, recording the
/// effective value of every consulted key.
class Config {
 public:
  Config(json file, json* echo) : file_(std::move(file)), echo_(echo) {}

  template <typename T>
  T pick(const CLI::Option* opt, const T& cli_value, const std::string& key,
         const T& fallback) {
    T value = fallback;
    if (file_.contains(key)) {
      try {
        value = file_.at(key).get<T>();
      } catch (const json::exception&) {
        throw vptrunc::ParamError("config key '" + key + "' has the wrong type");
      }
    }
    if (opt != nullptr && opt->count() > 0) value = cli_value;
    (*echo_)[key] = value;
    return value;
  }

  const json& file() const { return file_; }

 private:
  json file_;
  json* echo_;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  const json j = vptrunc::read_json(path);
  if (!j.is_object())
    throw vptrunc::ParamError("config file must hold a JSON object");
  return j;
}

vptrunc::Matrix read_dataset_any(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw vptrunc::DataError("cannot open: " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::string(magic, 4) == "TDFD") return vptrunc::read_dataset_bin(path);
  return vptrunc::read_dataset_csv(path);
}

void write_dataset_any(const std::string& stem, const std::string& format,
                       const vptrunc::Matrix& m, std::string* out_path) {
  if (format == "csv") {
    *out_path = stem + ".csv";
    vptrunc::write_dataset_csv(*out_path, m);
  } else if (format == "bin") {
    *out_path = stem + ".tdfd";
    vptrunc::write_dataset_bin(*out_path, m);
  } else {
    throw vptrunc::ParamError("datasets support --format csv or bin");
  }
}

std::string out_file(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

struct ScheduleFlags {
  std::string kind = "linear";
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  CLI::Option* kind_opt = nullptr;
  CLI::Option* T_opt = nullptr;
  CLI::Option* bs_opt = nullptr;
  CLI::Option* be_opt = nullptr;

  void attach(CLI::App* cmd) {
    kind_opt = cmd->add_option("--schedule", kind, "linear or cosine");
    T_opt = cmd->add_option("--T", T, "number of diffusion steps");
    bs_opt = cmd->add_option("--beta-start", beta_start, "first beta");
    be_opt = cmd->add_option("--beta-end", beta_end, "last beta");
  }

  vptrunc::NoiseSchedule build(Config& cfg) const {
    const std::string k = cfg.pick(kind_opt, kind, "schedule", std::string("linear"));
    const int steps = cfg.pick(T_opt, T, "T", 1000);
    const double bs = cfg.pick(bs_opt, beta_start, "beta_start", 1e-4);
    const double be = cfg.pick(be_opt, beta_end, "beta_end", 0.02);
    if (k == "cosine") return vptrunc::make_cosine_schedule(steps);
    if (k == "linear") return vptrunc::make_linear_schedule(steps, bs, be);
    throw vptrunc::ParamError("unknown schedule kind: " + k);
  }
};

struct TStarFlags {
  int tau = 25;
  double significance = 0.05;
  double pass_threshold = 0.95;
  int stride = 10;
  std::size_t probe_cap = 10000;
  CLI::Option* tau_opt = nullptr;
  CLI::Option* sig_opt = nullptr;
  CLI::Option* pass_opt = nullptr;
  CLI::Option* stride_opt = nullptr;
  CLI::Option* cap_opt = nullptr;

  void attach(CLI::App* cmd) {
    tau_opt = cmd->add_option("--tau", tau, "look-ahead gap in steps");
    sig_opt = cmd->add_option("--significance", significance, "KS level");
    pass_opt = cmd->add_option("--pass-threshold", pass_threshold,
                               "fraction of dimensions that must pass");
    stride_opt = cmd->add_option("--stride", stride, "scan stride");
    cap_opt = cmd->add_option("--probe-cap", probe_cap,
                              "max samples per probe step");
  }

  vptrunc::TStarParams build(Config& cfg) const {
    vptrunc::TStarParams p;
    p.tau = cfg.pick(tau_opt, tau, "tau", 25);
    p.significance = cfg.pick(sig_opt, significance, "significance", 0.05);
    p.pass_threshold =
        cfg.pick(pass_opt, pass_threshold, "pass_threshold", 0.95);
    p.stride = cfg.pick(stride_opt, stride, "stride", 10);
    p.max_probe_samples =
        cfg.pick(cap_opt, probe_cap, "probe_cap", std::size_t{10000});
    return p;
  }
};

struct FamilyFlags {
  std::string family = "gmm";
  std::size_t n = 10000;
  std::size_t d = 8;
  std::size_t cloud_points = 8;
  std::size_t cloud_coords = 3;
  std::size_t cloud_shapes = 4;
  double cloud_jitter = 0.15;
  double onehot_scale = 1.0;
  double field_corr_len = 0.0;
  std::string field_squash = "exp";
  double field_gain = 1.0;
  CLI::Option* family_opt = nullptr;
  CLI::Option* n_opt = nullptr;
  CLI::Option* d_opt = nullptr;
  CLI::Option* cp_opt = nullptr;
  CLI::Option* cc_opt = nullptr;
  CLI::Option* cs_opt = nullptr;
  CLI::Option* cj_opt = nullptr;
  CLI::Option* os_opt = nullptr;
  CLI::Option* fl_opt = nullptr;
  CLI::Option* fs_opt = nullptr;
  CLI::Option* fg_opt = nullptr;

  void attach(CLI::App* cmd) {
    family_opt = cmd->add_option(
        "--family", family, "gmm, point-cloud, onehot-categorical, smooth-field");
    n_opt = cmd->add_option("--n", n, "sample count");
    d_opt = cmd->add_option("--d", d, "components per sample");
    cp_opt = cmd->add_option("--cloud-points", cloud_points, "points per cloud");
    cc_opt = cmd->add_option("--cloud-coords", cloud_coords, "coords per point");
    cs_opt = cmd->add_option("--cloud-shapes", cloud_shapes, "template count");
    cj_opt = cmd->add_option("--cloud-jitter", cloud_jitter, "jitter sigma");
    os_opt = cmd->add_option("--onehot-scale", onehot_scale, "one-hot amplitude");
    fl_opt = cmd->add_option("--field-corr-len", field_corr_len,
                             "grid correlation length (0 = d/4)");
    fs_opt = cmd->add_option("--field-squash", field_squash,
                             "none, tanh or exp");
    fg_opt = cmd->add_option("--field-gain", field_gain, "squash gain");
  }

  vptrunc::SyntheticSpec build(Config& cfg, std::uint64_t seed) const {
    vptrunc::SyntheticSpec spec;
    spec.family = vptrunc::family_from_string(
        cfg.pick(family_opt, family, "family", std::string("gmm")));
    spec.n = cfg.pick(n_opt, n, "n", std::size_t{10000});
    spec.d = cfg.pick(d_opt, d, "d", std::size_t{8});
    spec.seed = seed;
    spec.cloud_points =
        cfg.pick(cp_opt, cloud_points, "cloud_points", std::size_t{8});
    spec.cloud_coord_dims =
        cfg.pick(cc_opt, cloud_coords, "cloud_coords", std::size_t{3});
    spec.cloud_shapes =
        cfg.pick(cs_opt, cloud_shapes, "cloud_shapes", std::size_t{4});
    spec.cloud_jitter = cfg.pick(cj_opt, cloud_jitter, "cloud_jitter", 0.15);
    spec.onehot_scale = cfg.pick(os_opt, onehot_scale, "onehot_scale", 1.0);
    spec.field_corr_len =
        cfg.pick(fl_opt, field_corr_len, "field_corr_len", 0.0);
    const std::string squash =
        cfg.pick(fs_opt, field_squash, "field_squash", std::string("exp"));
    if (squash == "none") spec.field_squash = vptrunc::FieldSquash::none;
    else if (squash == "tanh") spec.field_squash = vptrunc::FieldSquash::tanh_squash;
    else if (squash == "exp") spec.field_squash = vptrunc::FieldSquash::exp_squash;
    else throw vptrunc::ParamError("unknown field squash: " + squash);
    spec.field_gain = cfg.pick(fg_opt, field_gain, "field_gain", 1.0);

    if (cfg.file().contains("onehot_freqs"))
      spec.onehot_freqs =
          cfg.file().at("onehot_freqs").get<std::vector<double>>();
    if (cfg.file().contains("gmm_weights")) {
      vptrunc::GmmSpec g;
      g.weights = cfg.file().at("gmm_weights").get<std::vector<double>>();
      const auto rows =
          cfg.file().at("gmm_means").get<std::vector<std::vector<double>>>();
      g.means = vptrunc::Matrix(rows.size(), spec.d);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != spec.d)
          throw vptrunc::ParamError("gmm_means rows must have d entries");
        for (std::size_t j = 0; j < spec.d; ++j) g.means(i, j) = rows[i][j];
      }
      g.variances =
          cfg.file().at("gmm_variances").get<std::vector<double>>();
      vptrunc::validate_gmm(g);
      spec.gmm = std::move(g);
    }
    return spec;
  }
};

vptrunc::Dataset load_input(const std::string& input,
                            const std::string& modality) {
  vptrunc::Dataset ds;
  ds.values = read_dataset_any(input);
  ds.modality = vptrunc::modality_from_string(modality);
  return ds;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"analytic trajectory truncation for variance-preserving "
               "Gaussian generative processes"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed, "root RNG seed");
  app.add_option("--config", g.config_path, "flat key-value JSON config");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--format", g.format, "csv, json or bin")
      ->check(CLI::IsMember({"csv", "json", "bin"}));

  // gen-data ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  FamilyFlags gen_family;
  gen_family.attach(gen);

  // stats -------------------------------------------------------------------
  auto* stats_cmd = app.add_subcommand("stats", "per-sample moment estimates");
  std::string stats_input, stats_modality = "generic";
  bool stats_center = false;
  stats_cmd->add_option("--input", stats_input, "dataset file")->required();
  stats_cmd->add_option("--modality", stats_modality,
                        "generic, euclidean-points or one-hot-categorical");
  stats_cmd->add_flag("--center", stats_center,
                      "also write the centered dataset");

  // analyze -----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "Gaussianity curve over steps");
  std::string an_input, an_modality = "generic";
  int an_probe_stride = 50;
  double an_significance = 0.05;
  analyze->add_option("--input", an_input, "dataset file")->required();
  analyze->add_option("--modality", an_modality, "dataset modality");
  auto* an_ps_opt = analyze->add_option("--probe-stride", an_probe_stride,
                                        "spacing of probed steps");
  auto* an_sig_opt =
      analyze->add_option("--significance", an_significance, "KS level");
  ScheduleFlags an_sched;
  an_sched.attach(analyze);

  // tstar -------------------------------------------------------------------
  auto* tstar_cmd = app.add_subcommand("tstar", "select the truncation step");
  std::string ts_input, ts_modality = "generic";
  bool ts_strict = false;
  tstar_cmd->add_option("--input", ts_input, "dataset file")->required();
  tstar_cmd->add_option("--modality", ts_modality, "dataset modality");
  tstar_cmd->add_flag("--strict", ts_strict,
                      "exit with code 4 on a fallback decision");
  ScheduleFlags ts_sched;
  ts_sched.attach(tstar_cmd);
  TStarFlags ts_flags;
  ts_flags.attach(tstar_cmd);

  // sample ------------------------------------------------------------------
  auto* sample_cmd = app.add_subcommand("sample", "ancestral sampling");
  std::string sm_denoiser = "zero", sm_input, sm_modality = "generic";
  std::size_t sm_n = 1000, sm_d = 8;
  int sm_start = 0;  // 0 = full trajectory from T
  double sm_vhat = 1.0;
  auto* sm_den_opt = sample_cmd->add_option("--denoiser", sm_denoiser,
                                            "zero, linear or gmm");
  sample_cmd->add_option("--input", sm_input,
                         "dataset used to fit the linear denoiser");
  sample_cmd->add_option("--modality", sm_modality, "input modality");
  auto* sm_n_opt = sample_cmd->add_option("--n", sm_n, "samples to draw");
  auto* sm_d_opt = sample_cmd->add_option("--d", sm_d, "sample dimension");
  auto* sm_start_opt = sample_cmd->add_option(
      "--start-step", sm_start, "start of the reverse run (default T)");
  auto* sm_vhat_opt = sample_cmd->add_option(
      "--v-hat", sm_vhat, "average per-sample variance for the prior");
  ScheduleFlags sm_sched;
  sm_sched.attach(sample_cmd);

  // bench -------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "end-to-end truncation benchmark");
  FamilyFlags bench_family;
  bench_family.attach(bench);
  ScheduleFlags bench_sched;
  bench_sched.attach(bench);
  TStarFlags bench_tstar;
  bench_tstar.attach(bench);
  std::string bench_denoiser = "gmm";
  std::size_t bench_sample_n = 10000;
  int bench_reps = 5;
  std::size_t bench_fit_pairs = 100000;
  auto* bd_opt = bench->add_option("--denoiser", bench_denoiser,
                                   "gmm, linear or zero");
  auto* bn_opt = bench->add_option("--sample-n", bench_sample_n,
                                   "paired sampling batch size (0 = skip)");
  auto* br_opt = bench->add_option("--timing-reps", bench_reps,
                                   "timing repetitions");
  auto* bf_opt = bench->add_option("--fit-pairs", bench_fit_pairs,
                                   "noised pairs per fitted step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  json echo = json::object();
  Config cfg(load_config(g.config_path), &echo);
  echo["seed"] = g.seed;
  echo["format"] = g.format;

  if (gen->parsed()) {
    const auto spec = gen_family.build(cfg, g.seed);
    const auto ds = vptrunc::generate(spec);
    std::string path;
    write_dataset_any(out_file(g, "dataset"), g.format, ds.values, &path);
    json meta{{"path", path},
              {"n", ds.values.rows},
              {"d", ds.values.cols},
              {"modality", vptrunc::to_string(ds.modality)},
              {"config", echo}};
    vptrunc::write_json(out_file(g, "dataset.meta.json"), meta);
    std::cout << "wrote " << path << " (" << ds.values.rows << " x "
              << ds.values.cols << ")\n";
    return 0;
  }

  if (stats_cmd->parsed()) {
    auto ds = load_input(stats_input, stats_modality);
    const auto st = vptrunc::compute_stats(ds);
    json j = vptrunc::to_json(st);
    j["config"] = echo;
    vptrunc::write_json(out_file(g, "stats.json"), j);
    if (stats_center) {
      const auto centered = vptrunc::center(ds);
      std::string path;
      write_dataset_any(out_file(g, "centered"), g.format, centered.values,
                        &path);
      std::cout << "wrote " << path << "\n";
    }
    std::cout << "v_hat=" << st.avg_var
              << " mean_residual=" << st.mean_residual
              << " centered=" << (st.centered ? "yes" : "no") << "\n";
    return 0;
  }

  if (analyze->parsed()) {
    const auto schedule = an_sched.build(cfg);
    const int probe_stride =
        cfg.pick(an_ps_opt, an_probe_stride, "probe_stride", 50);
    const double significance =
        cfg.pick(an_sig_opt, an_significance, "significance", 0.05);
    if (probe_stride < 1)
      throw vptrunc::ParamError("probe stride must be positive");
    auto ds = load_input(an_input, an_modality);
    const auto centered = vptrunc::center(ds);
    const auto st = vptrunc::compute_stats(centered);
    const auto vpath = vptrunc::propagate_variance(st, schedule);
    std::vector<int> probes;
    for (int t = probe_stride; t <= schedule.T; t += probe_stride)
      probes.push_back(t);
    const auto rep = vptrunc::gaussianity_curve(centered, schedule, vpath,
                                                probes, g.seed, significance);
    json j = vptrunc::to_json(rep);
    j["config"] = echo;
    vptrunc::write_json(out_file(g, "gaussianity.json"), j);
    std::ofstream csv(out_file(g, "gaussianity.csv"), std::ios::binary);
    vptrunc::write_gaussianity_csv(csv, rep);
    std::cout << "wrote gaussianity.json and gaussianity.csv ("
              << rep.points.size() << " probe steps)\n";
    return 0;
  }

  if (tstar_cmd->parsed()) {
    const auto schedule = ts_sched.build(cfg);
    const auto params = ts_flags.build(cfg);
    auto ds = load_input(ts_input, ts_modality);
    const auto centered = vptrunc::center(ds);
    const auto st = vptrunc::compute_stats(centered);
    const auto vpath = vptrunc::propagate_variance(st, schedule);
    const auto dec =
        vptrunc::select_t_star(centered, schedule, vpath, params, g.seed);
    json j = vptrunc::to_json(dec);
    j["config"] = echo;
    vptrunc::write_json(out_file(g, "decision.json"), j);
    std::cout << "t_star=" << dec.t_star
              << " fallback=" << (dec.fallback ? "yes" : "no")
              << " (T=" << schedule.T << ")\n";
    if (ts_strict && dec.fallback) return 4;
    return 0;
  }

  if (sample_cmd->parsed()) {
    const auto schedule = sm_sched.build(cfg);
    const std::string den_kind =
        cfg.pick(sm_den_opt, sm_denoiser, "denoiser", std::string("zero"));
    const std::size_t n = cfg.pick(sm_n_opt, sm_n, "sample_n", std::size_t{1000});
    const std::size_t d = cfg.pick(sm_d_opt, sm_d, "d", std::size_t{8});
    int start = cfg.pick(sm_start_opt, sm_start, "start_step", 0);
    if (start == 0) start = schedule.T;
    double v_hat = cfg.pick(sm_vhat_opt, sm_vhat, "v_hat", 1.0);

    vptrunc::Denoiser den = vptrunc::make_zero_denoiser();
    switch (vptrunc::denoiser_kind_from_string(den_kind)) {
      case vptrunc::DenoiserKind::zero: break;
      case vptrunc::DenoiserKind::gmm_analytic: {
        vptrunc::GmmSpec spec = vptrunc::default_gmm(d);
        den = vptrunc::make_gmm_denoiser(std::move(spec));
        break;
      }
      case vptrunc::DenoiserKind::linear_per_step: {
        if (sm_input.empty())
          throw vptrunc::ParamError(
              "--denoiser linear requires --input for fitting");
        const auto ds = load_input(sm_input, sm_modality);
        const auto centered = vptrunc::center(ds);
        v_hat = vptrunc::compute_stats(centered).avg_var;
        std::vector<int> steps(static_cast<std::size_t>(start));
        std::iota(steps.begin(), steps.end(), 1);
        den = vptrunc::fit_linear_denoiser(centered, schedule, steps,
                                           vptrunc::mix_seed(g.seed, 1));
        break;
      }
    }

    vptrunc::DatasetStats st;
    st.centered = true;
    st.avg_var = v_hat;
    const auto vpath = vptrunc::propagate_variance(st, schedule);
    const auto init = vptrunc::truncated_prior(vpath, start, n, d,
                                               vptrunc::mix_seed(g.seed, 2));
    const auto batch = vptrunc::ancestral_sample(den, schedule, start, init,
                                                 vptrunc::mix_seed(g.seed, 3));
    std::string path;
    write_dataset_any(out_file(g, "samples"), g.format, batch.values, &path);
    json meta = vptrunc::to_json(batch.prov);
    meta["path"] = path;
    meta["config"] = echo;
    vptrunc::write_json(out_file(g, "samples.meta.json"), meta);
    std::cout << "wrote " << path << " (start_step=" << start
              << ", denoiser=" << batch.prov.denoiser_id << ")\n";
    return 0;
  }

  if (bench->parsed()) {
    const auto spec = bench_family.build(cfg, g.seed);
    vptrunc::PipelineParams params;
    params.schedule_kind =
        cfg.pick(bench_sched.kind_opt, bench_sched.kind, "schedule",
                 std::string("linear"));
    params.T = cfg.pick(bench_sched.T_opt, bench_sched.T, "T", 1000);
    params.beta_start = cfg.pick(bench_sched.bs_opt, bench_sched.beta_start,
                                 "beta_start", 1e-4);
    params.beta_end =
        cfg.pick(bench_sched.be_opt, bench_sched.beta_end, "beta_end", 0.02);
    params.tstar = bench_tstar.build(cfg);
    params.denoiser = vptrunc::denoiser_kind_from_string(
        cfg.pick(bd_opt, bench_denoiser, "denoiser", std::string("gmm")));
    params.sample_n =
        cfg.pick(bn_opt, bench_sample_n, "sample_n", std::size_t{10000});
    params.timing_reps = cfg.pick(br_opt, bench_reps, "timing_reps", 5);
    params.fit_pairs =
        cfg.pick(bf_opt, bench_fit_pairs, "fit_pairs", std::size_t{100000});
    params.seed = g.seed;

    const auto rep = vptrunc::run_pipeline(spec, params);
    json decision = vptrunc::to_json(rep.decision);
    decision["config"] = echo;
    vptrunc::write_json(out_file(g, "decision.json"), decision);
    json vp = vptrunc::to_json(rep.variance_path);
    vp["config"] = echo;
    vptrunc::write_json(out_file(g, "variance_path.json"), vp);
    json stats{{"v_hat", rep.v_hat},
               {"mean_residual", rep.mean_residual},
               {"n", rep.n},
               {"d", rep.d},
               {"config", echo}};
    vptrunc::write_json(out_file(g, "stats.json"), stats);
    json report = vptrunc::to_json(rep);
    report["config"] = echo;
    vptrunc::write_json(out_file(g, "benchmark_report.json"), report);
    std::cout << "family=" << rep.family << " t_star=" << rep.decision.t_star
              << " fallback=" << (rep.decision.fallback ? "yes" : "no");
    if (!rep.compare.skipped)
      std::cout << " max_ks=" << rep.compare.max_ks
                << " speedup=" << rep.compare.speedup;
    std::cout << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const vptrunc::ParamError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const vptrunc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
