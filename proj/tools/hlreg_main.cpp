// Batch entry point: training runs, parameter sweeps, representation
// experiments, gradient-norm instrumentation, the gradient-check oracle and
// the least-squares baseline. Every subcommand writes plot-ready CSV/JSON
// artifacts that embed their resolved configuration.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hlreg/harness.hpp"
#include "hlreg/run_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::string name;
  bool overwrite = false;
  int parallelism = 1;
  // flag overrides; negative/empty means "not set"
  long long seed = -1;
  int epochs = -1;
  std::string loss;
  int bins = -1;
  double sigma_scale = -1.0;
  double dropout_rate = -1.0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_model_flags = true) {
  cmd->add_option("--config", opts.config_path, "run config JSON");
  cmd->add_option("--data", opts.data_path, "dataset CSV path (overrides config)");
  cmd->add_option("--out", opts.out_dir, "output directory (default $HLREG_OUT_DIR or ./runs)");
  cmd->add_option("--name", opts.name, "run name override");
  cmd->add_flag("--overwrite", opts.overwrite, "replace existing run outputs");
  cmd->add_option("--parallelism", opts.parallelism, "worker pool size");
  if (with_model_flags) {
    cmd->add_option("--seed", opts.seed, "master seed override");
    cmd->add_option("--epochs", opts.epochs, "epoch count override");
    cmd->add_option("--loss", opts.loss, "loss kind override");
    cmd->add_option("--bins", opts.bins, "bin count override");
    cmd->add_option("--sigma-scale", opts.sigma_scale, "sigma as a multiple of the bin width");
    cmd->add_option("--dropout", opts.dropout_rate, "input dropout rate override");
  }
}

hlreg::RunConfig apply_overrides(hlreg::RunConfig cfg, const CommonOpts& opts);

hlreg::RunConfig load_config(const CommonOpts& opts) {
  hlreg::RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = hlreg::run_config_from_json(json::parse(hlreg::read_file(opts.config_path)));
  }
  cfg = apply_overrides(std::move(cfg), opts);
  if (!opts.name.empty()) cfg.name = opts.name;
  return cfg;
}

std::string resolve_out_dir(const CommonOpts& opts) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* env = std::getenv("HLREG_OUT_DIR")) return env;
  return "runs";
}

hlreg::Dataset load_dataset(const hlreg::RunConfig& cfg) {
  if (cfg.dataset.path.empty()) {
    throw std::runtime_error("no dataset path given (config dataset.path or --data)");
  }
  if (!fs::exists(cfg.dataset.path)) {
    throw std::runtime_error("dataset file not found: " + cfg.dataset.path);
  }
  if (!cfg.dataset.checksum.empty()) {
    const std::string actual = hlreg::file_checksum(cfg.dataset.path);
    if (actual != cfg.dataset.checksum) {
      throw std::runtime_error("dataset checksum mismatch for " + cfg.dataset.path +
                               ": manifest " + cfg.dataset.checksum + ", file " + actual);
    }
  }
  hlreg::CsvSchema schema = cfg.dataset.schema;
  if (schema.target_column.empty()) {
    throw std::runtime_error("dataset schema must name a target column");
  }
  return hlreg::load_csv(cfg.dataset.path, schema,
                         cfg.dataset.name.empty() ? cfg.dataset.path : cfg.dataset.name);
}

fs::path ensure_run_dir(const std::string& out_dir, const std::string& name, bool overwrite) {
  const fs::path dir = fs::path(out_dir) / name;
  if (fs::exists(dir) && !overwrite) {
    throw std::runtime_error("output directory exists (use --overwrite): " + dir.string());
  }
  fs::create_directories(dir);
  return dir;
}

void write_run_outputs(const fs::path& dir, const hlreg::RunConfig& cfg,
                       const hlreg::RunResult& result) {
  hlreg::atomic_write((dir / "history.csv").string(), hlreg::history_csv(result.history));
  hlreg::atomic_write((dir / "summary.json").string(),
                      hlreg::run_summary_json(cfg, result).dump(2) + "\n");
  hlreg::save_checkpoint(result.model.net, (dir / "model.ckpt").string());
}

// Applies the command-line overrides on top of a config parsed from a file.
hlreg::RunConfig apply_overrides(hlreg::RunConfig cfg, const CommonOpts& opts) {
  if (!opts.data_path.empty()) cfg.dataset.path = opts.data_path;
  if (opts.seed >= 0) cfg.seed = static_cast<uint64_t>(opts.seed);
  if (opts.epochs >= 0) cfg.epochs = opts.epochs;
  if (!opts.loss.empty()) cfg.loss.kind = hlreg::parse_loss_kind(opts.loss);
  if (opts.bins > 0) cfg.grid.bins = opts.bins;
  if (opts.sigma_scale > 0) {
    cfg.loss.sigma = 0.0;
    cfg.loss.sigma_scale = opts.sigma_scale;
  }
  if (opts.dropout_rate >= 0) cfg.dropout_rate = opts.dropout_rate;
  return cfg;
}

// An experiment file bundles several runs:
//   {"output_dir": ..., "parallelism": N, "dataset": {...}, "runs": [RunConfig...]}
// Run names must be unique; a run without its own dataset inherits the
// top-level one.
int run_experiment_file(const json& doc, const CommonOpts& opts) {
  if (!doc.at("runs").is_array() || doc.at("runs").empty()) {
    throw std::runtime_error("experiment file: 'runs' must be a nonempty array");
  }
  std::vector<hlreg::RunConfig> runs;
  std::set<std::string> names;
  for (const json& entry : doc.at("runs")) {
    hlreg::RunConfig cfg = hlreg::run_config_from_json(entry);
    if (cfg.dataset.path.empty() && doc.contains("dataset")) {
      json patched = entry;
      patched["dataset"] = doc.at("dataset");
      cfg = hlreg::run_config_from_json(patched);
    }
    cfg = apply_overrides(std::move(cfg), opts);
    if (!names.insert(cfg.name).second) {
      throw std::runtime_error("experiment file: duplicate run name '" + cfg.name + "'");
    }
    runs.push_back(std::move(cfg));
  }

  const std::string out_dir = !opts.out_dir.empty()
                                  ? opts.out_dir
                                  : doc.value("output_dir", resolve_out_dir(opts));
  int workers = opts.parallelism;
  if (workers <= 1) workers = doc.value("parallelism", 1);

  // every referenced dataset must exist before any run starts
  std::map<std::string, hlreg::Dataset> datasets;
  for (const auto& cfg : runs) {
    if (!datasets.contains(cfg.dataset.path)) {
      datasets.emplace(cfg.dataset.path, load_dataset(cfg));
    }
  }
  std::vector<fs::path> dirs;
  for (const auto& cfg : runs) {
    dirs.push_back(ensure_run_dir(out_dir, cfg.name, opts.overwrite));
  }

  std::vector<std::function<void()>> jobs;
  std::vector<hlreg::RunResult> results(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    jobs.emplace_back(
        [&, i] { results[i] = hlreg::train_run(runs[i], datasets.at(runs[i].dataset.path)); });
  }
  hlreg::run_parallel(jobs, workers);

  json summary;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    write_run_outputs(dirs[i], runs[i], results[i]);
    summary["runs"].push_back(
        {{"name", runs[i].name},
         {"train", hlreg::metrics_to_json(results[i].final_train)},
         {"test", hlreg::metrics_to_json(results[i].final_test)}});
  }
  hlreg::atomic_write((fs::path(out_dir) / "experiment_summary.json").string(),
                      summary.dump(2) + "\n");
  std::cout << summary["runs"].dump(2) << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  if (!opts.config_path.empty()) {
    const json doc = json::parse(hlreg::read_file(opts.config_path));
    if (doc.contains("runs")) return run_experiment_file(doc, opts);
  }
  const hlreg::RunConfig cfg = load_config(opts);
  const hlreg::Dataset data = load_dataset(cfg);
  const fs::path dir = ensure_run_dir(resolve_out_dir(opts), cfg.name, opts.overwrite);
  const hlreg::RunResult result = hlreg::train_run(cfg, data);
  write_run_outputs(dir, cfg, result);
  std::cout << hlreg::run_summary_json(cfg, result)["final"].dump(2) << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& axis_name,
              const std::vector<double>& values) {
  const hlreg::RunConfig cfg = load_config(opts);
  const hlreg::Dataset data = load_dataset(cfg);
  hlreg::SweepAxis axis;
  if (axis_name == "bins") {
    axis = hlreg::SweepAxis::kBins;
  } else if (axis_name == "sigma") {
    axis = hlreg::SweepAxis::kSigmaScale;
  } else {
    throw std::runtime_error("unknown sweep axis '" + axis_name + "' (bins|sigma)");
  }
  const fs::path dir =
      ensure_run_dir(resolve_out_dir(opts), cfg.name + "_sweep_" + axis_name, opts.overwrite);
  const auto points = hlreg::sweep(cfg, axis, values, data, opts.parallelism);

  json summary;
  summary["axis"] = axis_name;
  summary["template"] = hlreg::run_config_to_json(cfg);
  for (const auto& p : points) {
    hlreg::atomic_write((dir / (p.config.name + ".csv")).string(), hlreg::history_csv(p.history));
    summary["points"].push_back({{"value", p.value},
                                 {"name", p.config.name},
                                 {"train", hlreg::metrics_to_json(p.train)},
                                 {"test", hlreg::metrics_to_json(p.test)}});
  }
  hlreg::atomic_write((dir / "sweep_summary.json").string(), summary.dump(2) + "\n");
  std::cout << summary["points"].dump(2) << "\n";
  return 0;
}

int cmd_repr(const CommonOpts& opts, const std::string& mode_name,
             const std::string& source_loss, const std::string& target_loss) {
  const hlreg::RunConfig cfg = load_config(opts);
  const hlreg::Dataset data = load_dataset(cfg);
  hlreg::ReprMode mode;
  if (mode_name == "fixed") {
    mode = hlreg::ReprMode::kFixed;
  } else if (mode_name == "initialized") {
    mode = hlreg::ReprMode::kInitialized;
  } else if (mode_name == "random") {
    mode = hlreg::ReprMode::kRandom;
  } else {
    throw std::runtime_error("unknown repr mode '" + mode_name +
                             "' (fixed|initialized|random)");
  }
  hlreg::LossConfig source = cfg.loss;
  source.kind = hlreg::parse_loss_kind(source_loss);
  hlreg::LossConfig target = cfg.loss;
  target.kind = hlreg::parse_loss_kind(target_loss);

  const fs::path dir = ensure_run_dir(resolve_out_dir(opts),
                                      cfg.name + "_repr_" + mode_name, opts.overwrite);
  const hlreg::ReprResult result =
      hlreg::representation_experiment(mode, source, target, cfg, data);

  json summary;
  summary["mode"] = mode_name;
  summary["source_loss"] = source_loss;
  summary["target_loss"] = target_loss;
  summary["config"] = hlreg::run_config_to_json(cfg);
  summary["target"] = {{"train", hlreg::metrics_to_json(result.target.final_train)},
                       {"test", hlreg::metrics_to_json(result.target.final_test)}};
  hlreg::atomic_write((dir / "target_history.csv").string(),
                      hlreg::history_csv(result.target.history));
  hlreg::save_checkpoint(result.target.model.net, (dir / "target_model.ckpt").string());
  if (result.source) {
    summary["source"] = {{"train", hlreg::metrics_to_json(result.source->final_train)},
                         {"test", hlreg::metrics_to_json(result.source->final_test)}};
    hlreg::atomic_write((dir / "source_history.csv").string(),
                        hlreg::history_csv(result.source->history));
    hlreg::save_checkpoint(result.source->model.net, (dir / "source_model.ckpt").string());
  }
  hlreg::atomic_write((dir / "repr_summary.json").string(), summary.dump(2) + "\n");
  std::cout << summary["target"].dump(2) << "\n";
  return 0;
}

int cmd_gradnorm(const CommonOpts& opts, std::vector<std::string> losses) {
  hlreg::RunConfig cfg = load_config(opts);
  cfg.dropout_rate = 0.0;  // isolate the loss's effect on the gradients
  cfg.record_grad_norm = true;
  const hlreg::Dataset data = load_dataset(cfg);
  if (losses.empty()) losses = {"l2", "hl-gaussian", "hl-onebin"};

  const fs::path dir =
      ensure_run_dir(resolve_out_dir(opts), cfg.name + "_gradnorm", opts.overwrite);

  std::vector<hlreg::RunResult> results(losses.size());
  std::vector<hlreg::RunConfig> configs(losses.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    jobs.emplace_back([&, i] {
      hlreg::RunConfig c = cfg;
      c.loss.kind = hlreg::parse_loss_kind(losses[i]);
      c.name = cfg.name + "_" + losses[i];
      configs[i] = c;
      results[i] = hlreg::train_run(c, data);
    });
  }
  hlreg::run_parallel(jobs, opts.parallelism);

  json summary;
  summary["config"] = hlreg::run_config_to_json(cfg);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::vector<double> norms;
    for (const auto& rec : results[i].history.records) norms.push_back(rec.head_grad_norm);
    const double med = hlreg::median(norms);
    summary["losses"].push_back(
        {{"loss", losses[i]},
         {"median_head_grad_norm", med},
         {"iqr_median_normalized", hlreg::interquartile_range(hlreg::median_normalize(norms))},
         {"final_test", hlreg::metrics_to_json(results[i].final_test)}});
    hlreg::atomic_write((dir / (configs[i].name + ".csv")).string(),
                        hlreg::history_csv(results[i].history));
  }
  hlreg::atomic_write((dir / "gradnorm_summary.json").string(), summary.dump(2) + "\n");
  std::cout << summary["losses"].dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(int trials, long long seed, const std::string& out_path) {
  const hlreg::GradcheckReport report =
      hlreg::gradcheck_suite(trials, static_cast<uint64_t>(seed));
  json j;
  j["trials"] = report.trials;
  j["parameters_checked"] = report.parameters_checked;
  j["failures"] = report.failures;
  j["max_rel_error"] = report.max_rel_error;
  j["max_abs_error_small"] = report.max_abs_error_small;
  j["worst_case"] = report.worst_case;
  j["pass"] = report.pass;
  if (!out_path.empty()) hlreg::atomic_write(out_path, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return report.pass ? 0 : 1;
}

int cmd_baseline_ols(const CommonOpts& opts) {
  const hlreg::RunConfig cfg = load_config(opts);
  const hlreg::Dataset data = load_dataset(cfg);
  const hlreg::OlsResult result = hlreg::ols_run(cfg, data);
  json j;
  j["config"] = hlreg::run_config_to_json(cfg);
  j["train"] = hlreg::metrics_to_json(result.train);
  j["test"] = hlreg::metrics_to_json(result.test);
  const fs::path dir =
      ensure_run_dir(resolve_out_dir(opts), cfg.name + "_ols", opts.overwrite);
  hlreg::atomic_write((dir / "ols_summary.json").string(), j.dump(2) + "\n");
  std::cout << j["train"].dump() << "\n" << j["test"].dump() << "\n";
  return 0;
}

int cmd_hist(const CommonOpts& opts, int bins, double lo, double hi, bool has_range) {
  const hlreg::RunConfig cfg = load_config(opts);
  const hlreg::Dataset data = load_dataset(cfg);
  const double grid_lo = has_range ? lo : data.targets.minCoeff();
  double grid_hi = has_range ? hi : data.targets.maxCoeff();
  if (grid_hi <= grid_lo) grid_hi = grid_lo + 1.0;
  const hlreg::BinGrid grid = hlreg::make_bin_grid(grid_lo, grid_hi, bins);
  const std::string csv = hlreg::histogram_csv(data.targets, grid);
  const fs::path dir =
      ensure_run_dir(resolve_out_dir(opts), cfg.name + "_hist", opts.overwrite);
  hlreg::atomic_write((dir / "target_histogram.csv").string(), csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histogram-loss regression toolkit"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "run one training configuration");
  add_common(train, train_opts);

  CommonOpts sweep_opts;
  std::string sweep_axis = "bins";
  std::vector<double> sweep_values;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "one run per axis value");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--axis", sweep_axis, "bins | sigma")->required();
  sweep_cmd->add_option("--values", sweep_values, "axis values")->required()->delimiter(',');

  CommonOpts repr_opts;
  std::string repr_mode, repr_source = "hl-gaussian", repr_target = "l2";
  CLI::App* repr = app.add_subcommand("repr", "representation transfer experiment");
  add_common(repr, repr_opts);
  repr->add_option("--mode", repr_mode, "fixed | initialized | random")->required();
  repr->add_option("--source-loss", repr_source, "loss that trains the representation");
  repr->add_option("--target-loss", repr_target, "loss retrained on top of it");

  CommonOpts gn_opts;
  std::vector<std::string> gn_losses;
  CLI::App* gradnorm = app.add_subcommand(
      "gradnorm", "per-epoch head gradient norms, dropout disabled");
  add_common(gradnorm, gn_opts);
  gradnorm->add_option("--losses", gn_losses, "losses to instrument")->delimiter(',');

  int gc_trials = 100;
  long long gc_seed = 1;
  std::string gc_out;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient oracle");
  gradcheck->add_option("--trials", gc_trials, "random configurations");
  gradcheck->add_option("--seed", gc_seed, "oracle seed");
  gradcheck->add_option("--out", gc_out, "write the JSON report here too");

  CommonOpts ols_opts;
  CLI::App* ols = app.add_subcommand("baseline-ols", "ordinary least squares baseline");
  add_common(ols, ols_opts, false);
  ols->add_option("--seed", ols_opts.seed, "split seed override");

  CommonOpts hist_opts;
  int hist_bins = 100;
  double hist_lo = 0.0, hist_hi = 0.0;
  CLI::App* hist = app.add_subcommand("hist", "target histogram CSV");
  add_common(hist, hist_opts, false);
  hist->add_option("--bins", hist_bins, "bin count");
  CLI::Option* lo_opt = hist->add_option("--lo", hist_lo, "support lower edge");
  hist->add_option("--hi", hist_hi, "support upper edge")->needs(lo_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_opts);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, sweep_axis, sweep_values);
    if (repr->parsed()) return cmd_repr(repr_opts, repr_mode, repr_source, repr_target);
    if (gradnorm->parsed()) return cmd_gradnorm(gn_opts, gn_losses);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_trials, gc_seed, gc_out);
    if (ols->parsed()) return cmd_baseline_ols(ols_opts);
    if (hist->parsed()) {
      const bool has_range = hist->count("--lo") > 0 && hist->count("--hi") > 0;
      return cmd_hist(hist_opts, hist_bins, hist_lo, hist_hi, has_range);
    }
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
