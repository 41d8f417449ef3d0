#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hlreg/data.hpp"
#include "hlreg/losses.hpp"
#include "hlreg/model.hpp"
#include "hlreg/optim.hpp"

namespace hlreg {

// User-facing loss selection, before the bin grid is known; the grid (and
// sigma, when given as a multiple of the bin width) is resolved against the
// training split when a run is prepared.
enum class LossKind {
  kHLGaussian,
  kHLOneBin,
  kHLUniform,
  kL2,
  kL1,
  kL2Softmax,
  kL2Noise,
  kL2Clip,
};

struct LossConfig {
  LossKind kind = LossKind::kL2;
  double sigma = 0.0;        // absolute sigma; 0 means sigma_scale * bin width
  double sigma_scale = 1.0;
  double epsilon = 1e-3;     // uniform-mix weight per off-peak bin
  double noise_std = 1e-2;
  bool noise_resample_each_epoch = true;
  double clip_threshold = 1.0;
};

bool loss_needs_grid(LossKind kind);
bool loss_scalar_head(LossKind kind);
const char* loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct GridConfig {
  int bins = 100;
  std::optional<double> lo;  // default: train target min minus padding
  std::optional<double> hi;
  double padding = 0.0;      // fraction of the train target range
};

struct DatasetConfig {
  std::string path;
  std::string name;
  CsvSchema schema;
  std::string checksum;  // optional fnv1a64 hex of the file bytes
};

struct RunConfig {
  std::string name = "run";
  uint64_t seed = 0;
  int epochs = 150;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double dropout_rate = 0.05;
  std::vector<int> hidden = {192, 192, 192, 192};
  LossConfig loss;
  GridConfig grid;
  SplitSpec split;
  int subsample_train = 0;  // 0 keeps the whole split
  int subsample_test = 0;
  bool train_head_only = false;
  bool record_grad_norm = true;
  DatasetConfig dataset;  // echoed into summaries; resolution happens in the CLI
};

struct Metrics {
  double objective = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  Metrics train;
  Metrics test;
  double head_grad_norm = 0.0;
};

struct RunHistory {
  std::vector<EpochRecord> records;
};

// A trained network together with everything needed to map its outputs back
// to raw target units.
struct TrainedModel {
  Network net;
  LossSpec loss;
  TargetTransform target_transform;
  std::optional<double> sigma;  // resolved sigma for HL-Gaussian runs
};

struct RunResult {
  TrainedModel model;
  RunHistory history;
  Metrics final_train;
  Metrics final_test;
  int clamped_targets = 0;  // targets clamped into the grid support
};

// Raw-unit predictions for standardized features: expected value over bin
// centers for histogram heads, inverse-transformed output for scalar heads.
Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& features);

// Objective under the model's own loss plus MAE/RMSE in raw target units.
Metrics evaluate(const TrainedModel& model, const Eigen::MatrixXd& features,
                 const Eigen::VectorXd& targets_raw);

// Full deterministic training run: split, standardize, transform, project,
// minibatch Adam. Throws on nonfinite losses with epoch/batch context.
RunResult train_run(const RunConfig& config, const Dataset& data);

// Same run but with the hidden stack copied from `hidden_source` instead of
// freshly initialized (the head still comes from the config's init seed).
// Combined with train_head_only this freezes the copied representation.
RunResult train_run_with_hidden(const RunConfig& config, const Dataset& data,
                                const Network& hidden_source);

// Euclidean norm of the mean minibatch gradient restricted to the output
// layer's weight matrix. Targets are in model units (projected coefficients
// are computed here for HL losses).
double head_grad_norm(const TrainedModel& model, const Eigen::MatrixXd& features,
                      const Eigen::VectorXd& targets_model);

// Each entry divided by the series median (median of the result is 1).
std::vector<double> median_normalize(const std::vector<double>& series);
double median(std::vector<double> values);
// Interquartile range with linearly interpolated quartiles.
double interquartile_range(std::vector<double> values);

// Ordinary least squares with an intercept column and a 1e-10 ridge jitter
// on the Gram diagonal. Returns d+1 weights, intercept last.
Eigen::VectorXd ols_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets);

struct OlsResult {
  Eigen::VectorXd weights;
  Metrics train;
  Metrics test;
};

// OLS baseline through the same split/standardize pipeline as train_run.
OlsResult ols_run(const RunConfig& config, const Dataset& data);

enum class ReprMode { kFixed, kInitialized, kRandom };

struct ReprResult {
  RunResult target;                   // run under the target loss
  std::optional<RunResult> source;    // the source-loss run (fixed/initialized modes)
};

// Representation transfer: fixed freezes the source run's hidden stack and
// retrains a fresh head under the target loss; initialized copies the hidden
// stack as a starting point and trains everything; random freezes a freshly
// initialized hidden stack (shared across losses for a given seed) and
// trains the head only.
ReprResult representation_experiment(ReprMode mode, const LossConfig& source_loss,
                                     const LossConfig& target_loss, const RunConfig& base,
                                     const Dataset& data);

struct SweepPoint {
  double value = 0.0;
  RunConfig config;
  Metrics train;
  Metrics test;
  RunHistory history;
};

enum class SweepAxis { kBins, kSigmaScale };

// One full run per axis value with the same master seed everywhere.
std::vector<SweepPoint> sweep(const RunConfig& config_template, SweepAxis axis,
                              const std::vector<double>& values, const Dataset& data,
                              int parallelism = 1);

struct GradcheckReport {
  int trials = 0;
  int parameters_checked = 0;
  int failures = 0;
  double max_rel_error = 0.0;       // among parameters above the absolute floor
  double max_abs_error_small = 0.0; // among parameters below it
  std::string worst_case;
  bool pass = false;
};

// Central finite differences (h = 1e-6) against backprop on random small
// architectures across every loss kind. A parameter passes when the
// absolute difference is below 1e-9 or the relative error is below 1e-5.
GradcheckReport gradcheck_suite(int trials, uint64_t seed);

// Runs jobs on a bounded worker pool; rethrows the first job exception.
void run_parallel(const std::vector<std::function<void()>>& jobs, int workers);

}  // namespace hlreg
