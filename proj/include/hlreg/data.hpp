#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hlreg {

// Rows are samples, targets stay in raw units until a TargetTransform is
// applied. Immutable after load.
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd targets;   // n
  std::string name;
  std::string provenance;

  int size() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

// Column references are names when the file has a header, otherwise 0-based
// indices rendered as strings.
struct CsvSchema {
  std::string target_column;
  std::vector<std::string> drop_columns;
  char delimiter = ',';
  bool header = true;
};

// Strict CSV ingestion: every row must have the declared arity, every cell
// must parse as a decimal real. Missing values are a hard error naming the
// row and column. Row order is preserved.
Dataset load_csv(const std::string& path, const CsvSchema& schema, std::string name = "");

// How a dataset is divided into train and test index sets.
struct SplitSpec {
  enum class Mode { kRandom, kHeadTail };
  Mode mode = Mode::kRandom;
  double test_fraction = 0.2;  // kRandom
  int train_count = 0;         // kHeadTail: first train_count rows train,
  int test_count = 0;          //            next test_count rows test
};

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

// Deterministic shuffle-and-cut; the same seed always yields the same split.
Split split_dataset(int n, double test_fraction, uint64_t seed);
Split split_dataset(int n, const SplitSpec& spec, uint64_t seed);

// Keeps the first `count` indices of an (already shuffled) index list;
// count <= 0 keeps everything.
void subsample(std::vector<int>& indices, int count);

Dataset take(const Dataset& ds, const std::vector<int>& indices);

// Per-feature affine map to zero mean and unit variance, statistics from the
// training split only. Population standard deviation; constant features are
// left unscaled and flagged.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<int> constant_features;

  void apply(Eigen::MatrixXd& features) const;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& train_features);

// Invertible map between raw target units and the training range. Losses on
// scalar heads train in [0,1]; histogram losses keep raw units.
struct TargetTransform {
  enum class Mode { kIdentity, kMinMax01 };
  Mode mode = Mode::kIdentity;
  double train_min = 0.0;
  double train_max = 1.0;

  double forward(double y) const;
  double inverse(double t) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& y) const;
};

TargetTransform fit_target_transform(const Eigen::VectorXd& train_targets,
                                     TargetTransform::Mode mode);

// Seeded permutation of [0, n) cut into consecutive batches; the final short
// batch is included. Every index appears exactly once.
std::vector<std::vector<int>> minibatches(int n, int batch_size, uint64_t epoch_seed);

}  // namespace hlreg
