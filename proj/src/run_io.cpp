#include "hlreg/run_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hlreg/binning.hpp"

namespace hlreg {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
  }
}

LossConfig loss_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"kind", "sigma", "sigma_scale", "epsilon", "noise_std",
                       "noise_resample_each_epoch", "clip_threshold"},
                      "loss");
  LossConfig cfg;
  cfg.kind = parse_loss_kind(j.at("kind").get<std::string>());
  cfg.sigma = j.value("sigma", cfg.sigma);
  cfg.sigma_scale = j.value("sigma_scale", cfg.sigma_scale);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.noise_std = j.value("noise_std", cfg.noise_std);
  cfg.noise_resample_each_epoch =
      j.value("noise_resample_each_epoch", cfg.noise_resample_each_epoch);
  cfg.clip_threshold = j.value("clip_threshold", cfg.clip_threshold);
  return cfg;
}

json loss_config_to_json(const LossConfig& cfg) {
  json j;
  j["kind"] = loss_kind_name(cfg.kind);
  if (cfg.sigma > 0.0) j["sigma"] = cfg.sigma;
  j["sigma_scale"] = cfg.sigma_scale;
  j["epsilon"] = cfg.epsilon;
  j["noise_std"] = cfg.noise_std;
  j["noise_resample_each_epoch"] = cfg.noise_resample_each_epoch;
  j["clip_threshold"] = cfg.clip_threshold;
  return j;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"name", "seed", "epochs", "batch_size", "learning_rate", "dropout_rate",
                       "hidden", "loss", "grid", "split", "subsample_train", "subsample_test",
                       "train_head_only", "record_grad_norm", "dataset"},
                      "run config");
  RunConfig cfg;
  cfg.name = j.value("name", cfg.name);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
  if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::vector<int>>();
  if (j.contains("loss")) cfg.loss = loss_config_from_json(j.at("loss"));
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    reject_unknown_keys(g, {"bins", "lo", "hi", "padding"}, "grid");
    cfg.grid.bins = g.value("bins", cfg.grid.bins);
    if (g.contains("lo")) cfg.grid.lo = g.at("lo").get<double>();
    if (g.contains("hi")) cfg.grid.hi = g.at("hi").get<double>();
    cfg.grid.padding = g.value("padding", cfg.grid.padding);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    reject_unknown_keys(s, {"mode", "test_fraction", "train_count", "test_count"}, "split");
    const std::string mode = s.value("mode", "random");
    if (mode == "random") {
      cfg.split.mode = SplitSpec::Mode::kRandom;
      cfg.split.test_fraction = s.value("test_fraction", cfg.split.test_fraction);
    } else if (mode == "head_tail") {
      cfg.split.mode = SplitSpec::Mode::kHeadTail;
      cfg.split.train_count = s.at("train_count").get<int>();
      cfg.split.test_count = s.at("test_count").get<int>();
    } else {
      throw std::invalid_argument("config: unknown split mode '" + mode + "'");
    }
  }
  cfg.subsample_train = j.value("subsample_train", cfg.subsample_train);
  cfg.subsample_test = j.value("subsample_test", cfg.subsample_test);
  cfg.train_head_only = j.value("train_head_only", cfg.train_head_only);
  cfg.record_grad_norm = j.value("record_grad_norm", cfg.record_grad_norm);
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown_keys(
        d, {"path", "name", "target_column", "drop_columns", "delimiter", "header", "checksum"},
        "dataset");
    cfg.dataset.path = d.value("path", "");
    cfg.dataset.name = d.value("name", "");
    cfg.dataset.schema.target_column = d.value("target_column", "");
    if (d.contains("drop_columns")) {
      cfg.dataset.schema.drop_columns = d.at("drop_columns").get<std::vector<std::string>>();
    }
    const std::string delim = d.value("delimiter", ",");
    if (delim.size() != 1) throw std::invalid_argument("config: delimiter must be one character");
    cfg.dataset.schema.delimiter = delim[0];
    cfg.dataset.schema.header = d.value("header", true);
    cfg.dataset.checksum = d.value("checksum", "");
  }
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["dropout_rate"] = cfg.dropout_rate;
  j["hidden"] = cfg.hidden;
  j["loss"] = loss_config_to_json(cfg.loss);
  json grid;
  grid["bins"] = cfg.grid.bins;
  if (cfg.grid.lo) grid["lo"] = *cfg.grid.lo;
  if (cfg.grid.hi) grid["hi"] = *cfg.grid.hi;
  grid["padding"] = cfg.grid.padding;
  j["grid"] = grid;
  json split;
  if (cfg.split.mode == SplitSpec::Mode::kRandom) {
    split["mode"] = "random";
    split["test_fraction"] = cfg.split.test_fraction;
  } else {
    split["mode"] = "head_tail";
    split["train_count"] = cfg.split.train_count;
    split["test_count"] = cfg.split.test_count;
  }
  j["split"] = split;
  j["subsample_train"] = cfg.subsample_train;
  j["subsample_test"] = cfg.subsample_test;
  j["train_head_only"] = cfg.train_head_only;
  j["record_grad_norm"] = cfg.record_grad_norm;
  if (!cfg.dataset.path.empty()) {
    json d;
    d["path"] = cfg.dataset.path;
    if (!cfg.dataset.name.empty()) d["name"] = cfg.dataset.name;
    d["target_column"] = cfg.dataset.schema.target_column;
    d["drop_columns"] = cfg.dataset.schema.drop_columns;
    d["delimiter"] = std::string(1, cfg.dataset.schema.delimiter);
    d["header"] = cfg.dataset.schema.header;
    if (!cfg.dataset.checksum.empty()) d["checksum"] = cfg.dataset.checksum;
    j["dataset"] = d;
  }
  return j;
}

std::string history_csv(const RunHistory& history) {
  std::string out =
      "epoch,train_objective,train_mae,train_rmse,"
      "test_objective,test_mae,test_rmse,head_grad_norm\n";
  for (const auto& r : history.records) {
    out += std::to_string(r.epoch);
    for (const double v : {r.train.objective, r.train.mae, r.train.rmse, r.test.objective,
                           r.test.mae, r.test.rmse, r.head_grad_norm}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

json metrics_to_json(const Metrics& m) {
  return json{{"objective", m.objective}, {"mae", m.mae}, {"rmse", m.rmse}};
}

json run_summary_json(const RunConfig& config, const RunResult& result) {
  json j;
  j["config"] = run_config_to_json(config);
  j["final"] = {{"train", metrics_to_json(result.final_train)},
                {"test", metrics_to_json(result.final_test)}};
  j["epochs_completed"] = result.history.records.size();
  j["clamped_targets"] = result.clamped_targets;
  if (result.model.sigma) j["resolved_sigma"] = *result.model.sigma;
  if (result.model.loss.grid) {
    j["resolved_grid"] = {{"lo", result.model.loss.grid->lo},
                          {"hi", result.model.loss.grid->hi},
                          {"bins", result.model.loss.grid->bins}};
  }
  return j;
}

std::string checkpoint_to_string(const Network& net) {
  std::string out = "hlreg-net v1\n";
  out += "head ";
  switch (net.arch.head) {
    case HeadKind::kSoftmax: out += "softmax"; break;
    case HeadKind::kScalar: out += "scalar"; break;
    case HeadKind::kScalarFromSoftmax: out += "scalar_from_softmax"; break;
  }
  out += ' ' + std::to_string(net.arch.head_units) + '\n';
  out += "input_dim " + std::to_string(net.arch.input_dim) + '\n';
  out += "layers " + std::to_string(net.layers.size()) + '\n';
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    out += "layer " + std::to_string(l) + ' ' + std::to_string(layer.weights.rows()) + ' ' +
           std::to_string(layer.weights.cols()) + '\n';
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        if (c) out += ' ';
        out += format_double(layer.weights(r, c));
      }
      out += '\n';
    }
    out += "bias";
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      out += ' ';
      out += format_double(layer.bias[r]);
    }
    out += '\n';
  }
  return out;
}

Network checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  auto expect = [&](const std::string& token) {
    if (!(in >> word) || word != token) {
      throw std::runtime_error("checkpoint: expected '" + token + "', found '" + word + "'");
    }
  };
  expect("hlreg-net");
  expect("v1");
  expect("head");
  std::string head_name;
  int head_units = 0;
  if (!(in >> head_name >> head_units)) throw std::runtime_error("checkpoint: bad head line");
  expect("input_dim");
  int input_dim = 0;
  in >> input_dim;
  expect("layers");
  std::size_t layer_count = 0;
  in >> layer_count;
  if (!in || layer_count == 0) throw std::runtime_error("checkpoint: bad layer count");

  Network net;
  net.arch.input_dim = input_dim;
  net.arch.head_units = head_units;
  if (head_name == "softmax") {
    net.arch.head = HeadKind::kSoftmax;
  } else if (head_name == "scalar") {
    net.arch.head = HeadKind::kScalar;
  } else if (head_name == "scalar_from_softmax") {
    net.arch.head = HeadKind::kScalarFromSoftmax;
  } else {
    throw std::runtime_error("checkpoint: unknown head '" + head_name + "'");
  }

  for (std::size_t l = 0; l < layer_count; ++l) {
    expect("layer");
    std::size_t index = 0;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> index >> rows >> cols) || index != l || rows < 1 || cols < 1) {
      throw std::runtime_error("checkpoint: bad layer header at layer " + std::to_string(l));
    }
    Layer layer;
    layer.weights.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(in >> layer.weights(r, c))) {
          throw std::runtime_error("checkpoint: truncated weights at layer " + std::to_string(l));
        }
      }
    }
    expect("bias");
    layer.bias.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!(in >> layer.bias[r])) {
        throw std::runtime_error("checkpoint: truncated bias at layer " + std::to_string(l));
      }
    }
    if (l + 1 < layer_count) net.arch.hidden.push_back(static_cast<int>(rows));
    net.layers.push_back(std::move(layer));
  }
  return net;
}

void save_checkpoint(const Network& net, const std::string& path) {
  atomic_write(path, checkpoint_to_string(net));
}

Network load_checkpoint(const std::string& path) {
  return checkpoint_from_string(read_file(path));
}

void atomic_write(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_checksum(const std::string& path) {
  const std::string data = read_file(path);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string histogram_csv(const Eigen::VectorXd& values, const BinGrid& grid) {
  if (values.size() == 0) throw std::invalid_argument("histogram: no values");
  std::vector<long> counts(static_cast<std::size_t>(grid.bins), 0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    ++counts[static_cast<std::size_t>(locate_bin(grid, values[i]))];
  }
  std::string out = "bin_center,count\n";
  for (int i = 0; i < grid.bins; ++i) {
    out += format_double(grid.centers[i]);
    out += ',';
    out += std::to_string(counts[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  return out;
}

}  // namespace hlreg
