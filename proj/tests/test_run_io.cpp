#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hlreg/run_io.hpp"
#include "support/synth.hpp"

using namespace hlreg;
using nlohmann::json;

TEST_SUITE_BEGIN("run_io");

TEST_CASE("config round trip") {
  RunConfig cfg;
  cfg.name = "demo";
  cfg.seed = 17;
  cfg.epochs = 42;
  cfg.hidden = {32, 16};
  cfg.loss.kind = LossKind::kHLGaussian;
  cfg.loss.sigma_scale = 2.0;
  cfg.grid.bins = 50;
  cfg.grid.lo = 0.0;
  cfg.grid.hi = 100.0;
  cfg.subsample_train = 1000;
  cfg.dataset.path = "data/foo.csv";
  cfg.dataset.schema.target_column = "y";
  cfg.dataset.schema.drop_columns = {"id"};

  const RunConfig back = run_config_from_json(run_config_to_json(cfg));
  CHECK(back.name == cfg.name);
  CHECK(back.seed == cfg.seed);
  CHECK(back.epochs == cfg.epochs);
  CHECK(back.hidden == cfg.hidden);
  CHECK(back.loss.kind == cfg.loss.kind);
  CHECK(back.loss.sigma_scale == cfg.loss.sigma_scale);
  CHECK(back.grid.bins == cfg.grid.bins);
  CHECK(*back.grid.lo == 0.0);
  CHECK(*back.grid.hi == 100.0);
  CHECK(back.subsample_train == 1000);
  CHECK(back.dataset.path == cfg.dataset.path);
  CHECK(back.dataset.schema.target_column == "y");
  CHECK(back.dataset.schema.drop_columns == std::vector<std::string>{"id"});
}

TEST_CASE("unknown config keys are rejected") {
  json j = {{"name", "x"}, {"epocbs", 3}};
  CHECK_THROWS_WITH_AS(static_cast<void>(run_config_from_json(j)),
                       doctest::Contains("epocbs"), std::invalid_argument);
  json nested = {{"loss", {{"kind", "l2"}, {"sgma", 1.0}}}};
  CHECK_THROWS(static_cast<void>(run_config_from_json(nested)));
}

TEST_CASE("history csv format") {
  RunHistory h;
  EpochRecord r;
  r.epoch = 1;
  r.train = {0.5, 1.25, 2.5};
  r.test = {0.75, 1.5, 3.0};
  r.head_grad_norm = 0.125;
  h.records.push_back(r);
  const std::string csv = history_csv(h);
  CHECK(csv ==
        "epoch,train_objective,train_mae,train_rmse,"
        "test_objective,test_mae,test_rmse,head_grad_norm\n"
        "1,0.5,1.25,2.5,0.75,1.5,3,0.125\n");

  // 17 significant digits survive the round trip
  RunHistory h2;
  r.train.objective = 0.1 + 0.2;  // 0.30000000000000004
  h2.records.push_back(r);
  CHECK(history_csv(h2).find("0.30000000000000004") != std::string::npos);
}

TEST_CASE("checkpoints round trip bit-exactly") {
  const Network net =
      init_network(make_architecture(7, {5, 3}, HeadKind::kSoftmax, 11), 99);
  const Network back = checkpoint_from_string(checkpoint_to_string(net));
  CHECK(back.arch.input_dim == 7);
  CHECK(back.arch.head == HeadKind::kSoftmax);
  CHECK(back.arch.head_units == 11);
  CHECK(back.arch.hidden == std::vector<int>{5, 3});
  REQUIRE(back.layers.size() == net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(back.layers[l].weights == net.layers[l].weights);
    CHECK(back.layers[l].bias == net.layers[l].bias);
  }

  CHECK_THROWS(checkpoint_from_string("garbage"));
  CHECK_THROWS(checkpoint_from_string("hlreg-net v1\nhead softmax 4\ninput_dim 2\nlayers 1\n"));
}

TEST_CASE("checkpoint files") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "hlreg_ckpt_test.txt").string();
  const Network net = init_network(make_architecture(3, {4}, HeadKind::kScalar, 1), 5);
  save_checkpoint(net, path);
  const Network back = load_checkpoint(path);
  CHECK(back.layers[0].weights == net.layers[0].weights);
  std::remove(path.c_str());
  CHECK_THROWS(load_checkpoint(path));
}

TEST_CASE("atomic writes leave no temp files") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "hlreg_atomic_test.txt").string();
  atomic_write(path, "hello\n");
  CHECK(read_file(path) == "hello\n");
  CHECK(!fs::exists(path + ".tmp"));
  atomic_write(path, "replaced\n");
  CHECK(read_file(path) == "replaced\n");
  std::remove(path.c_str());
}

TEST_CASE("file checksum is stable and content sensitive") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "hlreg_cksum_test.txt").string();
  atomic_write(path, "abc");
  const std::string a = file_checksum(path);
  CHECK(a == file_checksum(path));
  CHECK(a.size() == 16);
  atomic_write(path, "abd");
  CHECK(a != file_checksum(path));
  std::remove(path.c_str());
}

TEST_CASE("target histogram emission") {
  Eigen::VectorXd y(3);
  y << 0.0, 0.0, 1.0;
  const BinGrid g = make_bin_grid(0.0, 1.0, 2);
  CHECK(histogram_csv(y, g) == "bin_center,count\n0.25,2\n0.75,1\n");

  // counts always sum to n
  const Dataset ds = testing::make_synthetic(500, 3, 77);
  const BinGrid wide = make_bin_grid(0.0, 100.0, 10);
  const std::string csv = histogram_csv(ds.targets, wide);
  long total = 0;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    total += std::stol(line.substr(line.find(',') + 1));
  }
  CHECK(total == 500);
}

TEST_CASE("run summary embeds the resolved config") {
  const Dataset ds = testing::make_synthetic(200, 4, 3);
  RunConfig cfg;
  cfg.name = "summary_test";
  cfg.epochs = 1;
  cfg.hidden = {8};
  cfg.batch_size = 64;
  cfg.loss.kind = LossKind::kHLGaussian;
  cfg.grid.bins = 8;
  const RunResult result = train_run(cfg, ds);
  const json j = run_summary_json(cfg, result);
  CHECK(j["config"]["name"] == "summary_test");
  CHECK(j["config"]["loss"]["kind"] == "hl-gaussian");
  CHECK(j["final"]["test"].contains("mae"));
  CHECK(j["resolved_grid"]["bins"] == 8);
  CHECK(j["resolved_sigma"].get<double>() > 0.0);
  CHECK(j["epochs_completed"] == 1);
}

TEST_SUITE_END();
