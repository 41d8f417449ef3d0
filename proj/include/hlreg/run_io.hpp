#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "hlreg/harness.hpp"

namespace hlreg {

// JSON <-> config. Unknown keys are rejected so typos cannot silently fall
// back to defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

// One row per epoch:
// epoch,train_objective,train_mae,train_rmse,test_objective,test_mae,test_rmse,head_grad_norm
// Values are printed with 17 significant digits so reruns are byte-identical.
std::string history_csv(const RunHistory& history);

nlohmann::json metrics_to_json(const Metrics& m);

// Config echo + final metrics; every artifact is self-describing.
nlohmann::json run_summary_json(const RunConfig& config, const RunResult& result);

// Plain-text network checkpoint (shapes plus row-major weights, 17
// significant digits); format documented in the README and stable across
// runs.
std::string checkpoint_to_string(const Network& net);
Network checkpoint_from_string(const std::string& text);
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

// Write-to-temp-then-rename so files are never observed half-written.
void atomic_write(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

// FNV-1a 64 of the file bytes, as 16 hex digits; used by dataset manifests.
std::string file_checksum(const std::string& path);

// Two-column CSV (bin_center,count) of target values over a uniform grid.
std::string histogram_csv(const Eigen::VectorXd& values, const BinGrid& grid);

}  // namespace hlreg
