#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rdl/trainer.hpp"

namespace rdl {

// Per-epoch train/test error history as a CSV artifact with a fixed header:
//   epoch,train_loss,train_error,test_error,alpha,learning_rate
// Doubles are printed with %.17g so a parse round-trips exactly. Auxiliary
// losses travel in the JSON sidecar (write_history_json), keyed by tap.
std::string error_curve_csv(const std::vector<EpochMetrics>& history);
std::vector<EpochMetrics> parse_error_curve_csv(const std::string& csv);

void write_error_curve(const std::filesystem::path& csv_path,
                       const std::vector<EpochMetrics>& history);
std::vector<EpochMetrics> read_error_curve(const std::filesystem::path& csv_path);

std::string history_json(const std::vector<EpochMetrics>& history);

}  // namespace rdl
