#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rdl/config.hpp"
#include "rdl/dataset.hpp"
#include "rdl/network.hpp"
#include "rdl/trainer.hpp"

namespace rdl {

// Everything one experiment leaves behind. The run directory additionally
// holds the byte-identical config snapshot, the checkpoint, metrics and RDM
// exports.
struct RunRecord {
  std::string name;
  std::filesystem::path dir;
  std::vector<EpochMetrics> history;
  double final_test_error = 0.0;
  double final_train_error = 0.0;
  std::uint64_t train_hash = 0;
  std::uint64_t test_hash = 0;
  double wall_seconds = 0.0;
};

// Train + test datasets materialized from a config's data section
// (subsetting, validation split and preprocessing already applied).
struct LoadedData {
  Dataset train;
  Dataset validation;
  Dataset test;
};

LoadedData load_data(const RunConfig& config);

// Executes the train -> evaluate -> export pipeline described by `config`.
// `config_text` is persisted byte-identically as the run's config snapshot.
// The run directory is <output_root>/<config.output_dir>/<config.name> and
// is recreated from scratch.
RunRecord run(const RunConfig& config, const std::string& config_text,
              const std::filesystem::path& output_root);

// Convenience: run a config object directly (its canonical serialization
// becomes the snapshot).
RunRecord run(const RunConfig& config, const std::filesystem::path& output_root);

// Cross-run comparison over a shared test set: pairwise McNemar tests with
// direction arrows, an error table, per-tap bootstrap RDM distance matrices
// and their 2-D MDS embeddings. Consumes run directories produced by run().
void compare(const std::vector<std::filesystem::path>& run_dirs,
             const std::filesystem::path& out_dir, std::uint64_t seed = 17);

}  // namespace rdl
