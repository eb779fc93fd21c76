#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdl/aux_objective.hpp"
#include "rdl/layer.hpp"
#include "rdl/rdm.hpp"
#include "rdl/transfer.hpp"

namespace rdl {

// Optional deterministic sub-selection of the training pool: shuffle with
// `seed`, then take rows [skip, skip+take). Two configs sharing a seed but
// using disjoint ranges train on disjoint data.
struct SubsetSpec {
  bool enabled = false;
  std::uint64_t seed = 0;
  std::size_t skip = 0;
  std::size_t take = 0;
};

struct DataConfig {
  std::string kind;  // "idx" | "synthetic" | "cache"
  std::string train_images, train_labels, test_images, test_labels;
  std::string cache_train, cache_test;
  int classes = 10;
  int per_class = 100;
  int test_per_class = 50;
  std::size_t height = 8, width = 8;
  double separation = 4.0;
  std::uint64_t data_seed = 0;  // generator seed; independent of the run seed
                                // so runs with different seeds share datasets
  std::size_t validation_count = 0;
  SubsetSpec subset;
  bool gcn = false;
  bool hflip_augment = false;
};

struct MethodConfig {
  TransferKind kind = TransferKind::Baseline;
  std::string teacher_checkpoint;
  // finetune
  bool replace_readout = false;
  // deep supervision
  std::vector<std::string> dsn_taps;
  // dsn + rdl
  double alpha0 = 0.0;
  AlphaRule alpha_rule = AlphaRule::RdlLinear;
  // hints
  std::string student_tap, teacher_tap;
  int pretrain_epochs = 0;  // 0: default to 20% of the epoch budget
  // rdl
  std::map<std::string, std::string> tap_map;
  double pair_fraction = 0.05;
  std::size_t pair_count = 0;  // > 0 overrides the fraction
  PairwiseMetric metric = PairwiseMetric::MeanSquaredError;
  bool teacher_rdm_cache = false;
};

struct EvalConfig {
  int bootstrap_samples = 20;
  int bootstrap_size = 100;
  std::size_t bootstrap_pool = 2000;
  bool with_replacement = false;
  PairwiseMetric rdm_metric = PairwiseMetric::MeanSquaredError;
  RdmComparison rdm_comparison = RdmComparison::Correlation;
  std::vector<std::string> taps;       // default: every tap of the architecture
  int export_rdm_images = 100;         // 0 disables RDM artifacts
};

// Complete declarative description of one experiment. Parsing is strict:
// unknown keys anywhere are errors, and validation reports every violated
// constraint at once.
struct RunConfig {
  int schema_version = 1;
  std::string name;
  std::uint64_t seed = 0;
  DataConfig data;
  Shape input_shape;
  std::vector<LayerSpec> layers;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 100;
  int lr_halving_interval = 0;
  int epochs = 0;
  bool eval_test_each_epoch = true;
  std::size_t eval_test_count = 0;  // per-epoch test subset; 0 = full test set
  MethodConfig method;
  EvalConfig eval;
  std::string output_dir = "runs";

  // Throws ConfigError carrying every violation.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::filesystem::path& path);

  std::string to_json_text() const;

  // Structural problems not already rejected by parsing; empty when valid.
  std::vector<std::string> validate() const;

  AlphaSchedule alpha_schedule() const { return {method.alpha0, epochs, method.alpha_rule}; }
  TrainOptions train_options() const;
  int hints_pretrain_epochs() const;
};

}  // namespace rdl
