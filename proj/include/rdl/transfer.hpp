#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rdl/trainer.hpp"

namespace rdl {

// Transfer method tags, as selected in a run configuration.
enum class TransferKind { Baseline, Finetune, DeepSupervision, Hints, Rdl };

std::string transfer_kind_name(TransferKind k);
TransferKind transfer_kind_from_name(const std::string& name);

// Student initialized with the teacher's weights. Layers are matched by
// position and must agree in kind and parameter shape; when
// `replace_readout` names a final layer spec (a fresh readout for a task
// with a different class count), that layer keeps the student's own fresh
// initialization instead of being copied.
Network finetune_init(const Network& student, const Network& teacher,
                      const std::optional<LayerSpec>& replace_readout = std::nullopt);

// Linear auxiliary softmax classifiers attached at taps. Heads train
// jointly with the main network under the alpha-weighted objective
// L = L_out + alpha * sum_h L_h, so both the head parameter gradients and
// the gradients injected at the taps carry alpha.
struct DsnHead {
  std::string tap;
  Tensor weights;  // [classes, tap_features]
  Tensor bias;     // [classes]
  Tensor weight_velocity;
  Tensor bias_velocity;
};

struct DsnHeads {
  std::vector<DsnHead> heads;
  AlphaSchedule schedule;
  int num_classes = 0;

  std::size_t param_count() const;
};

DsnHeads deep_supervision_attach(const Network& student,
                                 const std::vector<std::string>& taps, int num_classes,
                                 const AlphaSchedule& schedule, const Rng& init_rng);

// One epoch of deeply supervised training. With alpha == 0 both the
// injections and the head updates vanish and the epoch reduces to baseline
// training.
EpochMetrics dsn_train_epoch(Network& net, DsnHeads& heads, const Dataset& data,
                             int epoch, SgdState& sgd, const TrainOptions& opts,
                             std::uint64_t run_seed);

// Disposable affine regressor used by hints pretraining.
struct LinearRegressor {
  Tensor weights;  // [teacher_features, student_features]
  Tensor bias;     // [teacher_features]
  Tensor weight_velocity;
  Tensor bias_velocity;

  static LinearRegressor make(std::size_t student_features, std::size_t teacher_features,
                              const Rng& init_rng);
  static LinearRegressor identity(std::size_t features);
};

// Pretrains the student up to `student_tap` (plus the regressor) to predict
// the teacher's activations at `teacher_tap` under mean squared error.
// Layers after the student tap are untouched; the regressor is discarded by
// the caller. Returns the per-epoch hint losses.
std::vector<double> hints_pretrain(Network& student, const Network& teacher,
                                   const std::string& student_tap,
                                   const std::string& teacher_tap, int epochs,
                                   const Dataset& data, const TrainOptions& opts,
                                   std::uint64_t run_seed,
                                   LinearRegressor* regressor = nullptr);

}  // namespace rdl
