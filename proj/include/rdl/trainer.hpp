#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rdl/aux_objective.hpp"
#include "rdl/dataset.hpp"
#include "rdl/network.hpp"
#include "rdl/optimizer.hpp"
#include "rdl/teacher.hpp"

namespace rdl {

struct TrainOptions {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 100;
  int lr_halving_interval = 0;  // epochs between halvings; 0 keeps it constant
  double output_loss_weight = 1.0;
  bool hflip_augment = false;
  bool shuffle_each_epoch = true;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_error = 0.0;
  double test_error = std::numeric_limits<double>::quiet_NaN();
  double alpha = 0.0;
  double learning_rate = 0.0;
  std::map<std::string, double> aux_loss;  // per tap / per auxiliary head
};

struct RdlOptions {
  std::vector<std::string> taps;  // student taps receiving the auxiliary error
  AlphaSchedule schedule;
  PairwiseMetric metric = PairwiseMetric::MeanSquaredError;
  double pair_fraction = 0.05;
  std::size_t pair_count = 0;  // > 0 overrides the fraction
};

// Mini-batch order for one epoch; a fork of (seed, epoch) shuffles the
// indices when requested. The tail batch keeps whatever is left.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t run_seed, int epoch,
                                                    bool shuffle);

// Learning rate after `epoch` halvings intervals.
double lr_at(const TrainOptions& opts, int epoch);

// One epoch of plain output-loss training.
EpochMetrics train_epoch_baseline(Network& net, SgdState& sgd, const Dataset& data,
                                  int epoch, const TrainOptions& opts,
                                  std::uint64_t run_seed);

// One epoch of RDL training: per batch, the pair-subsampled auxiliary
// gradients are injected at each tap with weight alpha_at(schedule, epoch)
// on top of the usual output-loss backward pass. With alpha == 0 the
// auxiliary path is skipped entirely and the update is the baseline one.
EpochMetrics rdl_train_epoch(Network& student, TeacherRdmProvider& provider,
                             const RdlOptions& rdl, const Dataset& data, int epoch,
                             SgdState& sgd, const TrainOptions& opts,
                             std::uint64_t run_seed);

// Mean aux_loss per tap of a student against the teacher provider on one
// batch, without touching any parameters.
std::map<std::string, double> probe_aux_losses(const Network& student,
                                               TeacherRdmProvider& provider,
                                               const std::vector<std::string>& taps,
                                               const Tensor& batch,
                                               PairwiseMetric metric);

// Eval-mode predictions over a whole dataset, batched.
std::vector<int> predict_dataset(const Network& net, const Dataset& data,
                                 std::size_t batch_size = 200);
double test_error(const Network& net, const Dataset& data, std::size_t batch_size = 200);

// Eval-mode tap activations over a whole dataset, flattened to [n, features].
RowMat tap_activations(const Network& net, const Dataset& data, const std::string& tap,
                       std::size_t batch_size = 200);

}  // namespace rdl
