#include "rdl/trainer.hpp"

#include <cmath>

#include "rdl/errors.hpp"
#include "rdl/loss.hpp"

namespace rdl {

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t run_seed, int epoch,
                                                    bool shuffle) {
  if (batch_size == 0) throw ShapeError("batch size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) {
    Rng rng = Rng(run_seed).fork("shuffle", static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += batch_size) {
    const std::size_t end = std::min(n, b + batch_size);
    batches.emplace_back(order.begin() + static_cast<long>(b),
                         order.begin() + static_cast<long>(end));
  }
  return batches;
}

double lr_at(const TrainOptions& opts, int epoch) {
  if (opts.lr_halving_interval <= 0) return opts.learning_rate;
  const int halvings = epoch / opts.lr_halving_interval;
  return opts.learning_rate * std::pow(0.5, halvings);
}

namespace {

struct BatchData {
  Tensor images;
  std::vector<int> labels;
};

BatchData assemble_batch(const Dataset& data, const std::vector<std::size_t>& idx,
                         const TrainOptions& opts, std::uint64_t run_seed, int epoch,
                         std::size_t batch_index) {
  BatchData b;
  Dataset sub = data.subset(idx);
  b.images = std::move(sub.images);
  b.labels = std::move(sub.labels);
  if (opts.hflip_augment) {
    const std::uint64_t s =
        Rng(run_seed).fork("hflip", static_cast<std::uint64_t>(epoch), batch_index).seed();
    b.images = augment_hflip(b.images, s);
  }
  return b;
}

std::uint64_t forward_seed(std::uint64_t run_seed, int epoch, std::size_t batch_index) {
  return Rng(run_seed).fork("forward", static_cast<std::uint64_t>(epoch), batch_index).seed();
}

}  // namespace

EpochMetrics train_epoch_baseline(Network& net, SgdState& sgd, const Dataset& data,
                                  int epoch, const TrainOptions& opts,
                                  std::uint64_t run_seed) {
  EpochMetrics metrics;
  metrics.epoch = epoch;
  metrics.learning_rate = lr_at(opts, epoch);
  sgd.learning_rate = metrics.learning_rate;

  const auto batches =
      epoch_batches(data.size(), opts.batch_size, run_seed, epoch, opts.shuffle_each_epoch);
  double loss_sum = 0.0, err_sum = 0.0, seen = 0.0;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    BatchData batch = assemble_batch(data, batches[bi], opts, run_seed, epoch, bi);
    const ForwardResult fwd =
        forward(net, batch.images, Mode::Train, forward_seed(run_seed, epoch, bi));
    LossResult loss = softmax_xent(fwd.logits, batch.labels);
    if (opts.output_loss_weight != 1.0) loss.grad.vec() *= opts.output_loss_weight;
    const Gradients grads = backward_from_logits(net, fwd, loss.grad);
    sgd.step(net, grads);

    const auto bn = static_cast<double>(batch.labels.size());
    loss_sum += loss.loss * bn;
    err_sum += error_rate(argmax_rows(fwd.logits), batch.labels) * bn;
    seen += bn;
  }
  metrics.train_loss = loss_sum / seen;
  metrics.train_error = err_sum / seen;
  return metrics;
}

EpochMetrics rdl_train_epoch(Network& student, TeacherRdmProvider& provider,
                             const RdlOptions& rdl, const Dataset& data, int epoch,
                             SgdState& sgd, const TrainOptions& opts,
                             std::uint64_t run_seed) {
  for (const auto& tap : rdl.taps) {
    if (!student.has_tap(tap)) throw ShapeError("student has no tap '" + tap + "'");
  }
  const double alpha = alpha_at(rdl.schedule, epoch);
  // Eq. 5 degenerates to plain backprop at alpha == 0; skipping the
  // auxiliary path keeps the parameter trajectory bitwise identical to
  // baseline training under the same seed.
  if (alpha == 0.0) {
    EpochMetrics metrics = train_epoch_baseline(student, sgd, data, epoch, opts, run_seed);
    metrics.alpha = 0.0;
    return metrics;
  }

  EpochMetrics metrics;
  metrics.epoch = epoch;
  metrics.alpha = alpha;
  metrics.learning_rate = lr_at(opts, epoch);
  sgd.learning_rate = metrics.learning_rate;

  const auto batches =
      epoch_batches(data.size(), opts.batch_size, run_seed, epoch, opts.shuffle_each_epoch);
  double loss_sum = 0.0, err_sum = 0.0, seen = 0.0;
  std::map<std::string, double> aux_sums;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    BatchData batch = assemble_batch(data, batches[bi], opts, run_seed, epoch, bi);
    const std::size_t n = batch.labels.size();
    if (n < 2) continue;  // a 1-image tail batch has no pairs

    const ForwardResult fwd =
        forward(student, batch.images, Mode::Train, forward_seed(run_seed, epoch, bi));
    LossResult loss = softmax_xent(fwd.logits, batch.labels);
    loss.grad.vec() *= opts.output_loss_weight;

    auto teacher_rdms = provider.rdms_for(batch.images, rdl.taps);
    std::map<std::string, TapInjection> injections;
    for (std::size_t ti = 0; ti < rdl.taps.size(); ++ti) {
      const std::string& tap = rdl.taps[ti];
      const Tensor& acts_t = fwd.taps.at(tap);
      const Eigen::MatrixXd acts = acts_t.batch_matrix();
      const Rdm student_rdm = compute_rdm(acts, rdl.metric);
      const Rdm& teacher_rdm = teacher_rdms.at(tap);
      aux_sums[tap] += aux_loss(student_rdm, teacher_rdm) * static_cast<double>(n);

      Rng pair_rng = Rng(run_seed).fork("pairs", static_cast<std::uint64_t>(epoch), bi, ti);
      const PairSample sample = rdl.pair_count > 0
                                    ? sample_pair_count(static_cast<int>(n), rdl.pair_count, pair_rng)
                                    : sample_pairs(static_cast<int>(n), rdl.pair_fraction, pair_rng);
      const Eigen::MatrixXd aux_grad =
          aux_grad_sampled_from_rdm(acts, student_rdm, teacher_rdm, sample);

      Tensor grad_t(acts_t.shape());
      MapRowMat(grad_t.data(), aux_grad.rows(), aux_grad.cols()) = aux_grad;
      injections.emplace(tap, TapInjection{std::move(grad_t), alpha});
    }

    const Gradients grads = backward_from_logits(student, fwd, loss.grad, injections);
    sgd.step(student, grads);

    const auto bn = static_cast<double>(n);
    loss_sum += loss.loss * bn;
    err_sum += error_rate(argmax_rows(fwd.logits), batch.labels) * bn;
    seen += bn;
  }
  metrics.train_loss = loss_sum / seen;
  metrics.train_error = err_sum / seen;
  for (auto& [tap, sum] : aux_sums) metrics.aux_loss[tap] = sum / seen;
  return metrics;
}

std::map<std::string, double> probe_aux_losses(const Network& student,
                                               TeacherRdmProvider& provider,
                                               const std::vector<std::string>& taps,
                                               const Tensor& batch,
                                               PairwiseMetric metric) {
  const ForwardResult fwd = forward(student, batch, Mode::Train, 0);
  auto teacher_rdms = provider.rdms_for(batch, taps);
  std::map<std::string, double> out;
  for (const auto& tap : taps) {
    out[tap] = aux_loss(fwd.taps.at(tap).batch_matrix(), teacher_rdms.at(tap), metric);
  }
  return out;
}

std::vector<int> predict_dataset(const Network& net, const Dataset& data,
                                 std::size_t batch_size) {
  std::vector<int> pred;
  pred.reserve(data.size());
  for (std::size_t b = 0; b < data.size(); b += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - b);
    const std::vector<int> p = predict(net, data.batch(b, count));
    pred.insert(pred.end(), p.begin(), p.end());
  }
  return pred;
}

double test_error(const Network& net, const Dataset& data, std::size_t batch_size) {
  return error_rate(predict_dataset(net, data, batch_size), data.labels);
}

RowMat tap_activations(const Network& net, const Dataset& data, const std::string& tap,
                       std::size_t batch_size) {
  const std::size_t features = net.tap_feature_count(tap);
  RowMat acts(data.size(), features);
  for (std::size_t b = 0; b < data.size(); b += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - b);
    const ForwardResult fwd = forward(net, data.batch(b, count), Mode::Eval, 0);
    acts.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(count)) =
        fwd.taps.at(tap).matrix(count, features);
  }
  return acts;
}

}  // namespace rdl
