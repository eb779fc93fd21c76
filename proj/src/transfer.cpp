#include "rdl/transfer.hpp"

#include <cmath>

#include "rdl/errors.hpp"
#include "rdl/loss.hpp"

namespace rdl {

std::string transfer_kind_name(TransferKind k) {
  switch (k) {
    case TransferKind::Baseline: return "baseline";
    case TransferKind::Finetune: return "finetune";
    case TransferKind::DeepSupervision: return "deep_supervision";
    case TransferKind::Hints: return "hints";
    case TransferKind::Rdl: return "rdl";
  }
  return "unknown";
}

TransferKind transfer_kind_from_name(const std::string& name) {
  if (name == "baseline") return TransferKind::Baseline;
  if (name == "finetune") return TransferKind::Finetune;
  if (name == "deep_supervision") return TransferKind::DeepSupervision;
  if (name == "hints") return TransferKind::Hints;
  if (name == "rdl") return TransferKind::Rdl;
  throw ConfigError("unknown transfer method '" + name + "'");
}

Network finetune_init(const Network& student, const Network& teacher,
                      const std::optional<LayerSpec>& replace_readout) {
  if (student.layers().size() != teacher.layers().size()) {
    throw ShapeError("finetune_init: layer counts differ (" +
                     std::to_string(student.layers().size()) + " vs " +
                     std::to_string(teacher.layers().size()) + ")");
  }
  // The replaced readout, if any, is the last parameterized layer.
  std::size_t replaced = student.layers().size();
  if (replace_readout) {
    for (std::size_t i = student.layers().size(); i-- > 0;) {
      if (student.layers()[i].has_params()) {
        replaced = i;
        break;
      }
    }
    if (replaced == student.layers().size()) {
      throw ShapeError("finetune_init: no parameterized layer to replace");
    }
    const LayerSpec& s = student.layers()[replaced].spec;
    if (s.kind != replace_readout->kind || s.features != replace_readout->features) {
      throw ShapeError("finetune_init: student readout does not match the replacement spec");
    }
  }

  Network out = student;
  for (std::size_t i = 0; i < out.layers().size(); ++i) {
    if (i == replaced) continue;  // keeps its fresh initialization
    const Layer& t = teacher.layers()[i];
    Layer& s = out.layers()[i];
    if (s.spec.kind != t.spec.kind) {
      throw ShapeError("finetune_init: layer " + std::to_string(i) + " kind mismatch (" +
                       layer_kind_name(s.spec.kind) + " vs " + layer_kind_name(t.spec.kind) +
                       ")");
    }
    if (!s.has_params()) continue;
    if (!s.weights.same_shape(t.weights) || !s.bias.same_shape(t.bias)) {
      throw ShapeError("finetune_init: layer " + std::to_string(i) +
                       " parameter shapes do not match");
    }
    s.weights = t.weights;
    s.bias = t.bias;
  }
  return out;
}

std::size_t DsnHeads::param_count() const {
  std::size_t n = 0;
  for (const auto& h : heads) n += h.weights.size() + h.bias.size();
  return n;
}

DsnHeads deep_supervision_attach(const Network& student,
                                 const std::vector<std::string>& taps, int num_classes,
                                 const AlphaSchedule& schedule, const Rng& init_rng) {
  if (num_classes <= 0) throw ShapeError("deep_supervision_attach: need classes > 0");
  DsnHeads heads;
  heads.schedule = schedule;
  heads.num_classes = num_classes;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const std::size_t features = student.tap_feature_count(taps[i]);  // throws if unknown
    DsnHead head;
    head.tap = taps[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(features + num_classes));
    Rng rng = init_rng.fork("dsn-head", i);
    head.weights = Tensor::uniform({static_cast<std::size_t>(num_classes), features},
                                   -bound, bound, rng);
    head.bias = Tensor::zeros({static_cast<std::size_t>(num_classes)});
    head.weight_velocity = Tensor::zeros(head.weights.shape());
    head.bias_velocity = Tensor::zeros(head.bias.shape());
    heads.heads.push_back(std::move(head));
  }
  return heads;
}

EpochMetrics dsn_train_epoch(Network& net, DsnHeads& heads, const Dataset& data,
                             int epoch, SgdState& sgd, const TrainOptions& opts,
                             std::uint64_t run_seed) {
  const double alpha = alpha_at(heads.schedule, epoch);
  if (alpha == 0.0 || heads.heads.empty()) {
    EpochMetrics metrics = train_epoch_baseline(net, sgd, data, epoch, opts, run_seed);
    metrics.alpha = alpha;
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
  std::map<std::string, double> head_loss_sums;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    Dataset sub = data.subset(batches[bi]);
    Tensor images = std::move(sub.images);
    if (opts.hflip_augment) {
      images = augment_hflip(
          images,
          Rng(run_seed).fork("hflip", static_cast<std::uint64_t>(epoch), bi).seed());
    }
    const std::vector<int>& labels = sub.labels;
    const std::size_t n = labels.size();

    const std::uint64_t fseed =
        Rng(run_seed).fork("forward", static_cast<std::uint64_t>(epoch), bi).seed();
    const ForwardResult fwd = forward(net, images, Mode::Train, fseed);
    LossResult loss = softmax_xent(fwd.logits, labels);
    if (opts.output_loss_weight != 1.0) loss.grad.vec() *= opts.output_loss_weight;

    std::map<std::string, TapInjection> injections;
    struct HeadGrads {
      Tensor dw, db;
    };
    std::vector<HeadGrads> head_grads(heads.heads.size());
    for (std::size_t hi = 0; hi < heads.heads.size(); ++hi) {
      DsnHead& head = heads.heads[hi];
      const std::size_t features = net.tap_feature_count(head.tap);
      const auto acts = fwd.taps.at(head.tap).matrix(n, features);
      const auto w = head.weights.matrix(heads.num_classes, features);

      Tensor logits({n, static_cast<std::size_t>(heads.num_classes)});
      logits.matrix(n, heads.num_classes).noalias() = acts * w.transpose();
      logits.matrix(n, heads.num_classes).rowwise() += head.bias.vec().transpose();

      const LossResult head_loss = softmax_xent(logits, labels);
      head_loss_sums[head.tap] += head_loss.loss * static_cast<double>(n);

      const auto dlogits = head_loss.grad.matrix(n, heads.num_classes);
      HeadGrads& hg = head_grads[hi];
      hg.dw = Tensor::zeros(head.weights.shape());
      hg.db = Tensor::zeros(head.bias.shape());
      hg.dw.matrix(heads.num_classes, features).noalias() =
          alpha * (dlogits.transpose() * acts);
      hg.db.vec() = alpha * dlogits.colwise().sum().transpose();

      Tensor inj({n, features});
      inj.matrix(n, features).noalias() = dlogits * w;
      injections.emplace(head.tap, TapInjection{std::move(inj), alpha});
    }

    const Gradients grads = backward_from_logits(net, fwd, loss.grad, injections);
    sgd.step(net, grads);
    for (std::size_t hi = 0; hi < heads.heads.size(); ++hi) {
      DsnHead& head = heads.heads[hi];
      sgd_update(head.weights, head.weight_velocity, head_grads[hi].dw, sgd.learning_rate,
                 sgd.momentum);
      sgd_update(head.bias, head.bias_velocity, head_grads[hi].db, sgd.learning_rate,
                 sgd.momentum);
    }

    const auto bn = static_cast<double>(n);
    loss_sum += loss.loss * bn;
    err_sum += error_rate(argmax_rows(fwd.logits), labels) * bn;
    seen += bn;
  }
  metrics.train_loss = loss_sum / seen;
  metrics.train_error = err_sum / seen;
  for (auto& [tap, sum] : head_loss_sums) metrics.aux_loss[tap] = sum / seen;
  return metrics;
}

LinearRegressor LinearRegressor::make(std::size_t student_features,
                                      std::size_t teacher_features, const Rng& init_rng) {
  LinearRegressor reg;
  const double bound =
      std::sqrt(6.0 / static_cast<double>(student_features + teacher_features));
  Rng rng = init_rng.fork("hint-regressor");
  reg.weights = Tensor::uniform({teacher_features, student_features}, -bound, bound, rng);
  reg.bias = Tensor::zeros({teacher_features});
  reg.weight_velocity = Tensor::zeros(reg.weights.shape());
  reg.bias_velocity = Tensor::zeros(reg.bias.shape());
  return reg;
}

LinearRegressor LinearRegressor::identity(std::size_t features) {
  LinearRegressor reg;
  reg.weights = Tensor::zeros({features, features});
  for (std::size_t i = 0; i < features; ++i) reg.weights[i * features + i] = 1.0;
  reg.bias = Tensor::zeros({features});
  reg.weight_velocity = Tensor::zeros(reg.weights.shape());
  reg.bias_velocity = Tensor::zeros(reg.bias.shape());
  return reg;
}

std::vector<double> hints_pretrain(Network& student, const Network& teacher,
                                   const std::string& student_tap,
                                   const std::string& teacher_tap, int epochs,
                                   const Dataset& data, const TrainOptions& opts,
                                   std::uint64_t run_seed, LinearRegressor* regressor) {
  const std::size_t s_features = student.tap_feature_count(student_tap);
  const std::size_t t_features = teacher.tap_feature_count(teacher_tap);

  LinearRegressor local;
  if (regressor == nullptr) {
    local = LinearRegressor::make(s_features, t_features, Rng(run_seed).fork("hints"));
    regressor = &local;
  }
  if (regressor->weights.shape() != Shape{t_features, s_features}) {
    throw ShapeError("hints regressor shape does not match the chosen taps");
  }

  // Fresh optimizer state: layers after the student tap see exactly zero
  // gradients, so their velocities stay zero and their parameters stay
  // bit-identical through pretraining.
  SgdState sgd = SgdState::init(student, opts.learning_rate, opts.momentum);

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    sgd.learning_rate = lr_at(opts, epoch);
    const auto batches = epoch_batches(data.size(), opts.batch_size, run_seed + 1, epoch,
                                       opts.shuffle_each_epoch);
    double loss_sum = 0.0, seen = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      Dataset sub = data.subset(batches[bi]);
      const std::size_t n = sub.labels.size();
      const std::uint64_t fseed =
          Rng(run_seed).fork("hint-forward", static_cast<std::uint64_t>(epoch), bi).seed();
      const ForwardResult sfwd = forward(student, sub.images, Mode::Train, fseed);
      const ForwardResult tfwd = forward(teacher, sub.images, Mode::Eval, 0);

      const auto s_acts = sfwd.taps.at(student_tap).matrix(n, s_features);
      const auto t_acts = tfwd.taps.at(teacher_tap).matrix(n, t_features);
      const auto w = regressor->weights.matrix(t_features, s_features);

      RowMat pred(n, t_features);
      pred.noalias() = s_acts * w.transpose();
      pred.rowwise() += regressor->bias.vec().transpose();
      const RowMat diff = pred - t_acts;
      const double denom = static_cast<double>(n) * static_cast<double>(t_features);
      loss_sum += diff.squaredNorm() / denom * static_cast<double>(n);

      const RowMat dpred = 2.0 * diff / denom;
      Tensor dw = Tensor::zeros(regressor->weights.shape());
      dw.matrix(t_features, s_features).noalias() = dpred.transpose() * s_acts;
      Tensor db = Tensor::zeros(regressor->bias.shape());
      db.vec() = dpred.colwise().sum().transpose();

      Tensor ds({n, s_features});
      ds.matrix(n, s_features).noalias() = dpred * w;

      std::map<std::string, TapInjection> injections;
      injections.emplace(student_tap, TapInjection{std::move(ds), 1.0});
      const Gradients grads = backward(
          student, sfwd, Tensor::zeros(sfwd.output.shape()), injections);
      sgd.step(student, grads);
      sgd_update(regressor->weights, regressor->weight_velocity, dw, sgd.learning_rate,
                 sgd.momentum);
      sgd_update(regressor->bias, regressor->bias_velocity, db, sgd.learning_rate,
                 sgd.momentum);
      seen += static_cast<double>(n);
    }
    epoch_losses.push_back(loss_sum / seen);
  }
  return epoch_losses;
}

}  // namespace rdl
