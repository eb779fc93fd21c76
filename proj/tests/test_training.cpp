#include <doctest.h>

#include <filesystem>
#include <set>

#include "rdl/loss.hpp"

#include "rdl/errors.hpp"
#include "rdl/teacher.hpp"
#include "rdl/trainer.hpp"
#include "rdl/transfer.hpp"
#include "test_support.hpp"

using namespace rdl;
namespace fs = std::filesystem;

namespace {

// Small convolutional net on 8x8 inputs; cheap enough for multi-epoch tests.
std::vector<LayerSpec> small_cnn(int classes = 4) {
  return {
      LayerSpec::conv(3, 3, 4),
      LayerSpec::relu(),
      LayerSpec::max_pool(2, 2, 2).with_tap("pool"),
      LayerSpec::fully_connected(12),
      LayerSpec::relu().with_tap("fc"),
      LayerSpec::linear_readout(static_cast<std::size_t>(classes)),
      LayerSpec::softmax(),
  };
}

Dataset small_data(int per_class = 25, std::uint64_t seed = 7) {
  return synth_clusters(4, per_class, 8, 8, 4.0, seed);
}

TrainOptions quick_opts() {
  TrainOptions opts;
  opts.learning_rate = 0.02;
  opts.momentum = 0.9;
  opts.batch_size = 20;
  return opts;
}

}  // namespace

TEST_CASE("baseline training learns separable clusters") {
  Dataset data = small_data();
  Network net = Network::build({1, 8, 8}, small_cnn(), Rng(1).fork("init"));
  SgdState sgd = SgdState::init(net, 0.02, 0.9);
  const TrainOptions opts = quick_opts();
  double first_loss = 0.0, last_loss = 0.0;
  for (int epoch = 0; epoch < 12; ++epoch) {
    const EpochMetrics m = train_epoch_baseline(net, sgd, data, epoch, opts, 42);
    if (epoch == 0) first_loss = m.train_loss;
    last_loss = m.train_loss;
  }
  CHECK(last_loss < first_loss);
  CHECK(test_error(net, data) < 0.2);
}

TEST_CASE("teacher rdm provider: cache hits equal live recomputation bitwise") {
  auto teacher = std::make_shared<Network>(
      Network::build({1, 8, 8}, small_cnn(), Rng(2).fork("init")));
  Dataset data = small_data(10);
  const Tensor batch = data.batch(0, 12);

  TeacherRdmProvider live(teacher, {{"pool", "pool"}, {"fc", "fc"}},
                          PairwiseMetric::MeanSquaredError);
  const fs::path dir = fs::temp_directory_path() / "rdl_rdm_cache_test";
  fs::remove_all(dir);
  TeacherRdmProvider cached(teacher, {{"pool", "pool"}, {"fc", "fc"}},
                            PairwiseMetric::MeanSquaredError);
  cached.enable_cache(dir);

  const Rdm a1 = live.rdm_for(batch, "pool");
  const Rdm b1 = cached.rdm_for(batch, "pool");  // miss: forward + store
  const Rdm b2 = cached.rdm_for(batch, "pool");  // hit: read back
  CHECK(b1.values == a1.values);
  CHECK(b2.values == a1.values);
  CHECK(cached.cache_hits() == 1);

  // A fresh provider over the same directory reuses the manifest.
  TeacherRdmProvider reopened(teacher, {{"pool", "pool"}, {"fc", "fc"}},
                              PairwiseMetric::MeanSquaredError);
  reopened.enable_cache(dir);
  const Rdm c = reopened.rdm_for(batch, "pool");
  CHECK(c.values == a1.values);
  CHECK(reopened.cache_hits() == 1);
  CHECK(reopened.cache_misses() == 0);

  // Unknown taps are rejected up front.
  CHECK_THROWS_AS(TeacherRdmProvider(teacher, {{"fc", "nope"}},
                                     PairwiseMetric::MeanSquaredError),
                  ShapeError);
  CHECK_THROWS_AS(live.rdm_for(batch, "unmapped"), ShapeError);
  fs::remove_all(dir);
}

TEST_CASE("rdl with alpha 0 is bitwise identical to baseline training") {
  Dataset data = small_data();
  const Rng init = Rng(3).fork("init");
  Network baseline = Network::build({1, 8, 8}, small_cnn(), init);
  Network student = Network::build({1, 8, 8}, small_cnn(), init);
  auto teacher = std::make_shared<Network>(
      Network::build({1, 8, 8}, small_cnn(), Rng(4).fork("init")));

  SgdState sgd_b = SgdState::init(baseline, 0.02, 0.9);
  SgdState sgd_s = SgdState::init(student, 0.02, 0.9);
  TeacherRdmProvider provider(teacher, {{"pool", "pool"}, {"fc", "fc"}},
                              PairwiseMetric::MeanSquaredError);
  RdlOptions rdl;
  rdl.taps = {"pool", "fc"};
  rdl.schedule = {0.0, 3, AlphaRule::RdlLinear};
  const TrainOptions opts = quick_opts();

  for (int epoch = 0; epoch < 3; ++epoch) {
    train_epoch_baseline(baseline, sgd_b, data, epoch, opts, 99);
    rdl_train_epoch(student, provider, rdl, data, epoch, sgd_s, opts, 99);
  }
  CHECK(student.params_equal(baseline));
}

TEST_CASE("a student copying its teacher starts at zero aux loss") {
  Dataset data = small_data();
  auto teacher = std::make_shared<Network>(
      Network::build({1, 8, 8}, small_cnn(), Rng(5).fork("init")));
  Network student = *teacher;  // exact copy, same architecture

  TeacherRdmProvider provider(teacher, {{"pool", "pool"}, {"fc", "fc"}},
                              PairwiseMetric::MeanSquaredError);
  const auto losses = probe_aux_losses(student, provider, {"pool", "fc"}, data.batch(0, 20),
                                       PairwiseMetric::MeanSquaredError);
  CHECK(losses.at("pool") < 1e-20);
  CHECK(losses.at("fc") < 1e-20);
}

TEST_CASE("rdl training drives the aux loss down when only the aux term acts") {
  // 200-sample set, labels ignored (output loss weight 0), small lr: the
  // mean aux loss strictly decreases over one epoch.
  Dataset data = small_data(50, 8);  // 200 samples
  auto teacher = std::make_shared<Network>(
      Network::build({1, 8, 8}, small_cnn(), Rng(6).fork("init")));
  Network student = Network::build({1, 8, 8}, small_cnn(), Rng(7).fork("init"));

  TeacherRdmProvider provider(teacher, {{"fc", "fc"}}, PairwiseMetric::MeanSquaredError);
  RdlOptions rdl;
  rdl.taps = {"fc"};
  rdl.schedule = {1.0, 4, AlphaRule::RdlLinear};
  rdl.pair_fraction = 1.0;  // exact gradient: deterministic descent
  TrainOptions opts = quick_opts();
  opts.learning_rate = 0.001;
  opts.momentum = 0.0;
  opts.output_loss_weight = 0.0;

  SgdState sgd = SgdState::init(student, opts.learning_rate, opts.momentum);
  const Tensor probe = data.batch(0, 40);
  const double before =
      probe_aux_losses(student, provider, {"fc"}, probe, PairwiseMetric::MeanSquaredError)
          .at("fc");
  EpochMetrics m1 = rdl_train_epoch(student, provider, rdl, data, 0, sgd, opts, 11);
  EpochMetrics m2 = rdl_train_epoch(student, provider, rdl, data, 1, sgd, opts, 11);
  const double after =
      probe_aux_losses(student, provider, {"fc"}, probe, PairwiseMetric::MeanSquaredError)
          .at("fc");
  CHECK(m2.aux_loss.at("fc") < m1.aux_loss.at("fc"));
  CHECK(after < before);
}

TEST_CASE("finetune_init copies the teacher exactly") {
  const Network teacher = Network::build({1, 8, 8}, small_cnn(), Rng(8).fork("init"));
  Network student = Network::build({1, 8, 8}, small_cnn(), Rng(9).fork("init"));
  const Network tuned = finetune_init(student, teacher);
  CHECK(tuned.params_equal(teacher));
  // Idempotent.
  CHECK(finetune_init(tuned, teacher).params_equal(tuned));

  // Copy-then-evaluate reproduces the teacher's predictions exactly.
  Dataset data = small_data(10);
  CHECK(predict_dataset(tuned, data) == predict_dataset(teacher, data));
}

TEST_CASE("finetune_init with a fresh readout copies everything else") {
  const Network teacher = Network::build({1, 8, 8}, small_cnn(4), Rng(10).fork("init"));
  Network student = Network::build({1, 8, 8}, small_cnn(7), Rng(11).fork("init"));
  const Network tuned =
      finetune_init(student, teacher, LayerSpec::linear_readout(7));

  for (std::size_t i = 0; i < tuned.layers().size(); ++i) {
    const Layer& layer = tuned.layers()[i];
    if (!layer.has_params()) continue;
    if (layer.spec.kind == LayerKind::LinearReadout) {
      // Fresh: the student's own initialization, not the teacher's.
      CHECK(layer.weights == student.layers()[i].weights);
      CHECK_FALSE(layer.weights.same_shape(teacher.layers()[i].weights));
    } else {
      CHECK(layer.weights == teacher.layers()[i].weights);
      CHECK(layer.bias == teacher.layers()[i].bias);
    }
  }
  // Without a replacement the mismatched readout is an error.
  CHECK_THROWS_AS(finetune_init(student, teacher), ShapeError);
}

TEST_CASE("deep supervision: head parameter count and baseline degeneration") {
  Network net = Network::build({1, 8, 8}, small_cnn(), Rng(12).fork("init"));
  const AlphaSchedule sched{0.3, 4, AlphaRule::DsnDecay};
  DsnHeads heads = deep_supervision_attach(net, {"pool", "fc"}, 4, sched, Rng(13));
  // (pool_features + 1) * classes + (fc_features + 1) * classes.
  const std::size_t pool_f = net.tap_feature_count("pool");
  const std::size_t fc_f = net.tap_feature_count("fc");
  CHECK(heads.param_count() == (pool_f + 1) * 4 + (fc_f + 1) * 4);
  CHECK_THROWS_AS(deep_supervision_attach(net, {"nope"}, 4, sched, Rng(13)), ShapeError);

  // Alpha 0 trains exactly like the baseline.
  Dataset data = small_data();
  const Rng init = Rng(14).fork("init");
  Network a = Network::build({1, 8, 8}, small_cnn(), init);
  Network b = Network::build({1, 8, 8}, small_cnn(), init);
  SgdState sgd_a = SgdState::init(a, 0.02, 0.9);
  SgdState sgd_b = SgdState::init(b, 0.02, 0.9);
  DsnHeads zero_heads =
      deep_supervision_attach(a, {"pool"}, 4, {0.0, 3, AlphaRule::DsnDecay}, Rng(15));
  const TrainOptions opts = quick_opts();
  for (int epoch = 0; epoch < 3; ++epoch) {
    dsn_train_epoch(a, zero_heads, data, epoch, sgd_a, opts, 77);
    train_epoch_baseline(b, sgd_b, data, epoch, opts, 77);
  }
  CHECK(a.params_equal(b));
}

TEST_CASE("deep supervision: head gradients only reach layers at or before the tap") {
  Network net = Network::build({1, 8, 8}, small_cnn(), Rng(16).fork("init"));
  Dataset data = small_data(10);
  const Tensor batch = data.batch(0, 8);
  const std::vector<int> labels(data.labels.begin(), data.labels.begin() + 8);

  // Head-only objective: zero the output loss and check gradients above the
  // tap stay zero.
  const ForwardResult fwd = forward(net, batch, Mode::Train, 3);
  DsnHeads heads = deep_supervision_attach(net, {"pool"}, 4,
                                           {1.0, 4, AlphaRule::DsnDecay}, Rng(17));
  const DsnHead& head = heads.heads[0];
  const std::size_t features = net.tap_feature_count("pool");
  Tensor logits({8, 4});
  logits.matrix(8, 4).noalias() =
      fwd.taps.at("pool").matrix(8, features) * head.weights.matrix(4, features).transpose();
  logits.matrix(8, 4).rowwise() += head.bias.vec().transpose();
  const LossResult head_loss = softmax_xent(logits, labels);
  Tensor inj({8, features});
  inj.matrix(8, features).noalias() = head_loss.grad.matrix(8, 4) * head.weights.matrix(4, features);

  const Gradients g = backward_from_logits(
      net, fwd, Tensor::zeros(fwd.logits.shape()),
      {{"pool", TapInjection{inj, 1.0}}});
  const std::size_t tap_layer = net.tap_layer("pool");
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    if (!net.layers()[l].has_params()) continue;
    const double magnitude = g.weights[l].vec().cwiseAbs().maxCoeff();
    if (l <= tap_layer) {
      CHECK(magnitude > 0.0);
    } else {
      CHECK(magnitude == 0.0);
    }
  }
}

TEST_CASE("hints: identity regressor on a self-copy starts at zero loss") {
  auto teacher = std::make_shared<Network>(
      Network::build({1, 8, 8}, small_cnn(), Rng(18).fork("init")));
  Network student = *teacher;
  Dataset data = small_data(10);

  LinearRegressor reg = LinearRegressor::identity(student.tap_feature_count("fc"));
  TrainOptions opts = quick_opts();
  opts.learning_rate = 1e-9;  // one pass, essentially no movement
  const auto losses =
      hints_pretrain(student, *teacher, "fc", "fc", 1, data, opts, 5, &reg);
  REQUIRE(losses.size() == 1);
  CHECK(losses[0] < 1e-20);
}

TEST_CASE("hints pretraining decreases the hint loss and freezes later layers") {
  const Network teacher = Network::build({1, 8, 8}, small_cnn(), Rng(19).fork("init"));
  Network student = Network::build({1, 8, 8}, small_cnn(), Rng(20).fork("init"));
  Dataset data = small_data(50, 21);  // 200 samples

  // Snapshot layers after the tap.
  const std::size_t tap_layer = student.tap_layer("pool");
  std::vector<Tensor> before_w, before_b;
  for (std::size_t l = tap_layer + 1; l < student.layers().size(); ++l) {
    before_w.push_back(student.layers()[l].weights);
    before_b.push_back(student.layers()[l].bias);
  }

  TrainOptions opts = quick_opts();
  opts.learning_rate = 0.005;
  opts.momentum = 0.9;
  const auto losses = hints_pretrain(student, teacher, "pool", "pool", 5, data, opts, 23);
  REQUIRE(losses.size() == 5);
  for (std::size_t e = 1; e < losses.size(); ++e) CHECK(losses[e] < losses[e - 1]);

  std::size_t k = 0;
  for (std::size_t l = tap_layer + 1; l < student.layers().size(); ++l, ++k) {
    CHECK(student.layers()[l].weights == before_w[k]);
    CHECK(student.layers()[l].bias == before_b[k]);
  }

  // The pretrained half moved.
  bool moved = false;
  for (std::size_t l = 0; l <= tap_layer; ++l) {
    if (student.layers()[l].has_params() &&
        !(student.layers()[l].weights == Network::build({1, 8, 8}, small_cnn(),
                                                        Rng(20).fork("init"))
              .layers()[l]
              .weights)) {
      moved = true;
    }
  }
  CHECK(moved);
}

TEST_CASE("hints toward a constant zero target drives the prediction to zero") {
  // A teacher tap that is constant zero: the regressor converges toward the
  // zero map and the hint loss falls toward zero.
  std::vector<LayerSpec> dead_relu = {
      LayerSpec::fully_connected(6),
      LayerSpec::relu().with_tap("mid"),
      LayerSpec::linear_readout(4),
      LayerSpec::softmax(),
  };
  Network teacher = Network::build({1, 1, 16}, dead_relu, Rng(24).fork("init"));
  // Force the first layer to output large negatives: relu output == 0.
  teacher.layers()[0].weights.vec().setZero();
  teacher.layers()[0].bias.vec().setConstant(-5.0);

  Network student = Network::build({1, 1, 16}, dead_relu, Rng(25).fork("init"));
  Dataset raw = synth_clusters(4, 30, 4, 4, 3.0, 26);
  Dataset data;
  data.images = raw.images.reshaped({raw.size(), 1, 1, 16});
  data.labels = raw.labels;
  data.num_classes = raw.num_classes;

  TrainOptions opts = quick_opts();
  opts.learning_rate = 0.05;
  opts.momentum = 0.0;
  opts.batch_size = 30;
  const auto losses = hints_pretrain(student, teacher, "mid", "mid", 30, data, opts, 27);
  CHECK(losses.back() < 0.05 * losses.front());
}

TEST_CASE("epoch batching covers every index once and halving follows the interval") {
  const auto batches = epoch_batches(103, 20, 5, 2, true);
  CHECK(batches.size() == 6);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& b : batches) {
    total += b.size();
    seen.insert(b.begin(), b.end());
  }
  CHECK(total == 103);
  CHECK(seen.size() == 103);
  CHECK(batches.back().size() == 3);

  TrainOptions opts;
  opts.learning_rate = 0.08;
  opts.lr_halving_interval = 25;
  CHECK(lr_at(opts, 0) == 0.08);
  CHECK(lr_at(opts, 24) == 0.08);
  CHECK(lr_at(opts, 25) == 0.04);
  CHECK(lr_at(opts, 50) == 0.02);
  opts.lr_halving_interval = 0;
  CHECK(lr_at(opts, 99) == 0.08);
}
