#include "rdl/runner.hpp"

#include <chrono>
#include <fstream>
#include <json.hpp>
#include <set>

#include "rdl/bootstrap.hpp"
#include "rdl/checkpoint.hpp"
#include "rdl/errors.hpp"
#include "rdl/exporters.hpp"
#include "rdl/loss.hpp"
#include "rdl/mds.hpp"
#include "rdl/metrics_io.hpp"
#include "rdl/stats.hpp"
#include "rdl/teacher.hpp"
#include "rdl/transfer.hpp"

namespace rdl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset apply_subset(const Dataset& ds, const SubsetSpec& subset) {
  if (!subset.enabled) return ds;
  if (subset.skip + subset.take > ds.size()) {
    throw ConfigError("data.subset: skip+take exceeds the pool (" +
                      std::to_string(ds.size()) + " images)");
  }
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = Rng(subset.seed).fork("subset");
  rng.shuffle(idx);
  idx = std::vector<std::size_t>(idx.begin() + static_cast<long>(subset.skip),
                                 idx.begin() + static_cast<long>(subset.skip + subset.take));
  return ds.subset(idx);
}

}  // namespace

LoadedData load_data(const RunConfig& config) {
  const DataConfig& d = config.data;
  LoadedData out;
  if (d.kind == "idx") {
    out.train = load_idx(d.train_images, d.train_labels);
    out.test = load_idx(d.test_images, d.test_labels);
  } else if (d.kind == "cache") {
    out.train = load_dataset_cache(d.cache_train);
    out.test = load_dataset_cache(d.cache_test);
  } else if (d.kind == "synthetic") {
    out.train = synth_clusters(d.classes, d.per_class, d.height, d.width, d.separation,
                               Rng(d.data_seed).fork("data-train").seed());
    out.test = synth_clusters(d.classes, d.test_per_class, d.height, d.width, d.separation,
                              Rng(d.data_seed).fork("data-test").seed());
  } else {
    throw ConfigError("unknown data kind '" + d.kind + "'");
  }

  out.train = apply_subset(out.train, d.subset);
  if (d.validation_count > 0) {
    TrainValidationSplit parts = split(out.train, d.validation_count, config.seed);
    out.train = std::move(parts.train);
    out.validation = std::move(parts.validation);
  }
  if (d.gcn) {
    out.train.images = gcn(out.train.images);
    if (out.validation.size()) out.validation.images = gcn(out.validation.images);
    out.test.images = gcn(out.test.images);
  }
  out.train.validate();
  out.test.validate();
  return out;
}

RunRecord run(const RunConfig& config, const std::string& config_text,
              const fs::path& output_root) {
  const auto t0 = std::chrono::steady_clock::now();
  {
    const auto problems = config.validate();
    if (!problems.empty()) throw ConfigError(problems);
  }
  const fs::path dir = output_root / config.output_dir / config.name;
  fs::remove_all(dir);
  fs::create_directories(dir);

  LoadedData data = load_data(config);
  const int num_classes = data.train.num_classes;

  Network net = Network::build(config.input_shape, config.layers, Rng(config.seed).fork("init"));
  if (shape_size(net.output_shape()) < static_cast<std::size_t>(num_classes)) {
    throw ConfigError("network outputs " + std::to_string(shape_size(net.output_shape())) +
                      " values for " + std::to_string(num_classes) + " classes");
  }

  // Frozen teacher, for the methods that use one.
  std::shared_ptr<Network> teacher;
  if (!config.method.teacher_checkpoint.empty()) {
    teacher = std::make_shared<Network>(load_checkpoint(config.method.teacher_checkpoint));
  }

  const TrainOptions opts = config.train_options();
  SgdState sgd = SgdState::init(net, opts.learning_rate, opts.momentum);
  std::vector<EpochMetrics> history;

  auto eval_epoch = [&](EpochMetrics& m) {
    if (!config.eval_test_each_epoch) return;
    if (config.eval_test_count == 0 || config.eval_test_count >= data.test.size()) {
      m.test_error = test_error(net, data.test);
    } else {
      std::vector<std::size_t> idx(config.eval_test_count);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      m.test_error = test_error(net, data.test.subset(idx));
    }
  };

  switch (config.method.kind) {
    case TransferKind::Baseline: {
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochMetrics m = train_epoch_baseline(net, sgd, data.train, epoch, opts, config.seed);
        eval_epoch(m);
        history.push_back(std::move(m));
      }
      break;
    }
    case TransferKind::Finetune: {
      std::optional<LayerSpec> replacement;
      if (config.method.replace_readout) {
        for (std::size_t i = net.layers().size(); i-- > 0;) {
          if (net.layers()[i].has_params()) {
            replacement = net.layers()[i].spec;
            break;
          }
        }
      }
      net = finetune_init(net, *teacher, replacement);
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochMetrics m = train_epoch_baseline(net, sgd, data.train, epoch, opts, config.seed);
        eval_epoch(m);
        history.push_back(std::move(m));
      }
      break;
    }
    case TransferKind::DeepSupervision: {
      DsnHeads heads = deep_supervision_attach(net, config.method.dsn_taps, num_classes,
                                               config.alpha_schedule(), Rng(config.seed));
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochMetrics m = dsn_train_epoch(net, heads, data.train, epoch, sgd, opts, config.seed);
        eval_epoch(m);
        history.push_back(std::move(m));
      }
      break;
    }
    case TransferKind::Hints: {
      const int pre = std::min(config.hints_pretrain_epochs(), config.epochs);
      if (!teacher->has_tap(config.method.teacher_tap)) {
        throw ConfigError("teacher checkpoint has no tap '" + config.method.teacher_tap + "'");
      }
      const auto hint_losses =
          hints_pretrain(net, *teacher, config.method.student_tap, config.method.teacher_tap,
                         pre, data.train, opts, config.seed);
      for (int epoch = 0; epoch < pre; ++epoch) {
        EpochMetrics m;
        m.epoch = epoch;
        m.learning_rate = lr_at(opts, epoch);
        m.train_loss = std::numeric_limits<double>::quiet_NaN();
        m.train_error = std::numeric_limits<double>::quiet_NaN();
        m.aux_loss["hint"] = hint_losses[static_cast<std::size_t>(epoch)];
        eval_epoch(m);
        history.push_back(std::move(m));
      }
      for (int epoch = 0; epoch < config.epochs - pre; ++epoch) {
        EpochMetrics m = train_epoch_baseline(net, sgd, data.train, epoch, opts, config.seed);
        m.epoch = pre + epoch;
        eval_epoch(m);
        history.push_back(std::move(m));
      }
      break;
    }
    case TransferKind::Rdl: {
      TeacherRdmProvider provider(teacher, config.method.tap_map, config.method.metric);
      if (config.method.teacher_rdm_cache) provider.enable_cache(dir / "teacher_rdm_cache");
      RdlOptions rdl;
      for (const auto& [student_tap, teacher_tap] : config.method.tap_map) {
        rdl.taps.push_back(student_tap);
      }
      rdl.schedule = config.alpha_schedule();
      rdl.metric = config.method.metric;
      rdl.pair_fraction = config.method.pair_fraction;
      rdl.pair_count = config.method.pair_count;
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochMetrics m =
            rdl_train_epoch(net, provider, rdl, data.train, epoch, sgd, opts, config.seed);
        eval_epoch(m);
        history.push_back(std::move(m));
      }
      break;
    }
  }

  RunRecord record;
  record.name = config.name;
  record.dir = dir;
  record.history = history;
  record.final_test_error = test_error(net, data.test);
  record.final_train_error =
      history.empty() || !std::isfinite(history.back().train_error)
          ? std::numeric_limits<double>::quiet_NaN()
          : history.back().train_error;
  record.train_hash = data.train.content_hash();
  record.test_hash = data.test.content_hash();

  // Artifacts.
  write_text_file(dir / "config.json", config_text);
  save_checkpoint(dir / "checkpoint.rdlk", net);
  write_error_curve(dir / "metrics.csv", history);
  write_text_file(dir / "history.json", history_json(history));

  if (config.eval.export_rdm_images > 1 && data.test.size() >= 2) {
    const std::size_t probe_n = std::min<std::size_t>(
        static_cast<std::size_t>(config.eval.export_rdm_images), data.test.size());
    const Tensor probe = data.test.batch(0, probe_n);
    const ForwardResult fwd = forward(net, probe, Mode::Eval, 0);
    std::vector<int> probe_labels(data.test.labels.begin(),
                                  data.test.labels.begin() + static_cast<long>(probe_n));
    std::vector<std::string> taps = config.eval.taps;
    if (taps.empty()) {
      for (const auto& [tap, idx] : net.taps()) taps.push_back(tap);
    }
    for (const auto& tap : taps) {
      const Rdm rdm = compute_rdm(fwd.taps.at(tap).batch_matrix(), config.eval.rdm_metric);
      export_rdm(dir / ("rdm_" + tap), rdm, probe_labels);
    }
  }

  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json rj;
  rj["name"] = record.name;
  rj["seed"] = config.seed;
  rj["method"] = transfer_kind_name(config.method.kind);
  rj["epochs"] = config.epochs;
  rj["final_test_error"] = record.final_test_error;
  if (std::isfinite(record.final_train_error)) {
    rj["final_train_error"] = record.final_train_error;
  }
  rj["train_hash"] = hex64(record.train_hash);
  rj["test_hash"] = hex64(record.test_hash);
  rj["train_size"] = data.train.size();
  rj["validation_size"] = data.validation.size();
  rj["test_size"] = data.test.size();
  rj["prng"] = std::string(Rng::kAlgorithm);
  rj["checkpoint"] = "checkpoint.rdlk";
  rj["metrics"] = "metrics.csv";
  rj["wall_seconds"] = record.wall_seconds;
  write_text_file(dir / "record.json", rj.dump(2) + "\n");
  return record;
}

RunRecord run(const RunConfig& config, const fs::path& output_root) {
  return run(config, config.to_json_text(), output_root);
}

namespace {

struct ComparedModel {
  std::string name;
  RunConfig config;
  Network net;
  std::string test_hash;
  double final_test_error = 0.0;
};

}  // namespace

void compare(const std::vector<fs::path>& run_dirs, const fs::path& out_dir,
             std::uint64_t seed) {
  if (run_dirs.size() < 2) throw ConfigError("compare needs at least two run directories");

  std::vector<ComparedModel> models;
  std::set<std::string> names;
  for (const auto& dir : run_dirs) {
    ComparedModel m;
    m.config = RunConfig::from_file(dir / "config.json");
    m.net = load_checkpoint(dir / "checkpoint.rdlk");
    std::ifstream is(dir / "record.json");
    if (!is) throw IdxError(IdxError::Kind::Io, "cannot read " + (dir / "record.json").string());
    const json rj = json::parse(is);
    m.test_hash = rj.at("test_hash").get<std::string>();
    m.final_test_error = rj.at("final_test_error").get<double>();
    m.name = m.config.name;
    while (names.count(m.name)) m.name += "+";
    names.insert(m.name);
    models.push_back(std::move(m));
  }

  // The shared test set comes from the first record's data section; every
  // record must have trained against the same bytes.
  const LoadedData data = load_data(models.front().config);
  const std::string shared_hash = hex64(data.test.content_hash());
  for (const auto& m : models) {
    if (m.test_hash != shared_hash) {
      throw ShapeError("run '" + m.name + "' used a different test set (hash " +
                       m.test_hash + " != " + shared_hash + ")");
    }
  }

  fs::create_directories(out_dir);
  const std::size_t k = models.size();

  // Predictions, error table, pairwise McNemar with direction arrows.
  std::vector<std::vector<int>> preds;
  for (const auto& m : models) preds.push_back(predict_dataset(m.net, data.test));

  std::string errors_csv = "model,test_error\n";
  json report;
  for (std::size_t i = 0; i < k; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", error_rate(preds[i], data.test.labels));
    errors_csv += models[i].name + "," + buf + "\n";
    report["models"].push_back(models[i].name);
  }
  write_text_file(out_dir / "errors.csv", errors_csv);

  std::string mcnemar_csv = "model_a,model_b,p_value,significant_at_0.05,better\n";
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const PairedOutcomes o = paired_outcomes(preds[i], preds[j], data.test.labels);
      const double p = mcnemar_exact(o);
      const bool significant = p < 0.05;
      // n01 counts items only model A classified correctly.
      std::string better = "-";
      if (significant) better = o.n01 > o.n10 ? models[i].name : models[j].name;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6g", p);
      mcnemar_csv += models[i].name + "," + models[j].name + "," + buf + "," +
                     (significant ? "yes" : "no") + "," + better + "\n";
      report["mcnemar"].push_back({{"a", models[i].name},
                                   {"b", models[j].name},
                                   {"p", p},
                                   {"significant", significant},
                                   {"better", better},
                                   {"n01", o.n01},
                                   {"n10", o.n10}});
    }
  }
  write_text_file(out_dir / "mcnemar.csv", mcnemar_csv);

  // Per-tap representational comparison: taps shared by every model.
  std::vector<std::string> taps = models.front().config.eval.taps;
  if (taps.empty()) {
    for (const auto& [tap, idx] : models.front().net.taps()) taps.push_back(tap);
  }
  std::vector<std::string> shared_taps;
  for (const auto& tap : taps) {
    bool everywhere = true;
    for (const auto& m : models) everywhere = everywhere && m.net.has_tap(tap);
    if (everywhere) shared_taps.push_back(tap);
  }

  const EvalConfig& ev = models.front().config.eval;
  const std::size_t pool_n = std::min<std::size_t>(ev.bootstrap_pool, data.test.size());
  Rng pool_rng = Rng(seed).fork("pool");
  const Dataset pool =
      data.test.subset(pool_rng.sample_without_replacement(data.test.size(), pool_n));
  const int sample_size = std::min<int>(ev.bootstrap_size, static_cast<int>(pool_n));

  std::vector<std::string> model_names;
  for (const auto& m : models) model_names.push_back(m.name);

  for (std::size_t ti = 0; ti < shared_taps.size(); ++ti) {
    const std::string& tap = shared_taps[ti];
    std::vector<RowMat> acts;
    acts.reserve(k);
    for (const auto& m : models) acts.push_back(tap_activations(m.net, pool, tap));

    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(k, k);
    json skipped = json::object();
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const BootstrapResult r = bootstrap_rdm_distance(
            acts[i], acts[j], ev.bootstrap_samples, sample_size, ev.rdm_metric,
            ev.rdm_comparison, Rng(seed).fork("bootstrap", ti, i, j).seed(),
            ev.with_replacement);
        dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.mean_distance;
        dist(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r.mean_distance;
        if (r.skipped) {
          skipped[models[i].name + "/" + models[j].name] = r.skipped;
        }
      }
    }

    std::string dist_csv = "model";
    for (const auto& name : model_names) dist_csv += "," + name;
    dist_csv += "\n";
    for (std::size_t i = 0; i < k; ++i) {
      dist_csv += models[i].name;
      for (std::size_t j = 0; j < k; ++j) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.12g",
                      dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        dist_csv += std::string(",") + buf;
      }
      dist_csv += "\n";
    }
    write_text_file(out_dir / ("rdm_distance_" + tap + ".csv"), dist_csv);

    const MdsEmbedding embedding = classical_mds(dist);
    export_mds(out_dir / ("mds_" + tap), embedding, model_names);

    json tap_report;
    tap_report["tap"] = tap;
    tap_report["pool_size"] = pool_n;
    tap_report["bootstrap_samples"] = ev.bootstrap_samples;
    tap_report["sample_size"] = sample_size;
    tap_report["comparison"] = rdm_comparison_name(ev.rdm_comparison);
    tap_report["metric"] = pairwise_metric_name(ev.rdm_metric);
    tap_report["stress"] = embedding.stress;
    if (!skipped.empty()) tap_report["skipped_subsets"] = skipped;
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
      tap_report["distances"].push_back(
          std::vector<double>(dist.row(i).begin(), dist.row(i).end()));
    }
    report["taps"].push_back(tap_report);
  }

  report["seed"] = seed;
  report["test_hash"] = shared_hash;
  write_text_file(out_dir / "report.json", report.dump(2) + "\n");
}

}  // namespace rdl
