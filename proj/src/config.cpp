#include "rdl/config.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "rdl/errors.hpp"

namespace rdl {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed, std::vector<std::string>& problems) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      problems.push_back(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

LayerSpec parse_layer(const json& j, std::size_t index, std::vector<std::string>& problems) {
  const std::string where = "arch.layers[" + std::to_string(index) + "]";
  check_keys(j, where, {"kind", "kernel", "stride", "features", "p", "tap"}, problems);
  LayerSpec spec;
  const std::string kind = get_or<std::string>(j, "kind", "");
  if (kind == "conv") spec.kind = LayerKind::Conv;
  else if (kind == "max_pool") spec.kind = LayerKind::MaxPool;
  else if (kind == "fully_connected") spec.kind = LayerKind::FullyConnected;
  else if (kind == "relu") spec.kind = LayerKind::ReLU;
  else if (kind == "dropout") spec.kind = LayerKind::Dropout;
  else if (kind == "softmax") spec.kind = LayerKind::Softmax;
  else if (kind == "linear_readout") spec.kind = LayerKind::LinearReadout;
  else {
    problems.push_back(where + ": unknown layer kind '" + kind + "'");
    return spec;
  }
  if (j.contains("kernel")) {
    const auto k = j.at("kernel").get<std::vector<std::size_t>>();
    if (k.size() != 2) {
      problems.push_back(where + ": kernel must be [height, width]");
    } else {
      spec.kernel_h = k[0];
      spec.kernel_w = k[1];
    }
  }
  spec.stride = get_or<std::size_t>(j, "stride", 1);
  spec.features = get_or<std::size_t>(j, "features", 0);
  spec.dropout_p = get_or<double>(j, "p", 0.0);
  spec.tap = get_or<std::string>(j, "tap", "");
  try {
    spec.validate();
  } catch (const std::exception& e) {
    problems.push_back(where + ": " + e.what());
  }
  return spec;
}

json layer_to_json(const LayerSpec& spec) {
  json j;
  switch (spec.kind) {
    case LayerKind::Conv: j["kind"] = "conv"; break;
    case LayerKind::MaxPool: j["kind"] = "max_pool"; break;
    case LayerKind::FullyConnected: j["kind"] = "fully_connected"; break;
    case LayerKind::ReLU: j["kind"] = "relu"; break;
    case LayerKind::Dropout: j["kind"] = "dropout"; break;
    case LayerKind::Softmax: j["kind"] = "softmax"; break;
    case LayerKind::LinearReadout: j["kind"] = "linear_readout"; break;
  }
  if (spec.kind == LayerKind::Conv || spec.kind == LayerKind::MaxPool) {
    j["kernel"] = {spec.kernel_h, spec.kernel_w};
    j["stride"] = spec.stride;
  }
  if (spec.kind == LayerKind::Conv || spec.kind == LayerKind::FullyConnected ||
      spec.kind == LayerKind::LinearReadout) {
    j["features"] = spec.features;
  }
  if (spec.kind == LayerKind::Dropout) j["p"] = spec.dropout_p;
  if (!spec.tap.empty()) j["tap"] = spec.tap;
  return j;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) throw ConfigError("config is not valid JSON");
  if (!root.is_object()) throw ConfigError("config root must be an object");

  std::vector<std::string> problems;
  check_keys(root, "config",
             {"schema_version", "name", "seed", "data", "arch", "optimizer", "training",
              "method", "eval", "output_dir"},
             problems);

  RunConfig cfg;
  try {
    cfg.schema_version = get_or<int>(root, "schema_version", 0);
    if (cfg.schema_version != 1) {
      problems.push_back("schema_version must be 1");
    }
    cfg.name = get_or<std::string>(root, "name", "");
    if (cfg.name.empty()) problems.push_back("name is required");
    cfg.seed = get_or<std::uint64_t>(root, "seed", 0);
    cfg.output_dir = get_or<std::string>(root, "output_dir", "runs");

    // data
    if (!root.contains("data")) {
      problems.push_back("data section is required");
    } else {
      const json& d = root.at("data");
      check_keys(d, "data",
                 {"kind", "train_images", "train_labels", "test_images", "test_labels",
                  "cache_train", "cache_test", "synthetic", "validation_count", "subset",
                  "gcn", "hflip_augment"},
                 problems);
      cfg.data.kind = get_or<std::string>(d, "kind", "");
      cfg.data.train_images = get_or<std::string>(d, "train_images", "");
      cfg.data.train_labels = get_or<std::string>(d, "train_labels", "");
      cfg.data.test_images = get_or<std::string>(d, "test_images", "");
      cfg.data.test_labels = get_or<std::string>(d, "test_labels", "");
      cfg.data.cache_train = get_or<std::string>(d, "cache_train", "");
      cfg.data.cache_test = get_or<std::string>(d, "cache_test", "");
      cfg.data.validation_count = get_or<std::size_t>(d, "validation_count", 0);
      cfg.data.gcn = get_or<bool>(d, "gcn", false);
      cfg.data.hflip_augment = get_or<bool>(d, "hflip_augment", false);
      if (d.contains("synthetic")) {
        const json& s = d.at("synthetic");
        check_keys(s, "data.synthetic",
                   {"classes", "per_class", "test_per_class", "height", "width",
                    "separation", "seed"},
                   problems);
        cfg.data.classes = get_or<int>(s, "classes", 10);
        cfg.data.per_class = get_or<int>(s, "per_class", 100);
        cfg.data.test_per_class = get_or<int>(s, "test_per_class", 50);
        cfg.data.height = get_or<std::size_t>(s, "height", 8);
        cfg.data.width = get_or<std::size_t>(s, "width", 8);
        cfg.data.separation = get_or<double>(s, "separation", 4.0);
        cfg.data.data_seed = get_or<std::uint64_t>(s, "seed", 0);
      }
      if (d.contains("subset")) {
        const json& s = d.at("subset");
        check_keys(s, "data.subset", {"seed", "skip", "take"}, problems);
        cfg.data.subset.enabled = true;
        cfg.data.subset.seed = get_or<std::uint64_t>(s, "seed", 0);
        cfg.data.subset.skip = get_or<std::size_t>(s, "skip", 0);
        cfg.data.subset.take = get_or<std::size_t>(s, "take", 0);
      }
    }

    // arch
    if (!root.contains("arch")) {
      problems.push_back("arch section is required");
    } else {
      const json& a = root.at("arch");
      check_keys(a, "arch", {"input", "layers"}, problems);
      if (a.contains("input")) {
        cfg.input_shape = a.at("input").get<Shape>();
      } else {
        problems.push_back("arch.input is required");
      }
      if (a.contains("layers") && a.at("layers").is_array()) {
        std::size_t i = 0;
        for (const auto& lj : a.at("layers")) {
          cfg.layers.push_back(parse_layer(lj, i++, problems));
        }
      } else {
        problems.push_back("arch.layers is required");
      }
    }

    // optimizer
    if (root.contains("optimizer")) {
      const json& o = root.at("optimizer");
      check_keys(o, "optimizer",
                 {"learning_rate", "momentum", "batch_size", "lr_halving_interval"},
                 problems);
      cfg.learning_rate = get_or<double>(o, "learning_rate", 0.01);
      cfg.momentum = get_or<double>(o, "momentum", 0.9);
      cfg.batch_size = get_or<std::size_t>(o, "batch_size", 100);
      cfg.lr_halving_interval = get_or<int>(o, "lr_halving_interval", 0);
    }

    // training
    if (root.contains("training")) {
      const json& t = root.at("training");
      check_keys(t, "training", {"epochs", "eval_test_each_epoch", "eval_test_count"},
                 problems);
      cfg.epochs = get_or<int>(t, "epochs", 0);
      cfg.eval_test_each_epoch = get_or<bool>(t, "eval_test_each_epoch", true);
      cfg.eval_test_count = get_or<std::size_t>(t, "eval_test_count", 0);
    } else {
      problems.push_back("training section is required");
    }

    // method
    if (root.contains("method")) {
      const json& m = root.at("method");
      check_keys(m, "method",
                 {"kind", "teacher_checkpoint", "replace_readout", "taps", "alpha0",
                  "alpha_rule", "student_tap", "teacher_tap", "pretrain_epochs", "tap_map",
                  "pair_fraction", "pair_count", "metric", "teacher_rdm_cache"},
                 problems);
      try {
        cfg.method.kind = transfer_kind_from_name(get_or<std::string>(m, "kind", "baseline"));
      } catch (const std::exception& e) {
        problems.push_back(std::string("method.kind: ") + e.what());
      }
      cfg.method.teacher_checkpoint = get_or<std::string>(m, "teacher_checkpoint", "");
      cfg.method.replace_readout = get_or<bool>(m, "replace_readout", false);
      cfg.method.dsn_taps = get_or<std::vector<std::string>>(m, "taps", {});
      cfg.method.alpha0 = get_or<double>(m, "alpha0", 0.0);
      const std::string rule = get_or<std::string>(
          m, "alpha_rule",
          cfg.method.kind == TransferKind::DeepSupervision ? "dsn_decay" : "rdl_linear");
      if (rule == "rdl_linear") cfg.method.alpha_rule = AlphaRule::RdlLinear;
      else if (rule == "dsn_decay") cfg.method.alpha_rule = AlphaRule::DsnDecay;
      else problems.push_back("method.alpha_rule: unknown rule '" + rule + "'");
      cfg.method.student_tap = get_or<std::string>(m, "student_tap", "");
      cfg.method.teacher_tap = get_or<std::string>(m, "teacher_tap", "");
      cfg.method.pretrain_epochs = get_or<int>(m, "pretrain_epochs", 0);
      if (m.contains("tap_map")) {
        cfg.method.tap_map =
            m.at("tap_map").get<std::map<std::string, std::string>>();
      }
      cfg.method.pair_fraction = get_or<double>(m, "pair_fraction", 0.05);
      cfg.method.pair_count = get_or<std::size_t>(m, "pair_count", 0);
      try {
        cfg.method.metric =
            pairwise_metric_from_name(get_or<std::string>(m, "metric", "mse"));
      } catch (const std::exception& e) {
        problems.push_back(std::string("method.metric: ") + e.what());
      }
      cfg.method.teacher_rdm_cache = get_or<bool>(m, "teacher_rdm_cache", false);
    }

    // eval
    if (root.contains("eval")) {
      const json& e = root.at("eval");
      check_keys(e, "eval",
                 {"bootstrap_samples", "bootstrap_size", "bootstrap_pool",
                  "with_replacement", "rdm_metric", "rdm_comparison", "taps",
                  "export_rdm_images"},
                 problems);
      cfg.eval.bootstrap_samples = get_or<int>(e, "bootstrap_samples", 20);
      cfg.eval.bootstrap_size = get_or<int>(e, "bootstrap_size", 100);
      cfg.eval.bootstrap_pool = get_or<std::size_t>(e, "bootstrap_pool", 2000);
      cfg.eval.with_replacement = get_or<bool>(e, "with_replacement", false);
      try {
        cfg.eval.rdm_metric =
            pairwise_metric_from_name(get_or<std::string>(e, "rdm_metric", "mse"));
        cfg.eval.rdm_comparison = rdm_comparison_from_name(
            get_or<std::string>(e, "rdm_comparison", "correlation"));
      } catch (const std::exception& ex) {
        problems.push_back(std::string("eval: ") + ex.what());
      }
      cfg.eval.taps = get_or<std::vector<std::string>>(e, "taps", {});
      cfg.eval.export_rdm_images = get_or<int>(e, "export_rdm_images", 100);
    }
  } catch (const json::exception& e) {
    problems.push_back(std::string("malformed value: ") + e.what());
  }

  const std::vector<std::string> more = cfg.validate();
  problems.insert(problems.end(), more.begin(), more.end());
  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> problems;
  auto tap_exists = [&](const std::string& tap) {
    return std::any_of(layers.begin(), layers.end(),
                       [&](const LayerSpec& l) { return l.tap == tap; });
  };

  if (data.kind != "idx" && data.kind != "synthetic" && data.kind != "cache") {
    problems.push_back("data.kind must be idx, synthetic or cache");
  }
  if (data.kind == "idx") {
    for (const auto& [field, value] :
         std::initializer_list<std::pair<const char*, const std::string&>>{
             {"train_images", data.train_images},
             {"train_labels", data.train_labels},
             {"test_images", data.test_images},
             {"test_labels", data.test_labels}}) {
      if (value.empty()) problems.push_back(std::string("data.") + field + " is required");
    }
  }
  if (data.kind == "cache" && (data.cache_train.empty() || data.cache_test.empty())) {
    problems.push_back("data.cache_train and data.cache_test are required");
  }
  if (data.subset.enabled && data.subset.take == 0) {
    problems.push_back("data.subset.take must be positive");
  }

  if (input_shape.empty()) problems.push_back("arch.input must be nonempty");
  if (layers.empty()) problems.push_back("arch.layers must be nonempty");

  if (!(learning_rate > 0.0)) problems.push_back("optimizer.learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    problems.push_back("optimizer.momentum must be in [0, 1)");
  }
  if (batch_size == 0) problems.push_back("optimizer.batch_size must be positive");
  if (epochs < 0) problems.push_back("training.epochs must be nonnegative");

  const bool needs_teacher = method.kind == TransferKind::Finetune ||
                             method.kind == TransferKind::Hints ||
                             method.kind == TransferKind::Rdl;
  if (needs_teacher && method.teacher_checkpoint.empty()) {
    problems.push_back("method.teacher_checkpoint is required for " +
                       transfer_kind_name(method.kind));
  }

  if (method.kind == TransferKind::Rdl) {
    if (method.tap_map.empty()) {
      problems.push_back("method.tap_map is required for rdl");
    }
    for (const auto& [student_tap, teacher_tap] : method.tap_map) {
      if (!tap_exists(student_tap)) {
        problems.push_back("method.tap_map: architecture has no tap '" + student_tap + "'");
      }
      if (teacher_tap.empty()) {
        problems.push_back("method.tap_map: empty teacher tap for '" + student_tap + "'");
      }
    }
    if (!(method.pair_fraction > 0.0 && method.pair_fraction <= 1.0) &&
        method.pair_count == 0) {
      problems.push_back("method.pair_fraction must be in (0, 1] (or give pair_count)");
    }
    if (batch_size < 2) problems.push_back("rdl needs batch_size >= 2 for pairs");
    if (method.alpha0 < 0.0) problems.push_back("method.alpha0 must be nonnegative");
    if (epochs < 1) problems.push_back("rdl needs at least one epoch");
  }

  if (method.kind == TransferKind::DeepSupervision) {
    for (const auto& tap : method.dsn_taps) {
      if (!tap_exists(tap)) {
        problems.push_back("method.taps: architecture has no tap '" + tap + "'");
      }
    }
    if (method.alpha0 < 0.0) problems.push_back("method.alpha0 must be nonnegative");
    if (!method.dsn_taps.empty() && epochs < 1) {
      problems.push_back("deep supervision needs at least one epoch");
    }
  }

  if (method.kind == TransferKind::Hints) {
    if (method.student_tap.empty() || !tap_exists(method.student_tap)) {
      problems.push_back("method.student_tap must name a tap of the architecture");
    }
    if (method.teacher_tap.empty()) {
      problems.push_back("method.teacher_tap is required for hints");
    }
    if (method.pretrain_epochs < 0) {
      problems.push_back("method.pretrain_epochs must be nonnegative");
    }
  }

  for (const auto& tap : eval.taps) {
    if (!tap_exists(tap)) {
      problems.push_back("eval.taps: architecture has no tap '" + tap + "'");
    }
  }
  if (eval.bootstrap_samples < 1) problems.push_back("eval.bootstrap_samples must be >= 1");
  if (eval.bootstrap_size < 2) problems.push_back("eval.bootstrap_size must be >= 2");
  return problems;
}

std::string RunConfig::to_json_text() const {
  json root;
  root["schema_version"] = schema_version;
  root["name"] = name;
  root["seed"] = seed;
  root["output_dir"] = output_dir;

  json d;
  d["kind"] = data.kind;
  if (data.kind == "idx") {
    d["train_images"] = data.train_images;
    d["train_labels"] = data.train_labels;
    d["test_images"] = data.test_images;
    d["test_labels"] = data.test_labels;
  }
  if (data.kind == "cache") {
    d["cache_train"] = data.cache_train;
    d["cache_test"] = data.cache_test;
  }
  if (data.kind == "synthetic") {
    d["synthetic"] = {{"classes", data.classes},
                      {"per_class", data.per_class},
                      {"test_per_class", data.test_per_class},
                      {"height", data.height},
                      {"width", data.width},
                      {"separation", data.separation},
                      {"seed", data.data_seed}};
  }
  if (data.validation_count) d["validation_count"] = data.validation_count;
  if (data.subset.enabled) {
    d["subset"] = {{"seed", data.subset.seed},
                   {"skip", data.subset.skip},
                   {"take", data.subset.take}};
  }
  if (data.gcn) d["gcn"] = true;
  if (data.hflip_augment) d["hflip_augment"] = true;
  root["data"] = d;

  json arch;
  arch["input"] = input_shape;
  arch["layers"] = json::array();
  for (const auto& l : layers) arch["layers"].push_back(layer_to_json(l));
  root["arch"] = arch;

  root["optimizer"] = {{"learning_rate", learning_rate},
                       {"momentum", momentum},
                       {"batch_size", batch_size},
                       {"lr_halving_interval", lr_halving_interval}};
  root["training"] = {{"epochs", epochs},
                      {"eval_test_each_epoch", eval_test_each_epoch},
                      {"eval_test_count", eval_test_count}};

  json m;
  m["kind"] = transfer_kind_name(method.kind);
  if (!method.teacher_checkpoint.empty()) m["teacher_checkpoint"] = method.teacher_checkpoint;
  if (method.kind == TransferKind::Finetune) m["replace_readout"] = method.replace_readout;
  if (method.kind == TransferKind::DeepSupervision) {
    m["taps"] = method.dsn_taps;
    m["alpha0"] = method.alpha0;
    m["alpha_rule"] = method.alpha_rule == AlphaRule::DsnDecay ? "dsn_decay" : "rdl_linear";
  }
  if (method.kind == TransferKind::Hints) {
    m["student_tap"] = method.student_tap;
    m["teacher_tap"] = method.teacher_tap;
    if (method.pretrain_epochs) m["pretrain_epochs"] = method.pretrain_epochs;
  }
  if (method.kind == TransferKind::Rdl) {
    m["tap_map"] = method.tap_map;
    m["alpha0"] = method.alpha0;
    m["alpha_rule"] = method.alpha_rule == AlphaRule::DsnDecay ? "dsn_decay" : "rdl_linear";
    if (method.pair_count) {
      m["pair_count"] = method.pair_count;
    } else {
      m["pair_fraction"] = method.pair_fraction;
    }
    m["metric"] = pairwise_metric_name(method.metric);
    m["teacher_rdm_cache"] = method.teacher_rdm_cache;
  }
  root["method"] = m;

  root["eval"] = {{"bootstrap_samples", eval.bootstrap_samples},
                  {"bootstrap_size", eval.bootstrap_size},
                  {"bootstrap_pool", eval.bootstrap_pool},
                  {"with_replacement", eval.with_replacement},
                  {"rdm_metric", pairwise_metric_name(eval.rdm_metric)},
                  {"rdm_comparison", rdm_comparison_name(eval.rdm_comparison)},
                  {"taps", eval.taps},
                  {"export_rdm_images", eval.export_rdm_images}};
  return root.dump(2) + "\n";
}

TrainOptions RunConfig::train_options() const {
  TrainOptions opts;
  opts.learning_rate = learning_rate;
  opts.momentum = momentum;
  opts.batch_size = batch_size;
  opts.lr_halving_interval = lr_halving_interval;
  opts.hflip_augment = data.hflip_augment;
  return opts;
}

int RunConfig::hints_pretrain_epochs() const {
  if (method.pretrain_epochs > 0) return method.pretrain_epochs;
  return std::max(1, epochs / 5);
}

}  // namespace rdl
