#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "rdl/checkpoint.hpp"
#include "rdl/config.hpp"
#include "rdl/dataset.hpp"
#include "rdl/errors.hpp"
#include "rdl/exporters.hpp"
#include "rdl/runner.hpp"
#include "rdl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path output_root(const std::string& cli_override) {
  if (!cli_override.empty()) return cli_override;
  if (const char* env = std::getenv("RDL_OUTPUT_ROOT"); env && *env) return env;
  return ".";
}

std::string read_file(const fs::path& path) {
  return rdl::read_text_file(path);
}

int fail_with_json(const std::string& type, const std::exception& e,
                   const std::vector<std::string>& violations = {}) {
  json err;
  err["error"] = type;
  err["message"] = e.what();
  if (!violations.empty()) err["violations"] = violations;
  std::cerr << err.dump(2) << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Representational distance learning experiments"};
  app.require_subcommand(1);

  std::string config_path, root_override;
  auto* train_cmd = app.add_subcommand("train", "Run one experiment from a config file");
  train_cmd->add_option("config", config_path, "Run configuration (JSON)")->required();
  train_cmd->add_option("--output-root", root_override,
                        "Root for run directories (default: $RDL_OUTPUT_ROOT or .)");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
  validate_cmd->add_option("config", validate_path, "Run configuration (JSON)")->required();

  std::vector<std::string> compare_dirs;
  std::string compare_out = "comparison";
  std::uint64_t compare_seed = 17;
  auto* compare_cmd = app.add_subcommand("compare", "Compare finished run directories");
  compare_cmd->add_option("runs", compare_dirs, "Run directories")->required()->expected(-2);
  compare_cmd->add_option("--out", compare_out, "Output directory (default: comparison)");
  compare_cmd->add_option("--seed", compare_seed, "Bootstrap/pool seed (default: 17)");

  std::string ckpt_path, dataset_path, labels_path, tap, export_stem = "rdm";
  std::string metric_name = "squared_euclidean";
  std::size_t export_count = 100;
  auto* export_cmd =
      app.add_subcommand("rdm-export", "Export a checkpoint's RDM at one tap");
  export_cmd->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();
  export_cmd
      ->add_option("dataset", dataset_path,
                   "Dataset: a .rdld cache file, or an IDX image file with --labels")
      ->required();
  export_cmd->add_option("tap", tap, "Tap name")->required();
  export_cmd->add_option("--labels", labels_path, "IDX label file (for IDX datasets)");
  export_cmd->add_option("--out", export_stem, "Output stem (default: rdm)");
  export_cmd->add_option("--metric", metric_name,
                         "mse | squared_euclidean | correlation (default: squared_euclidean)");
  export_cmd->add_option("--count", export_count, "Images to use (default: 100)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const std::string text = read_file(config_path);
      const rdl::RunConfig config = rdl::RunConfig::from_json_text(text);
      const rdl::RunRecord record = rdl::run(config, text, output_root(root_override));
      json out;
      out["run_dir"] = record.dir.string();
      out["final_test_error"] = record.final_test_error;
      out["epochs"] = record.history.size();
      out["wall_seconds"] = record.wall_seconds;
      std::cout << out.dump(2) << std::endl;
      return 0;
    }
    if (*validate_cmd) {
      rdl::RunConfig::from_json_text(read_file(validate_path));
      json out;
      out["valid"] = true;
      std::cout << out.dump(2) << std::endl;
      return 0;
    }
    if (*compare_cmd) {
      std::vector<fs::path> dirs(compare_dirs.begin(), compare_dirs.end());
      rdl::compare(dirs, compare_out, compare_seed);
      json out;
      out["comparison_dir"] = compare_out;
      out["runs"] = compare_dirs;
      std::cout << out.dump(2) << std::endl;
      return 0;
    }
    if (*export_cmd) {
      const rdl::Network net = rdl::load_checkpoint(ckpt_path);
      rdl::Dataset data;
      if (fs::path(dataset_path).extension() == ".rdld") {
        data = rdl::load_dataset_cache(dataset_path);
      } else {
        if (labels_path.empty()) {
          throw rdl::ConfigError("IDX datasets need --labels <file>");
        }
        data = rdl::load_idx(dataset_path, labels_path);
      }
      const std::size_t n = std::min<std::size_t>(export_count, data.size());
      if (n < 2) throw rdl::ConfigError("need at least two images for an RDM");
      const rdl::Tensor probe = data.batch(0, n);
      const rdl::ForwardResult fwd = rdl::forward(net, probe, rdl::Mode::Eval, 0);
      if (!net.has_tap(tap)) throw rdl::ConfigError("checkpoint has no tap '" + tap + "'");
      const rdl::Rdm rdm = rdl::compute_rdm(fwd.taps.at(tap).batch_matrix(),
                                            rdl::pairwise_metric_from_name(metric_name));
      std::vector<int> labels(data.labels.begin(), data.labels.begin() + static_cast<long>(n));
      rdl::export_rdm(export_stem, rdm, labels);
      json out;
      out["csv"] = export_stem + ".csv";
      out["json"] = export_stem + ".json";
      out["svg"] = export_stem + ".svg";
      std::cout << out.dump(2) << std::endl;
      return 0;
    }
  } catch (const rdl::ConfigError& e) {
    return fail_with_json("config", e, e.violations);
  } catch (const rdl::IdxError& e) {
    return fail_with_json("io", e);
  } catch (const rdl::ShapeError& e) {
    return fail_with_json("shape", e);
  } catch (const rdl::NumericError& e) {
    return fail_with_json("numeric", e);
  } catch (const rdl::DegenerateInputError& e) {
    return fail_with_json("degenerate_input", e);
  } catch (const std::exception& e) {
    return fail_with_json("internal", e);
  }
  return 1;
}
