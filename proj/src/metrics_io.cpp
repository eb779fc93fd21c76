#include "rdl/metrics_io.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "rdl/errors.hpp"

namespace rdl {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string error_curve_csv(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch,train_loss,train_error,test_error,alpha,learning_rate\n";
  for (const auto& m : history) {
    out += std::to_string(m.epoch) + "," + fmt(m.train_loss) + "," + fmt(m.train_error) +
           "," + fmt(m.test_error) + "," + fmt(m.alpha) + "," + fmt(m.learning_rate) + "\n";
  }
  return out;
}

std::vector<EpochMetrics> parse_error_curve_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line) ||
      line != "epoch,train_loss,train_error,test_error,alpha,learning_rate") {
    throw ShapeError("error curve: unexpected header");
  }
  std::vector<EpochMetrics> history;
  int prev_epoch = -1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    EpochMetrics m;
    double epoch;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &epoch, &m.train_loss,
                    &m.train_error, &m.test_error, &m.alpha, &m.learning_rate) != 6) {
      throw ShapeError("error curve: malformed row '" + line + "'");
    }
    m.epoch = static_cast<int>(epoch);
    if (m.epoch <= prev_epoch) throw ShapeError("error curve: epochs must increase");
    prev_epoch = m.epoch;
    history.push_back(m);
  }
  return history;
}

void write_error_curve(const std::filesystem::path& csv_path,
                       const std::vector<EpochMetrics>& history) {
  std::ofstream os(csv_path);
  if (!os) throw IdxError(IdxError::Kind::Io, "cannot write " + csv_path.string());
  os << error_curve_csv(history);
}

std::vector<EpochMetrics> read_error_curve(const std::filesystem::path& csv_path) {
  std::ifstream is(csv_path);
  if (!is) throw IdxError(IdxError::Kind::Io, "cannot read " + csv_path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_error_curve_csv(ss.str());
}

std::string history_json(const std::vector<EpochMetrics>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : history) {
    nlohmann::json row;
    row["epoch"] = m.epoch;
    row["train_loss"] = m.train_loss;
    row["train_error"] = m.train_error;
    if (std::isfinite(m.test_error)) row["test_error"] = m.test_error;
    row["alpha"] = m.alpha;
    row["learning_rate"] = m.learning_rate;
    for (const auto& [tap, v] : m.aux_loss) row["aux_loss"][tap] = v;
    arr.push_back(row);
  }
  return arr.dump(2);
}

}  // namespace rdl
