#include "rdl/teacher.hpp"

#include <fstream>
#include <json.hpp>

#include "rdl/errors.hpp"

namespace rdl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Rdm rdm_from_upper(const Eigen::VectorXd& upper, Eigen::Index n, PairwiseMetric metric) {
  Rdm rdm;
  rdm.metric = metric;
  rdm.values = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      rdm.values(i, j) = upper[k];
      rdm.values(j, i) = upper[k];
      ++k;
    }
  }
  return rdm;
}

}  // namespace

TeacherRdmProvider::TeacherRdmProvider(std::shared_ptr<const Network> teacher,
                                       std::map<std::string, std::string> tap_map,
                                       PairwiseMetric metric)
    : teacher_(std::move(teacher)), tap_map_(std::move(tap_map)), metric_(metric) {
  if (!teacher_) throw ShapeError("teacher provider needs a network");
  for (const auto& [student_tap, t_tap] : tap_map_) {
    if (!teacher_->has_tap(t_tap)) {
      throw ShapeError("teacher has no tap '" + t_tap + "' (mapped from student tap '" +
                       student_tap + "')");
    }
  }
}

std::string TeacherRdmProvider::teacher_tap(const std::string& student_tap) const {
  auto it = tap_map_.find(student_tap);
  if (it == tap_map_.end()) {
    throw ShapeError("no teacher tap mapped for student tap '" + student_tap + "'");
  }
  return it->second;
}

void TeacherRdmProvider::enable_cache(const fs::path& dir) {
  fs::create_directories(dir);
  cache_dir_ = dir;
  cache_enabled_ = true;
  manifest_.clear();
  for (const auto& [student_tap, t_tap] : tap_map_) {
    const fs::path mpath = cache_dir_ / (t_tap + ".manifest.json");
    if (!fs::exists(mpath)) continue;
    std::ifstream is(mpath);
    json m = json::parse(is, nullptr, false);
    if (m.is_discarded() || !m.contains("entries")) continue;
    if (m.value("metric", "") != pairwise_metric_name(metric_)) continue;  // stale
    auto& entries = manifest_[t_tap];
    for (const auto& [key, val] : m["entries"].items()) {
      entries[key] = {val.at("offset").get<std::uint64_t>(), val.at("n").get<int>()};
    }
  }
}

bool TeacherRdmProvider::cache_lookup(const std::string& t_tap, std::uint64_t batch_hash,
                                      Eigen::Index n, Rdm* out) {
  auto tap_it = manifest_.find(t_tap);
  if (tap_it == manifest_.end()) return false;
  auto it = tap_it->second.find(hash_hex(batch_hash));
  if (it == tap_it->second.end()) return false;
  if (it->second.second != static_cast<int>(n)) return false;

  const Eigen::Index m = n * (n - 1) / 2;
  std::ifstream is(cache_dir_ / (t_tap + ".rdm"), std::ios::binary);
  if (!is) return false;
  is.seekg(static_cast<std::streamoff>(it->second.first));
  Eigen::VectorXd upper(m);
  if (!is.read(reinterpret_cast<char*>(upper.data()),
               static_cast<std::streamsize>(sizeof(double) * m))) {
    return false;
  }
  *out = rdm_from_upper(upper, n, metric_);
  return true;
}

void TeacherRdmProvider::cache_store(const std::string& t_tap, std::uint64_t batch_hash,
                                     const Rdm& rdm) {
  const Eigen::VectorXd upper = upper_triangle(rdm.values);
  const fs::path dpath = cache_dir_ / (t_tap + ".rdm");
  std::ofstream os(dpath, std::ios::binary | std::ios::app);
  if (!os) throw IdxError(IdxError::Kind::Io, "cannot append to " + dpath.string());
  os.seekp(0, std::ios::end);
  const auto offset = static_cast<std::uint64_t>(os.tellp());
  os.write(reinterpret_cast<const char*>(upper.data()),
           static_cast<std::streamsize>(sizeof(double) * upper.size()));
  os.close();

  manifest_[t_tap][hash_hex(batch_hash)] = {offset, static_cast<int>(rdm.n())};
  json m;
  m["version"] = 1;
  m["metric"] = pairwise_metric_name(metric_);
  m["entries"] = json::object();
  for (const auto& [key, val] : manifest_[t_tap]) {
    m["entries"][key] = {{"offset", val.first}, {"n", val.second}};
  }
  std::ofstream ms(cache_dir_ / (t_tap + ".manifest.json"));
  ms << m.dump(2) << "\n";
}

std::map<std::string, Rdm> TeacherRdmProvider::rdms_for(
    const Tensor& batch, const std::vector<std::string>& student_taps) {
  const std::uint64_t batch_hash = batch.content_hash();
  const auto n = static_cast<Eigen::Index>(batch.dim(0));

  std::map<std::string, Rdm> out;
  std::vector<std::string> missing;
  for (const auto& stap : student_taps) {
    const std::string ttap = teacher_tap(stap);
    Rdm rdm;
    if (cache_enabled_ && cache_lookup(ttap, batch_hash, n, &rdm)) {
      ++hits_;
      out.emplace(stap, std::move(rdm));
    } else {
      missing.push_back(stap);
    }
  }
  if (missing.empty()) return out;

  ++misses_;
  const ForwardResult fwd = forward(*teacher_, batch, Mode::Eval, 0);
  for (const auto& stap : missing) {
    const std::string ttap = teacher_tap(stap);
    const Tensor& acts = fwd.taps.at(ttap);
    Rdm rdm = compute_rdm(acts.batch_matrix(), metric_);
    if (cache_enabled_) cache_store(ttap, batch_hash, rdm);
    out.emplace(stap, std::move(rdm));
  }
  return out;
}

Rdm TeacherRdmProvider::rdm_for(const Tensor& batch, const std::string& student_tap) {
  return rdms_for(batch, {student_tap}).at(student_tap);
}

}  // namespace rdl
