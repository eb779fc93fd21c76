#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rdl/network.hpp"
#include "rdl/rdm.hpp"

namespace rdl {

// Serves the frozen teacher's RDM for a (batch, tap) pair. Taps are matched
// by an explicit student-tap -> teacher-tap name mapping, never by position.
// An optional on-disk cache keyed by batch content hash skips teacher
// forward passes; cache hits reproduce live recomputation bit for bit.
class TeacherRdmProvider {
 public:
  TeacherRdmProvider(std::shared_ptr<const Network> teacher,
                     std::map<std::string, std::string> tap_map, PairwiseMetric metric);

  // Directory for per-tap cache files (<tap>.rdm + <tap>.manifest.json).
  void enable_cache(const std::filesystem::path& dir);

  // Teacher RDMs for one batch, keyed by student tap. At most one teacher
  // forward pass per call.
  std::map<std::string, Rdm> rdms_for(const Tensor& batch,
                                      const std::vector<std::string>& student_taps);
  Rdm rdm_for(const Tensor& batch, const std::string& student_tap);

  const Network& teacher() const { return *teacher_; }
  const std::map<std::string, std::string>& tap_map() const { return tap_map_; }
  PairwiseMetric metric() const { return metric_; }
  std::uint64_t cache_hits() const { return hits_; }
  std::uint64_t cache_misses() const { return misses_; }

 private:
  std::string teacher_tap(const std::string& student_tap) const;
  bool cache_lookup(const std::string& teacher_tap, std::uint64_t batch_hash,
                    Eigen::Index n, Rdm* out);
  void cache_store(const std::string& teacher_tap, std::uint64_t batch_hash,
                   const Rdm& rdm);

  std::shared_ptr<const Network> teacher_;
  std::map<std::string, std::string> tap_map_;
  PairwiseMetric metric_;
  std::filesystem::path cache_dir_;
  bool cache_enabled_ = false;
  // tap -> (batch hash -> {byte offset, n}) mirror of the manifest files.
  std::map<std::string, std::map<std::string, std::pair<std::uint64_t, int>>> manifest_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace rdl
