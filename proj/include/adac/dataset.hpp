#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adac/rng.hpp"

namespace adac {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Transition {
  VectorXd state;
  VectorXd action;
  double reward = 0.0;
  VectorXd next_state;
  bool done = false;
};

struct Normalization {
  VectorXd mean;
  VectorXd scale;  // > 0
};

struct OfflineDataset {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<Transition> transitions;
  // Start index of each trajectory; sorted, first entry 0 when non-empty.
  std::vector<std::uint64_t> boundaries;
  std::optional<Normalization> normalization;

  std::size_t size() const { return transitions.size(); }
  std::size_t trajectory_count() const { return boundaries.size(); }
  std::uint64_t trajectory_length(std::size_t i) const;
  void validate() const;
};

// Structured load failure carrying the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : std::runtime_error("dataset format error at byte " + std::to_string(offset) + ": " +
                           what),
        offset(offset) {}
  std::uint64_t offset;
};

// Binary file format: little-endian, magic "ADAC", u32 version, u32 obs_dim,
// u32 act_dim, u64 transition count, u64 boundary count, u8 normalization
// flag (+ per-dim f32 mean/scale when set), then packed f32 records
// (state | action | reward | next_state | done as 0/1) and u64 boundaries.
void save_dataset(const OfflineDataset& d, const std::string& path);
OfflineDataset load_dataset(const std::string& path);

// Every stored value rounded through float32 so save/load is bit-exact.
void quantize_dataset(OfflineDataset& d);

struct Batch {
  MatrixXd states;
  MatrixXd actions;
  VectorXd rewards;
  MatrixXd next_states;
  VectorXd dones;
  std::vector<std::uint64_t> indices;  // row -> transition index in the store
  int rows() const { return static_cast<int>(states.rows()); }
};

// Uniform i.i.d. with replacement.
Batch sample_batch(const OfflineDataset& d, int batch_size, Rng& rng);
Batch take_batch(const OfflineDataset& d, const std::vector<std::uint64_t>& indices);

struct LengthCategories {
  double optimal = 0.0;       // length < t1
  double near_optimal = 0.0;  // [t1, t2)
  double competitive = 0.0;   // [t2, t3)
  double sub_optimal = 0.0;   // >= t3
  std::uint64_t t1 = 0, t2 = 0, t3 = 0;
};

LengthCategories trajectory_stats(const OfflineDataset& d, std::uint64_t t1, std::uint64_t t2,
                                  std::uint64_t t3);

std::uint64_t min_trajectory_length(const OfflineDataset& d);
double median_trajectory_length(const OfflineDataset& d);

// Per-dimension state mean and population std (clamped below at 1e-6),
// quantized to float32. Raw transitions stay untouched.
void fit_normalization(OfflineDataset& d);

// (s - mean) / scale when normalization is present, identity otherwise.
MatrixXd normalize_states(const OfflineDataset& d, MatrixXd states);

// Debug export, one transition per line:
// {"state":[...],"action":[...],"reward":r,"next_state":[...],"done":b}
void export_transitions_ldjson(const OfflineDataset& d, std::ostream& out);

}  // namespace adac
