#include "adac/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace adac {

std::uint64_t OfflineDataset::trajectory_length(std::size_t i) const {
  std::uint64_t end =
      i + 1 < boundaries.size() ? boundaries[i + 1] : static_cast<std::uint64_t>(size());
  return end - boundaries[i];
}

void OfflineDataset::validate() const {
  if (obs_dim <= 0 || act_dim <= 0)
    throw std::invalid_argument("dataset dims must be positive");
  for (const auto& t : transitions) {
    if (t.state.size() != obs_dim || t.next_state.size() != obs_dim ||
        t.action.size() != act_dim)
      throw std::invalid_argument("transition dimension mismatch");
    if (!t.state.allFinite() || !t.next_state.allFinite() || !t.action.allFinite() ||
        !std::isfinite(t.reward))
      throw std::invalid_argument("transition has non-finite entries");
  }
  if (!transitions.empty()) {
    if (boundaries.empty() || boundaries.front() != 0)
      throw std::invalid_argument("boundaries must start at 0");
    for (std::size_t i = 1; i < boundaries.size(); ++i)
      if (boundaries[i] <= boundaries[i - 1] || boundaries[i] >= size())
        throw std::invalid_argument("boundaries must be strictly increasing and in range");
  } else if (!boundaries.empty()) {
    throw std::invalid_argument("empty dataset cannot have boundaries");
  }
  if (normalization) {
    if (normalization->mean.size() != obs_dim || normalization->scale.size() != obs_dim)
      throw std::invalid_argument("normalization dimension mismatch");
    if ((normalization->scale.array() <= 0.0).any())
      throw std::invalid_argument("normalization scale must be positive");
  }
}

namespace {

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open dataset for writing: " + path);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out_.write(reinterpret_cast<const char*>(b), 4);
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void u8(std::uint8_t v) { out_.write(reinterpret_cast<const char*>(&v), 1); }
  void f(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void raw(const char* data, std::size_t n) { out_.write(data, n); }
  void finish() {
    if (!out_) throw std::runtime_error("dataset write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open dataset: " + path);
  }
  std::uint64_t offset() const { return offset_; }
  void raw(char* data, std::size_t n, const char* what) {
    if (!in_.read(data, n))
      throw FormatError(offset_, std::string("truncated while reading ") + what);
    offset_ += n;
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    raw(reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t lo = u32(what);
    std::uint64_t hi = u32(what);
    return lo | hi << 32;
  }
  std::uint8_t u8(const char* what) {
    char c;
    raw(&c, 1, what);
    return static_cast<std::uint8_t>(c);
  }
  float f(const char* what) {
    std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

 private:
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

constexpr std::uint32_t kVersion = 1;

}  // namespace

void quantize_dataset(OfflineDataset& d) {
  auto q = [](VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f32(v[i]);
  };
  for (auto& t : d.transitions) {
    q(t.state);
    q(t.action);
    q(t.next_state);
    t.reward = f32(t.reward);
  }
  if (d.normalization) {
    q(d.normalization->mean);
    q(d.normalization->scale);
  }
}

void save_dataset(const OfflineDataset& d, const std::string& path) {
  d.validate();
  Writer w(path);
  w.raw("ADAC", 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(d.obs_dim));
  w.u32(static_cast<std::uint32_t>(d.act_dim));
  w.u64(d.transitions.size());
  w.u64(d.boundaries.size());
  w.u8(d.normalization ? 1 : 0);
  if (d.normalization) {
    for (int i = 0; i < d.obs_dim; ++i) w.f(static_cast<float>(d.normalization->mean[i]));
    for (int i = 0; i < d.obs_dim; ++i) w.f(static_cast<float>(d.normalization->scale[i]));
  }
  for (const auto& t : d.transitions) {
    for (int i = 0; i < d.obs_dim; ++i) w.f(static_cast<float>(t.state[i]));
    for (int i = 0; i < d.act_dim; ++i) w.f(static_cast<float>(t.action[i]));
    w.f(static_cast<float>(t.reward));
    for (int i = 0; i < d.obs_dim; ++i) w.f(static_cast<float>(t.next_state[i]));
    w.f(t.done ? 1.0f : 0.0f);
  }
  for (std::uint64_t b : d.boundaries) w.u64(b);
  w.finish();
}

OfflineDataset load_dataset(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::memcmp(magic, "ADAC", 4) != 0)
    throw FormatError(0, "magic mismatch (expected ADAC)");
  std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError(r.offset() - 4, "unsupported version " + std::to_string(version));
  OfflineDataset d;
  d.obs_dim = static_cast<int>(r.u32("obs_dim"));
  d.act_dim = static_cast<int>(r.u32("act_dim"));
  if (d.obs_dim <= 0 || d.act_dim <= 0)
    throw FormatError(r.offset() - 8, "non-positive dimensions");
  std::uint64_t count = r.u64("transition count");
  std::uint64_t bcount = r.u64("boundary count");
  if (r.u8("normalization flag") != 0) {
    Normalization n;
    n.mean.resize(d.obs_dim);
    n.scale.resize(d.obs_dim);
    for (int i = 0; i < d.obs_dim; ++i) n.mean[i] = r.f("normalization mean");
    for (int i = 0; i < d.obs_dim; ++i) n.scale[i] = r.f("normalization scale");
    d.normalization = std::move(n);
  }
  d.transitions.resize(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Transition& t = d.transitions[k];
    t.state.resize(d.obs_dim);
    t.action.resize(d.act_dim);
    t.next_state.resize(d.obs_dim);
    for (int i = 0; i < d.obs_dim; ++i) t.state[i] = r.f("state");
    for (int i = 0; i < d.act_dim; ++i) t.action[i] = r.f("action");
    t.reward = r.f("reward");
    for (int i = 0; i < d.obs_dim; ++i) t.next_state[i] = r.f("next_state");
    t.done = r.f("done flag") != 0.0f;
  }
  d.boundaries.resize(bcount);
  for (std::uint64_t k = 0; k < bcount; ++k) d.boundaries[k] = r.u64("boundary");
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(r.offset(), std::string("inconsistent contents: ") + e.what());
  }
  return d;
}

Batch take_batch(const OfflineDataset& d, const std::vector<std::uint64_t>& indices) {
  Batch b;
  int n = static_cast<int>(indices.size());
  b.states.resize(n, d.obs_dim);
  b.actions.resize(n, d.act_dim);
  b.rewards.resize(n);
  b.next_states.resize(n, d.obs_dim);
  b.dones.resize(n);
  b.indices = indices;
  for (int i = 0; i < n; ++i) {
    const Transition& t = d.transitions.at(indices[i]);
    b.states.row(i) = t.state.transpose();
    b.actions.row(i) = t.action.transpose();
    b.rewards[i] = t.reward;
    b.next_states.row(i) = t.next_state.transpose();
    b.dones[i] = t.done ? 1.0 : 0.0;
  }
  return b;
}

Batch sample_batch(const OfflineDataset& d, int batch_size, Rng& rng) {
  if (d.transitions.empty()) throw std::invalid_argument("sample_batch: empty dataset");
  if (batch_size <= 0) throw std::invalid_argument("sample_batch: batch_size must be positive");
  std::vector<std::uint64_t> idx(batch_size);
  for (auto& i : idx) i = rng.below(d.transitions.size());
  return take_batch(d, idx);
}

LengthCategories trajectory_stats(const OfflineDataset& d, std::uint64_t t1, std::uint64_t t2,
                                  std::uint64_t t3) {
  if (!(t1 > 0 && t1 < t2 && t2 < t3))
    throw std::invalid_argument("trajectory_stats: need 0 < t1 < t2 < t3");
  LengthCategories out;
  out.t1 = t1;
  out.t2 = t2;
  out.t3 = t3;
  std::size_t n = d.trajectory_count();
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t len = d.trajectory_length(i);
    if (len < t1)
      out.optimal += 1;
    else if (len < t2)
      out.near_optimal += 1;
    else if (len < t3)
      out.competitive += 1;
    else
      out.sub_optimal += 1;
  }
  out.optimal /= n;
  out.near_optimal /= n;
  out.competitive /= n;
  out.sub_optimal /= n;
  return out;
}

std::uint64_t min_trajectory_length(const OfflineDataset& d) {
  if (d.trajectory_count() == 0) throw std::invalid_argument("dataset has no trajectories");
  std::uint64_t best = d.trajectory_length(0);
  for (std::size_t i = 1; i < d.trajectory_count(); ++i)
    best = std::min(best, d.trajectory_length(i));
  return best;
}

double median_trajectory_length(const OfflineDataset& d) {
  if (d.trajectory_count() == 0) throw std::invalid_argument("dataset has no trajectories");
  std::vector<std::uint64_t> lengths(d.trajectory_count());
  for (std::size_t i = 0; i < lengths.size(); ++i) lengths[i] = d.trajectory_length(i);
  std::sort(lengths.begin(), lengths.end());
  std::size_t n = lengths.size();
  if (n % 2 == 1) return static_cast<double>(lengths[n / 2]);
  return 0.5 * (static_cast<double>(lengths[n / 2 - 1]) + static_cast<double>(lengths[n / 2]));
}

void fit_normalization(OfflineDataset& d) {
  if (d.transitions.empty()) throw std::invalid_argument("fit_normalization: empty dataset");
  VectorXd mean = VectorXd::Zero(d.obs_dim);
  for (const auto& t : d.transitions) mean += t.state;
  mean /= static_cast<double>(d.size());
  VectorXd var = VectorXd::Zero(d.obs_dim);
  for (const auto& t : d.transitions) var += (t.state - mean).cwiseAbs2();
  var /= static_cast<double>(d.size());
  Normalization n;
  n.mean = mean;
  n.scale = var.cwiseSqrt().cwiseMax(1e-6);
  for (int i = 0; i < d.obs_dim; ++i) {
    n.mean[i] = f32(n.mean[i]);
    n.scale[i] = f32(n.scale[i]);
  }
  d.normalization = std::move(n);
}

MatrixXd normalize_states(const OfflineDataset& d, MatrixXd states) {
  if (!d.normalization) return states;
  states.rowwise() -= d.normalization->mean.transpose();
  states.array().rowwise() /= d.normalization->scale.transpose().array();
  return states;
}

void export_transitions_ldjson(const OfflineDataset& d, std::ostream& out) {
  auto array = [](const VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  for (const auto& t : d.transitions) {
    nlohmann::json line;
    line["state"] = array(t.state);
    line["action"] = array(t.action);
    line["reward"] = t.reward;
    line["next_state"] = array(t.next_state);
    line["done"] = t.done;
    out << line.dump() << "\n";
  }
}

}  // namespace adac
