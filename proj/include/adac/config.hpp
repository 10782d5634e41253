#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "adac/advantage.hpp"
#include "adac/collect.hpp"
#include "adac/pretrain.hpp"
#include "adac/trainer.hpp"

namespace adac {

// Flat key=value run configuration, one [section] per pipeline stage. Every
// field has a default (this struct), unknown keys are rejected by name, and
// run directories are named by hashes of the resolved text so distinct
// configurations can never overwrite each other.
struct RunConfig {
  // [run]
  std::uint64_t seed = 0;
  std::string out = "runs";

  // [data] maze selection plus the scripted collector.
  std::string layout = "desk";  // "desk", "paper", or a maze file path
  int trajectories = 853;
  double route_left = 0.33;
  double route_middle = 0.22;
  double route_right = 0.45;
  double speed_cap_lo = 0.45;
  double speed_cap_hi = 0.75;
  double action_noise = 0.15;
  double detour_prob = 0.3;
  bool normalize = false;       // fit state normalization into the dataset
  bool export_ldjson = false;   // also write transitions.ldjson

  // [pretrain]
  int behavior_steps = 30000;
  int value_steps = 30000;
  int transition_steps = 30000;
  int pretrain_batch_size = 256;
  double pretrain_lr = 3e-4;
  double pretrain_gamma = 0.99;
  double value_tau = 0.9;
  int diffusion_steps = 10;
  int embed_dim = 16;
  int pretrain_hidden = 64;

  // [advantage]
  double kappa = 0.65;
  int sample_count = 25;
  double lambda_pos = 6.0;
  double lambda_neg = 4.0;

  // [train]
  double gamma = 0.99;
  double alpha = 1.0;
  int backup_count = 3;
  bool max_q_backup = true;
  bool use_advantage = true;
  int eval_candidates = 32;
  double eval_temperature = 0.02;
  double critic_lr = 3e-4;
  double actor_lr = 3e-4;
  double target_rate = 0.005;
  int batch_size = 128;
  int total_steps = 50000;
  int eval_interval = 5000;
  int eval_episodes = 20;
  int final_eval_episodes = 100;
  int hidden = 64;

  // [eval]
  int episodes = 100;              // acceptance protocol uses 100; paper exports 300
  bool export_trajectories = true;

  // [verify]
  int trials = 200;

  CollectOptions collect_options() const;
  PretrainConfig pretrain_config() const;
  AdvantageConfig advantage_config() const;
  TrainConfig train_config() const;
  void validate() const;
};

// Parses flat key=value text with [section] headers, '#' comment lines and
// blank lines. Unknown keys and malformed values raise std::invalid_argument
// naming the key and line.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical resolved serialization: every field, fixed order, doubles written
// with shortest exact round-trip. parse(config_text(c)) == c.
std::string config_text(const RunConfig& config);
// One section of the canonical text ("run", "data", ...).
std::string section_text(const RunConfig& config, std::string_view section);

std::uint64_t fnv1a64(std::string_view text);

// Content-hash run identities; downstream ids chain on the upstream id so a
// change anywhere upstream renames everything after it.
std::string data_run_id(const RunConfig& config);
std::string pretrain_run_id(const RunConfig& config);
std::string train_run_id(const RunConfig& config);
std::string eval_run_id(const RunConfig& config);
std::string verify_run_id(const RunConfig& config);
std::string advantage_stats_run_id(const RunConfig& config);

}  // namespace adac
