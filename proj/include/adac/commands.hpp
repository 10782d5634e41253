#pragma once

#include <iosfwd>
#include <string>

#include "adac/config.hpp"

namespace adac {

// Artifact locations inside the content-hashed run directories.
std::string dataset_path(const RunConfig& config);
std::string behavior_checkpoint_path(const RunConfig& config);
std::string value_checkpoint_path(const RunConfig& config);
std::string transition_checkpoint_path(const RunConfig& config);
std::string actor_checkpoint_path(const RunConfig& config);
std::string critic1_checkpoint_path(const RunConfig& config);
std::string critic2_checkpoint_path(const RunConfig& config);
std::string metrics_path(const RunConfig& config);

// Loaders with prerequisite checks: a missing artifact raises a
// std::runtime_error naming the file and the command that produces it.
OfflineDataset load_dataset_artifact(const RunConfig& config);
PretrainResult load_pretrain_artifacts(const RunConfig& config);

struct TrainedPolicy {
  ActorModel actor;
  CriticPair critics;
};
TrainedPolicy load_policy_artifacts(const RunConfig& config);

// Pipeline commands. Each validates the config, writes its artifacts plus the
// resolved config into its run directory, prints a report to `log`, and
// returns a process exit code (cmd_verify reports certificate failures as 1).
int cmd_gen_data(const RunConfig& config, std::ostream& log);
int cmd_pretrain(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_eval(const RunConfig& config, std::ostream& log);
int cmd_stats_dataset(const RunConfig& config, std::ostream& log);
int cmd_stats_advantage(const RunConfig& config, std::ostream& log);
int cmd_verify(const RunConfig& config, std::ostream& log);

}  // namespace adac
