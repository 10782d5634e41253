#pragma once

#include <vector>

#include "adac/dataset.hpp"
#include "adac/maze.hpp"

namespace adac {

struct RouteMix {
  double left = 0.33;
  double middle = 0.22;
  double right = 0.45;
};

struct CollectOptions {
  RouteMix route_mix;
  int trajectory_count = 853;
  // Per-episode cruise speed cap, uniform in [lo, hi] (m/s). Keeping this
  // well under the terminal speed is what makes every demonstration slow.
  double speed_cap_lo = 0.45;
  double speed_cap_hi = 0.75;
  double action_noise = 0.15;  // Gaussian sigma in units of max_force
  double detour_prob = 0.3;
  double kp = 2.0;  // waypoint position gain -> desired velocity
  double kv = 2.0;  // velocity tracking gain -> force
  double advance_radius = 0.45;
};

struct CollectedTrajectory {
  std::vector<Transition> transitions;
  int route = -1;  // corridor index, left to right
};

// Step count of a full-throttle waypoint run along the BFS-shortest cell
// path; the engine's notion of the fastest achievable traversal.
int shortest_path_steps(const MazeSpec& spec);

// Noisy waypoint-following PD rollouts through sampled corridors. Every
// returned trajectory reaches the goal, has length >= ceil(1.25 *
// shortest_path_steps) and fits the episode horizon; offending rollouts are
// resampled, and a discard rate above 50% raises an error.
std::vector<CollectedTrajectory> collect_scripted_dataset(const MazeSpec& spec,
                                                          const CollectOptions& options,
                                                          Rng& rng);

// Corridor index of the trajectory (nearest corridor center at the first
// crossing of the obstacle band's vertical midpoint), -1 if none.
int classify_route(const MazeSpec& spec, const std::vector<Transition>& transitions);

// Flattens trajectories into a float32-quantized dataset with boundaries.
OfflineDataset to_dataset(const std::vector<CollectedTrajectory>& trajectories);

}  // namespace adac
