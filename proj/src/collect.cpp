#include "adac/collect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adac {

namespace {

struct Rollout {
  std::vector<Transition> transitions;
  bool success = false;
};

// Velocity-targeted PD toward a waypoint list: desired speed is capped, so
// demonstrations cruise well below the terminal speed of the plant.
Rollout run_waypoints(const MazeSpec& spec, const std::vector<Eigen::Vector2d>& waypoints,
                      double speed_cap, double noise_sigma, double kp, double kv,
                      double advance_radius, Rng& rng, bool jitter) {
  Rollout out;
  MazeState s = maze_reset(spec, rng, jitter);
  std::size_t wp = 0;
  for (int t = 0; t < spec.max_episode_steps; ++t) {
    while (wp + 1 < waypoints.size() && (s.position - waypoints[wp]).norm() < advance_radius)
      ++wp;
    Eigen::Vector2d delta = waypoints[wp] - s.position;
    double dist = delta.norm();
    Eigen::Vector2d vdes = Eigen::Vector2d::Zero();
    if (dist > 1e-9) vdes = std::min(speed_cap, kp * dist) / dist * delta;
    Eigen::Vector2d a = kv * (vdes - s.velocity);
    if (noise_sigma > 0.0) {
      a.x() += noise_sigma * spec.max_force * rng.normal();
      a.y() += noise_sigma * spec.max_force * rng.normal();
    }
    a = a.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);
    MazeStepOut step = maze_step(spec, s, a);
    Transition tr;
    tr.state = observe(s);
    tr.action = a;
    tr.reward = step.reward;
    tr.next_state = observe(step.state);
    tr.done = step.done;
    out.transitions.push_back(std::move(tr));
    s = step.state;
    if (step.reward > 0.0) {
      out.success = true;
      break;
    }
    if (step.done) break;
  }
  return out;
}

// Turning points of the BFS cell path, ending at the goal position.
std::vector<Eigen::Vector2d> bfs_waypoints(const MazeSpec& spec) {
  auto cells = shortest_cell_path(spec);
  std::vector<Eigen::Vector2d> wps;
  for (std::size_t i = 1; i + 1 < cells.size(); ++i) {
    Eigen::Vector2d din = cells[i] - cells[i - 1];
    Eigen::Vector2d dout = cells[i + 1] - cells[i];
    if ((din - dout).norm() > 1e-9) wps.push_back(cells[i]);
  }
  wps.push_back(spec.goal_position);
  return wps;
}

}  // namespace

int shortest_path_steps(const MazeSpec& spec) {
  MazeSpec wide = spec;
  wide.max_episode_steps = std::max(4 * spec.max_episode_steps, 4000);
  Rng rng(0);
  Rollout r = run_waypoints(wide, bfs_waypoints(wide), 1e9, 0.0, 2.0, 2.0, 0.45, rng,
                            /*jitter=*/false);
  if (!r.success)
    throw std::runtime_error("shortest_path_steps: full-throttle run failed to reach goal");
  return static_cast<int>(r.transitions.size());
}

std::vector<CollectedTrajectory> collect_scripted_dataset(const MazeSpec& spec,
                                                          const CollectOptions& options,
                                                          Rng& rng) {
  const RouteMix& mix = options.route_mix;
  double total = mix.left + mix.middle + mix.right;
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("route mix probabilities must sum to 1");
  if (options.trajectory_count <= 0)
    throw std::invalid_argument("trajectory_count must be positive");

  std::vector<double> corridors = corridor_centers(spec);
  if (corridors.empty()) throw std::runtime_error("maze has no corridor through the band");
  int left_idx = 0;
  int right_idx = static_cast<int>(corridors.size()) - 1;
  int middle_idx = static_cast<int>(corridors.size()) / 2;

  int floor_steps = static_cast<int>(std::ceil(1.25 * shortest_path_steps(spec)));
  double start_y = spec.start_position.y();
  double goal_y = spec.goal_position.y();
  double xmin = 1.5 * spec.cell_size;
  double xmax = (spec.cols - 1.5) * spec.cell_size;

  std::vector<CollectedTrajectory> kept;
  kept.reserve(options.trajectory_count);
  long attempts = 0, discards = 0;
  while (static_cast<int>(kept.size()) < options.trajectory_count) {
    ++attempts;
    double u = rng.uniform();
    int route = u < mix.left ? left_idx : (u < mix.left + mix.middle ? middle_idx : right_idx);
    double cx = corridors[route];

    std::vector<Eigen::Vector2d> wps;
    if (rng.uniform() < options.detour_prob) {
      double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      double dx = std::clamp(cx + side * 2.0 * spec.cell_size, xmin, xmax);
      if (std::abs(dx - cx) > 0.5 * spec.cell_size)
        wps.push_back({dx, start_y});
    }
    wps.push_back({cx, start_y});
    wps.push_back({cx, goal_y});
    wps.push_back(spec.goal_position);

    double cap = rng.uniform(options.speed_cap_lo, options.speed_cap_hi);
    Rollout r = run_waypoints(spec, wps, cap, options.action_noise, options.kp, options.kv,
                              options.advance_radius, rng, /*jitter=*/true);
    int len = static_cast<int>(r.transitions.size());
    if (!r.success || len < floor_steps || len > spec.max_episode_steps) {
      ++discards;
      if (attempts >= 50 && 2 * discards > attempts)
        throw std::runtime_error("collector discard rate above 50%: controller/maze mismatch");
      continue;
    }
    CollectedTrajectory traj;
    traj.transitions = std::move(r.transitions);
    traj.route = route;
    kept.push_back(std::move(traj));
  }
  if (2 * discards > attempts)
    throw std::runtime_error("collector discard rate above 50%: controller/maze mismatch");
  return kept;
}

int classify_route(const MazeSpec& spec, const std::vector<Transition>& transitions) {
  std::vector<double> corridors = corridor_centers(spec);
  if (corridors.empty()) return -1;
  double start_y = spec.start_position.y();
  double goal_y = spec.goal_position.y();
  double mid = 0.5 * (start_y + goal_y);
  bool upward = goal_y > start_y;
  for (const auto& t : transitions) {
    double y = t.next_state[1];
    if (upward ? y > mid : y < mid) {
      double x = t.next_state[0];
      int best = 0;
      for (int i = 1; i < static_cast<int>(corridors.size()); ++i)
        if (std::abs(x - corridors[i]) < std::abs(x - corridors[best])) best = i;
      return best;
    }
  }
  return -1;
}

OfflineDataset to_dataset(const std::vector<CollectedTrajectory>& trajectories) {
  OfflineDataset d;
  d.obs_dim = 4;
  d.act_dim = 2;
  for (const auto& traj : trajectories) {
    d.boundaries.push_back(d.transitions.size());
    d.transitions.insert(d.transitions.end(), traj.transitions.begin(),
                         traj.transitions.end());
  }
  quantize_dataset(d);
  d.validate();
  return d;
}

}  // namespace adac
