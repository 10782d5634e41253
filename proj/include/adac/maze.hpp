#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "adac/rng.hpp"

namespace adac {

// Grid world geometry plus point-mass physics constants. World coordinates
// put the origin at the bottom-left corner of the grid with y pointing up;
// grid row 0 is the top text row.
struct MazeSpec {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> walls;  // row-major, 1 = wall
  double cell_size = 1.0;
  Eigen::Vector2d start_position{0.0, 0.0};
  Eigen::Vector2d goal_position{0.0, 0.0};
  double goal_radius = 0.4;
  double dt = 0.1;
  double damping = 0.5;
  double max_force = 1.0;
  int max_episode_steps = 500;

  bool wall_cell(int row, int col) const {
    if (row < 0 || row >= rows || col < 0 || col >= cols) return true;
    return walls[static_cast<std::size_t>(row) * cols + col] != 0;
  }
  bool wall_at(double x, double y) const {
    int col = static_cast<int>(std::floor(x / cell_size));
    int row = rows - 1 - static_cast<int>(std::floor(y / cell_size));
    return wall_cell(row, col);
  }
  Eigen::Vector2d cell_center(int row, int col) const {
    return {(col + 0.5) * cell_size, (rows - 1 - row + 0.5) * cell_size};
  }
  int cell_row(double y) const { return rows - 1 - static_cast<int>(std::floor(y / cell_size)); }
  int cell_col(double x) const { return static_cast<int>(std::floor(x / cell_size)); }
};

struct MazeState {
  Eigen::Vector2d position{0.0, 0.0};
  Eigen::Vector2d velocity{0.0, 0.0};
  int step_index = 0;
};

struct MazeStepOut {
  MazeState state;
  double reward = 0.0;
  bool done = false;
};

// Parses '#' wall, '.' free, 'S' start, 'G' goal. Requires a rectangular
// grid, walled border, exactly one start and goal, and goal reachability.
MazeSpec parse_maze(const std::string& grid_text);
MazeSpec load_maze_file(const std::string& path);
std::string maze_to_text(const MazeSpec& spec);

// Built-in layouts. "desk" is the small three-corridor default; "paper"
// is a larger three-corridor maze on the scale of the reference experiment.
const char* desk_maze_text();
const char* paper_maze_text();
MazeSpec make_maze(const std::string& layout);  // "desk", "paper", or a file path

MazeState maze_reset(const MazeSpec& spec, Rng& rng, bool jitter = true);
MazeStepOut maze_step(const MazeSpec& spec, const MazeState& state,
                      Eigen::Vector2d action);

inline Eigen::Vector4d observe(const MazeState& s) {
  return {s.position.x(), s.position.y(), s.velocity.x(), s.velocity.y()};
}

// Shortest start-to-goal cell path (4-connected BFS), as world waypoints.
std::vector<Eigen::Vector2d> shortest_cell_path(const MazeSpec& spec);

// Number of distinct vertical corridors through the obstacle band between
// the goal row and the start row (connected components spanning the band).
int corridor_count(const MazeSpec& spec);

// World x-coordinates of the corridor centers, left to right.
std::vector<double> corridor_centers(const MazeSpec& spec);

}  // namespace adac
