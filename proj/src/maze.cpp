#include "adac/maze.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adac {

namespace {

struct Cell {
  int row, col;
};

// BFS parent map from start cell; returns flat parent indices, -1 unvisited.
std::vector<int> bfs_parents(const MazeSpec& spec, Cell from) {
  std::vector<int> parent(static_cast<std::size_t>(spec.rows) * spec.cols, -1);
  auto id = [&](int r, int c) { return r * spec.cols + c; };
  std::deque<Cell> queue{from};
  parent[id(from.row, from.col)] = id(from.row, from.col);
  const int dr[4] = {1, -1, 0, 0};
  const int dc[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    Cell cur = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      int r = cur.row + dr[k], c = cur.col + dc[k];
      if (spec.wall_cell(r, c) || parent[id(r, c)] != -1) continue;
      parent[id(r, c)] = id(cur.row, cur.col);
      queue.push_back({r, c});
    }
  }
  return parent;
}

}  // namespace

MazeSpec parse_maze(const std::string& grid_text) {
  std::vector<std::string> lines;
  std::stringstream in(grid_text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() < 3) throw std::invalid_argument("maze grid needs at least 3 rows");

  MazeSpec spec;
  spec.rows = static_cast<int>(lines.size());
  spec.cols = static_cast<int>(lines[0].size());
  spec.walls.assign(static_cast<std::size_t>(spec.rows) * spec.cols, 0);
  int starts = 0, goals = 0;
  Cell start{-1, -1}, goal{-1, -1};
  for (int r = 0; r < spec.rows; ++r) {
    if (static_cast<int>(lines[r].size()) != spec.cols)
      throw std::invalid_argument("maze grid is not rectangular (row " + std::to_string(r) +
                                  ")");
    for (int c = 0; c < spec.cols; ++c) {
      char ch = lines[r][c];
      switch (ch) {
        case '#':
          spec.walls[static_cast<std::size_t>(r) * spec.cols + c] = 1;
          break;
        case '.':
          break;
        case 'S':
          ++starts;
          start = {r, c};
          break;
        case 'G':
          ++goals;
          goal = {r, c};
          break;
        default:
          throw std::invalid_argument(std::string("maze grid has invalid character '") + ch +
                                      "'");
      }
    }
  }
  if (starts != 1) throw std::invalid_argument("maze grid must contain exactly one 'S'");
  if (goals != 1) throw std::invalid_argument("maze grid must contain exactly one 'G'");
  for (int r = 0; r < spec.rows; ++r)
    if (!spec.wall_cell(r, 0) || !spec.wall_cell(r, spec.cols - 1))
      throw std::invalid_argument("maze border must be walls");
  for (int c = 0; c < spec.cols; ++c)
    if (!spec.wall_cell(0, c) || !spec.wall_cell(spec.rows - 1, c))
      throw std::invalid_argument("maze border must be walls");

  spec.start_position = spec.cell_center(start.row, start.col);
  spec.goal_position = spec.cell_center(goal.row, goal.col);

  auto parents = bfs_parents(spec, start);
  if (parents[static_cast<std::size_t>(goal.row) * spec.cols + goal.col] == -1)
    throw std::invalid_argument("maze goal is unreachable from start");
  return spec;
}

MazeSpec load_maze_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open maze file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_maze(buf.str());
}

std::string maze_to_text(const MazeSpec& spec) {
  std::string out;
  int srow = spec.cell_row(spec.start_position.y());
  int scol = spec.cell_col(spec.start_position.x());
  int grow = spec.cell_row(spec.goal_position.y());
  int gcol = spec.cell_col(spec.goal_position.x());
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      if (r == srow && c == scol)
        out += 'S';
      else if (r == grow && c == gcol)
        out += 'G';
      else
        out += spec.wall_cell(r, c) ? '#' : '.';
    }
    out += '\n';
  }
  return out;
}

const char* desk_maze_text() {
  return
      "#########\n"
      "#...G...#\n"
      "#.##.##.#\n"
      "#.##.##.#\n"
      "#.##.##.#\n"
      "#.##.##.#\n"
      "#.##.##.#\n"
      "#...S...#\n"
      "#########\n";
}

const char* paper_maze_text() {
  static const std::string text = [] {
    std::string s = "#############\n#.....G.....#\n";
    for (int i = 0; i < 20; ++i) s += "#.####.####.#\n";
    s += "#.....S.....#\n#############\n";
    return s;
  }();
  return text.c_str();
}

MazeSpec make_maze(const std::string& layout) {
  if (layout == "desk") return parse_maze(desk_maze_text());
  if (layout == "paper") return parse_maze(paper_maze_text());
  return load_maze_file(layout);
}

MazeState maze_reset(const MazeSpec& spec, Rng& rng, bool jitter) {
  MazeState s;
  s.position = spec.start_position;
  if (jitter) {
    double radius = 0.05 * spec.cell_size;
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::Vector2d p = spec.start_position +
                          Eigen::Vector2d(rng.uniform(-radius, radius),
                                          rng.uniform(-radius, radius));
      if (!spec.wall_at(p.x(), p.y())) {
        s.position = p;
        break;
      }
    }
  }
  s.velocity.setZero();
  s.step_index = 0;
  return s;
}

MazeStepOut maze_step(const MazeSpec& spec, const MazeState& state, Eigen::Vector2d action) {
  action = action.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);
  Eigen::Vector2d v =
      (1.0 - spec.damping * spec.dt) * state.velocity + action * spec.dt;
  Eigen::Vector2d p = state.position;
  // Axis-separated collision: a blocked axis keeps its old coordinate and
  // loses that velocity component. x resolves first, y sees the updated x.
  double nx = p.x() + v.x() * spec.dt;
  if (spec.wall_at(nx, p.y())) {
    nx = p.x();
    v.x() = 0.0;
  }
  double ny = p.y() + v.y() * spec.dt;
  if (spec.wall_at(nx, ny)) {
    ny = p.y();
    v.y() = 0.0;
  }
  MazeStepOut out;
  out.state.position = {nx, ny};
  out.state.velocity = v;
  out.state.step_index = state.step_index + 1;
  bool at_goal = (out.state.position - spec.goal_position).norm() <= spec.goal_radius;
  out.reward = at_goal ? 1.0 : 0.0;
  out.done = at_goal || out.state.step_index >= spec.max_episode_steps;
  return out;
}

std::vector<Eigen::Vector2d> shortest_cell_path(const MazeSpec& spec) {
  Cell start{spec.cell_row(spec.start_position.y()), spec.cell_col(spec.start_position.x())};
  Cell goal{spec.cell_row(spec.goal_position.y()), spec.cell_col(spec.goal_position.x())};
  auto parents = bfs_parents(spec, start);
  auto id = [&](const Cell& c) { return c.row * spec.cols + c.col; };
  if (parents[id(goal)] == -1) throw std::runtime_error("goal unreachable");
  std::vector<Eigen::Vector2d> path;
  int cur = id(goal);
  while (true) {
    path.push_back(spec.cell_center(cur / spec.cols, cur % spec.cols));
    if (parents[cur] == cur) break;
    cur = parents[cur];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

int corridor_count(const MazeSpec& spec) { return static_cast<int>(corridor_centers(spec).size()); }

std::vector<double> corridor_centers(const MazeSpec& spec) {
  int srow = spec.cell_row(spec.start_position.y());
  int grow = spec.cell_row(spec.goal_position.y());
  int top = std::min(srow, grow) + 1;
  int bottom = std::max(srow, grow) - 1;
  std::vector<double> centers;
  if (top > bottom) return centers;

  // Connected components of free cells within the band; a corridor is a
  // component reaching free cells both above and below the band.
  std::vector<int> comp(static_cast<std::size_t>(spec.rows) * spec.cols, -1);
  auto id = [&](int r, int c) { return r * spec.cols + c; };
  int next = 0;
  for (int r0 = top; r0 <= bottom; ++r0) {
    for (int c0 = 0; c0 < spec.cols; ++c0) {
      if (spec.wall_cell(r0, c0) || comp[id(r0, c0)] != -1) continue;
      int label = next++;
      bool touches_top = false, touches_bottom = false;
      double xsum = 0.0;
      int count = 0;
      std::deque<Cell> queue{{r0, c0}};
      comp[id(r0, c0)] = label;
      while (!queue.empty()) {
        Cell cur = queue.front();
        queue.pop_front();
        xsum += spec.cell_center(cur.row, cur.col).x();
        ++count;
        if (cur.row == top && !spec.wall_cell(top - 1, cur.col)) touches_top = true;
        if (cur.row == bottom && !spec.wall_cell(bottom + 1, cur.col)) touches_bottom = true;
        const int dr[4] = {1, -1, 0, 0};
        const int dc[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          int r = cur.row + dr[k], c = cur.col + dc[k];
          if (r < top || r > bottom || spec.wall_cell(r, c) || comp[id(r, c)] != -1) continue;
          comp[id(r, c)] = label;
          queue.push_back({r, c});
        }
      }
      if (touches_top && touches_bottom) centers.push_back(xsum / count);
    }
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

}  // namespace adac
