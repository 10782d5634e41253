#include "adac/config.hpp"

#include <cerrno>
#include <cinttypes>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <vector>

namespace adac {
namespace {

using Member = std::variant<int RunConfig::*, std::uint64_t RunConfig::*, double RunConfig::*,
                            bool RunConfig::*, std::string RunConfig::*>;

struct FieldDef {
  std::string_view key;  // "section.name"
  Member member;
};

// Declaration order fixes the canonical serialization order.
const std::vector<FieldDef>& field_table() {
  static const std::vector<FieldDef> table = {
      {"run.seed", &RunConfig::seed},
      {"run.out", &RunConfig::out},
      {"data.layout", &RunConfig::layout},
      {"data.trajectories", &RunConfig::trajectories},
      {"data.route_left", &RunConfig::route_left},
      {"data.route_middle", &RunConfig::route_middle},
      {"data.route_right", &RunConfig::route_right},
      {"data.speed_cap_lo", &RunConfig::speed_cap_lo},
      {"data.speed_cap_hi", &RunConfig::speed_cap_hi},
      {"data.action_noise", &RunConfig::action_noise},
      {"data.detour_prob", &RunConfig::detour_prob},
      {"data.normalize", &RunConfig::normalize},
      {"data.export_ldjson", &RunConfig::export_ldjson},
      {"pretrain.behavior_steps", &RunConfig::behavior_steps},
      {"pretrain.value_steps", &RunConfig::value_steps},
      {"pretrain.transition_steps", &RunConfig::transition_steps},
      {"pretrain.batch_size", &RunConfig::pretrain_batch_size},
      {"pretrain.learning_rate", &RunConfig::pretrain_lr},
      {"pretrain.gamma", &RunConfig::pretrain_gamma},
      {"pretrain.tau", &RunConfig::value_tau},
      {"pretrain.diffusion_steps", &RunConfig::diffusion_steps},
      {"pretrain.embed_dim", &RunConfig::embed_dim},
      {"pretrain.hidden", &RunConfig::pretrain_hidden},
      {"advantage.kappa", &RunConfig::kappa},
      {"advantage.sample_count", &RunConfig::sample_count},
      {"advantage.lambda_pos", &RunConfig::lambda_pos},
      {"advantage.lambda_neg", &RunConfig::lambda_neg},
      {"train.gamma", &RunConfig::gamma},
      {"train.alpha", &RunConfig::alpha},
      {"train.backup_count", &RunConfig::backup_count},
      {"train.max_q_backup", &RunConfig::max_q_backup},
      {"train.use_advantage", &RunConfig::use_advantage},
      {"train.eval_candidates", &RunConfig::eval_candidates},
      {"train.eval_temperature", &RunConfig::eval_temperature},
      {"train.critic_lr", &RunConfig::critic_lr},
      {"train.actor_lr", &RunConfig::actor_lr},
      {"train.target_rate", &RunConfig::target_rate},
      {"train.batch_size", &RunConfig::batch_size},
      {"train.total_steps", &RunConfig::total_steps},
      {"train.eval_interval", &RunConfig::eval_interval},
      {"train.eval_episodes", &RunConfig::eval_episodes},
      {"train.final_eval_episodes", &RunConfig::final_eval_episodes},
      {"train.hidden", &RunConfig::hidden},
      {"eval.episodes", &RunConfig::episodes},
      {"eval.export_trajectories", &RunConfig::export_trajectories},
      {"verify.trials", &RunConfig::trials},
  };
  return table;
}

const char* kSections[] = {"run", "data", "pretrain", "advantage", "train", "eval", "verify"};

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string format_value(const RunConfig& c, const Member& m) {
  return std::visit(
      [&c](auto ptr) -> std::string {
        const auto& v = c.*ptr;
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, int>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, std::uint64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_double(v);
        else return v;
      },
      m);
}

[[noreturn]] void value_error(const std::string& key, int line, const char* want,
                              const std::string& got) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": key '" + key +
                              "' expects " + want + ", got '" + got + "'");
}

void assign(RunConfig& c, const Member& m, const std::string& value, const std::string& key,
            int line) {
  std::visit(
      [&](auto ptr) {
        auto& target = c.*ptr;
        using T = std::decay_t<decltype(target)>;
        if constexpr (std::is_same_v<T, std::string>) {
          if (value.empty()) value_error(key, line, "a non-empty string", value);
          target = value;
        } else if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") target = true;
          else if (value == "false" || value == "0") target = false;
          else value_error(key, line, "true or false", value);
        } else {
          const char* begin = value.c_str();
          char* end = nullptr;
          errno = 0;
          if constexpr (std::is_same_v<T, int>) {
            long parsed = std::strtol(begin, &end, 10);
            if (end == begin || *end != '\0' || errno == ERANGE || parsed < INT_MIN ||
                parsed > INT_MAX)
              value_error(key, line, "an integer", value);
            target = static_cast<int>(parsed);
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (value[0] == '-') value_error(key, line, "an unsigned integer", value);
            std::uint64_t parsed = std::strtoull(begin, &end, 10);
            if (end == begin || *end != '\0' || errno == ERANGE)
              value_error(key, line, "an unsigned integer", value);
            target = parsed;
          } else {
            double parsed = std::strtod(begin, &end);
            if (end == begin || *end != '\0' || errno == ERANGE)
              value_error(key, line, "a number", value);
            target = parsed;
          }
        }
      },
      m);
}

std::string hash_id(std::string_view prefix, std::string_view text) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(text));
  return std::string(prefix) + "-" + buf;
}

std::string seed_line(const RunConfig& c) { return "seed=" + std::to_string(c.seed) + "\n"; }

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const char* s : kSections) known = known || section == s;
      if (!known)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": unknown section '[" + section + "]'");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
    std::string name = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": key '" + name +
                                  "' appears before any [section]");
    std::string key = section + "." + name;
    const FieldDef* found = nullptr;
    for (const FieldDef& f : field_table())
      if (f.key == key) {
        found = &f;
        break;
      }
    if (!found)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown config key '" + key + "'");
    assign(cfg, found->member, value, key, line_no);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_text(const RunConfig& config) {
  std::string out;
  std::string_view current;
  for (const FieldDef& f : field_table()) {
    std::string_view section = f.key.substr(0, f.key.find('.'));
    if (section != current) {
      if (!out.empty()) out += "\n";
      out += "[";
      out += section;
      out += "]\n";
      current = section;
    }
    out += f.key.substr(f.key.find('.') + 1);
    out += " = ";
    out += format_value(config, f.member);
    out += "\n";
  }
  return out;
}

std::string section_text(const RunConfig& config, std::string_view section) {
  std::string out = "[" + std::string(section) + "]\n";
  bool any = false;
  for (const FieldDef& f : field_table()) {
    if (f.key.substr(0, f.key.find('.')) != section) continue;
    any = true;
    out += f.key.substr(f.key.find('.') + 1);
    out += " = ";
    out += format_value(config, f.member);
    out += "\n";
  }
  if (!any) throw std::invalid_argument("unknown config section '" + std::string(section) + "'");
  return out;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string data_run_id(const RunConfig& c) {
  return hash_id("data", seed_line(c) + section_text(c, "data"));
}

std::string pretrain_run_id(const RunConfig& c) {
  return hash_id("pretrain", data_run_id(c) + "\n" + section_text(c, "pretrain"));
}

std::string train_run_id(const RunConfig& c) {
  return hash_id("train",
                 pretrain_run_id(c) + "\n" + section_text(c, "advantage") + section_text(c, "train"));
}

std::string eval_run_id(const RunConfig& c) {
  return hash_id("eval", train_run_id(c) + "\n" + section_text(c, "eval"));
}

std::string verify_run_id(const RunConfig& c) {
  return hash_id("verify", seed_line(c) + section_text(c, "verify"));
}

std::string advantage_stats_run_id(const RunConfig& c) {
  return hash_id("stats-adv", pretrain_run_id(c) + "\n" + section_text(c, "advantage"));
}

CollectOptions RunConfig::collect_options() const {
  CollectOptions o;
  o.route_mix = RouteMix{route_left, route_middle, route_right};
  o.trajectory_count = trajectories;
  o.speed_cap_lo = speed_cap_lo;
  o.speed_cap_hi = speed_cap_hi;
  o.action_noise = action_noise;
  o.detour_prob = detour_prob;
  return o;
}

PretrainConfig RunConfig::pretrain_config() const {
  PretrainConfig p;
  p.behavior_steps = behavior_steps;
  p.value_steps = value_steps;
  p.transition_steps = transition_steps;
  p.batch_size = pretrain_batch_size;
  p.learning_rate = pretrain_lr;
  p.gamma = pretrain_gamma;
  p.tau = value_tau;
  p.diffusion_steps = diffusion_steps;
  p.embed_dim = embed_dim;
  p.hidden = pretrain_hidden;
  return p;
}

AdvantageConfig RunConfig::advantage_config() const {
  AdvantageConfig a;
  a.kappa = kappa;
  a.sample_count = sample_count;
  a.lambda_pos = lambda_pos;
  a.lambda_neg = lambda_neg;
  return a;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.gamma = gamma;
  t.alpha = alpha;
  t.backup_count = backup_count;
  t.use_max_q_backup = max_q_backup;
  t.use_advantage = use_advantage;
  t.eval_candidates = eval_candidates;
  t.eval_softmax_temperature = eval_temperature;
  t.critic_lr = critic_lr;
  t.actor_lr = actor_lr;
  t.target_rate = target_rate;
  t.batch_size = batch_size;
  t.total_steps = total_steps;
  t.eval_interval = eval_interval;
  t.eval_episodes = eval_episodes;
  t.final_eval_episodes = final_eval_episodes;
  t.hidden = hidden;
  t.seed = seed;
  return t;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (layout.empty()) fail("data.layout must name a maze");
  if (trajectories <= 0) fail("data.trajectories must be positive");
  if (route_left < 0 || route_middle < 0 || route_right < 0)
    fail("route shares must be non-negative");
  if (std::abs(route_left + route_middle + route_right - 1.0) > 1e-9)
    fail("route shares must sum to 1");
  if (!(speed_cap_lo > 0) || speed_cap_hi < speed_cap_lo)
    fail("speed caps need 0 < speed_cap_lo <= speed_cap_hi");
  if (action_noise < 0) fail("data.action_noise must be non-negative");
  if (detour_prob < 0 || detour_prob > 1) fail("data.detour_prob must lie in [0,1]");
  if (behavior_steps < 0 || value_steps < 0 || transition_steps < 0)
    fail("pretrain step counts must be non-negative");
  if (pretrain_batch_size <= 0) fail("pretrain.batch_size must be positive");
  if (!(pretrain_lr > 0)) fail("pretrain.learning_rate must be positive");
  if (!(pretrain_gamma > 0 && pretrain_gamma < 1)) fail("pretrain.gamma must lie in (0,1)");
  if (!(value_tau > 0 && value_tau < 1)) fail("pretrain.tau must lie in (0,1)");
  if (diffusion_steps < 1) fail("pretrain.diffusion_steps must be at least 1");
  if (embed_dim < 2 || embed_dim % 2 != 0) fail("pretrain.embed_dim must be even and >= 2");
  if (pretrain_hidden < 1) fail("pretrain.hidden must be positive");
  advantage_config().validate();
  train_config().validate();
  if (episodes < 0) fail("eval.episodes must be non-negative");
  if (trials < 0) fail("verify.trials must be non-negative");
}

}  // namespace adac
