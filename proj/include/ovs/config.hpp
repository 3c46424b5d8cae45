#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ovs/expand.hpp"
#include "ovs/synth.hpp"

namespace ovs {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct Config {
  // affinity / propagation
  AffinityParams affinity;
  PropagationParams propagation;
  // expand
  int pad = 80;
  int grid_size = 16;
  int max_keypoints = 1000;
  int iterations = 10;
  uint64_t seed = 0;
  // stabilize
  int window = 31;
  std::string fill = "nearest";
  // synth
  JitterSpec jitter;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text, int line_no) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !(in >> std::ws).eof())
    throw ConfigError("line " + std::to_string(line_no) + ": invalid number '" + text + "'");
  return value;
}

inline void apply_key(Config& cfg, const std::string& key, const std::string& value,
                      int line_no) {
  auto d = [&] { return parse_number<double>(value, line_no); };
  auto i = [&] { return parse_number<int>(value, line_no); };
  auto u = [&] { return parse_number<uint64_t>(value, line_no); };

  if (key == "affinity.radius") cfg.affinity.radius = i();
  else if (key == "affinity.sigma_color") cfg.affinity.sigma_color = d();
  else if (key == "affinity.sigma_edge") cfg.affinity.sigma_edge = d();
  else if (key == "propagation.lambda_cap") cfg.affinity.lambda_cap = d();
  else if (key == "propagation.max_sweeps") cfg.propagation.max_sweeps = i();
  else if (key == "propagation.tolerance_px") cfg.propagation.tolerance_px = d();
  else if (key == "propagation.anchor_ratio") cfg.propagation.anchor_ratio = d();
  else if (key == "expand.pad") cfg.pad = i();
  else if (key == "expand.grid_size") cfg.grid_size = i();
  else if (key == "expand.max_keypoints") cfg.max_keypoints = i();
  else if (key == "expand.iterations") cfg.iterations = i();
  else if (key == "expand.seed") cfg.seed = u();
  else if (key == "stabilize.window") cfg.window = i();
  else if (key == "stabilize.fill") {
    if (value != "none" && value != "nearest")
      throw ConfigError("line " + std::to_string(line_no) + ": fill must be none|nearest");
    cfg.fill = value;
  } else if (key == "synth.n_frames") cfg.jitter.n_frames = i();
  else if (key == "synth.smooth_amplitude") cfg.jitter.smooth_amplitude = d();
  else if (key == "synth.smooth_period") cfg.jitter.smooth_period = d();
  else if (key == "synth.jitter_sigma") cfg.jitter.jitter_sigma = d();
  else if (key == "synth.rotation_sigma") cfg.jitter.rotation_sigma = d();
  else if (key == "synth.seed") cfg.jitter.seed = u();
  else
    throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
}

}  // namespace detail

// key = value lines grouped under [section] headers; '#' starts a comment.
// Unknown keys are errors so typos cannot silently fall back to defaults.
inline Config parse_config(std::istream& in, Config cfg = {}) {
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    detail::apply_key(cfg, key, value, line_no);
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

inline ExpandParams expand_params_from(const Config& cfg) {
  ExpandParams p;
  p.pad = cfg.pad;
  p.grid_size = cfg.grid_size;
  p.max_keypoints = cfg.max_keypoints;
  p.affinity = cfg.affinity;
  p.propagation = cfg.propagation;
  p.seed = cfg.seed;
  return p;
}

inline std::string dump_config(const Config& cfg) {
  std::ostringstream out;
  out << "[affinity]\n"
      << "radius = " << cfg.affinity.radius << "\n"
      << "sigma_color = " << cfg.affinity.sigma_color << "\n"
      << "sigma_edge = " << cfg.affinity.sigma_edge << "\n"
      << "[propagation]\n"
      << "lambda_cap = " << cfg.affinity.lambda_cap << "\n"
      << "max_sweeps = " << cfg.propagation.max_sweeps << "\n"
      << "tolerance_px = " << cfg.propagation.tolerance_px << "\n"
      << "anchor_ratio = " << cfg.propagation.anchor_ratio << "\n"
      << "[expand]\n"
      << "pad = " << cfg.pad << "\n"
      << "grid_size = " << cfg.grid_size << "\n"
      << "max_keypoints = " << cfg.max_keypoints << "\n"
      << "iterations = " << cfg.iterations << "\n"
      << "seed = " << cfg.seed << "\n"
      << "[stabilize]\n"
      << "window = " << cfg.window << "\n"
      << "fill = " << cfg.fill << "\n"
      << "[synth]\n"
      << "n_frames = " << cfg.jitter.n_frames << "\n"
      << "smooth_amplitude = " << cfg.jitter.smooth_amplitude << "\n"
      << "smooth_period = " << cfg.jitter.smooth_period << "\n"
      << "jitter_sigma = " << cfg.jitter.jitter_sigma << "\n"
      << "rotation_sigma = " << cfg.jitter.rotation_sigma << "\n"
      << "seed = " << cfg.jitter.seed << "\n";
  return out.str();
}

}  // namespace ovs
