#include "lapsr/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lapsr {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected unsigned integer, got '" +
                                v + "'");
  }
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.values[key] = value;
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_text(text.str(), path.string());
}

void apply_config(const KvConfig& kv, LapSRNConfig& mc, TrainConfig& tc) {
  for (const auto& [key, v] : kv.values) {
    if (key == "scale") mc.scale = parse_int(key, v);
    else if (key == "levels") {
      // Derived from scale; accepted for completeness, checked for consistency.
      const int levels = parse_int(key, v);
      if (mc.use_pyramid && (1 << levels) != mc.scale)
        throw std::invalid_argument("config key 'levels': " + v + " inconsistent with scale " +
                                    std::to_string(mc.scale));
    }
    else if (key == "depth_d") mc.depth_d = parse_int(key, v);
    else if (key == "channels") mc.channels = parse_int(key, v);
    else if (key == "lrelu_slope") mc.lrelu_slope = parse_double(key, v);
    else if (key == "use_pyramid") mc.use_pyramid = parse_bool(key, v);
    else if (key == "use_residual") mc.use_residual = parse_bool(key, v);
    else if (key == "loss_kind") mc.loss_kind = loss_kind_from_name(v);
    else if (key == "charbonnier_eps") mc.charbonnier_eps = parse_double(key, v);
    else if (key == "lr_init") tc.lr_init = parse_double(key, v);
    else if (key == "lr_gamma") tc.lr_gamma = parse_double(key, v);
    else if (key == "lr_step_epochs") tc.lr_step_epochs = parse_int(key, v);
    else if (key == "momentum") tc.momentum = parse_double(key, v);
    else if (key == "weight_decay") tc.weight_decay = parse_double(key, v);
    else if (key == "iters_per_epoch") tc.iters_per_epoch = parse_int(key, v);
    else if (key == "batch_n") tc.batch_n = parse_int(key, v);
    else if (key == "lr_floor") tc.lr_floor = parse_double(key, v);
    else if (key == "seed") tc.seed = parse_u64(key, v);
    else if (key == "max_epochs") tc.max_epochs = parse_int(key, v);
    else if (key == "patch") tc.patch = parse_int(key, v);
    else if (key == "grad_clip") tc.grad_clip = parse_double(key, v);
    else if (key == "loss_sum_reduction") tc.loss_sum_reduction = parse_bool(key, v);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

}  // namespace lapsr
