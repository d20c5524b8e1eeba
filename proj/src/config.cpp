#include "mdt/config.hpp"

#include <fstream>
#include <sstream>

namespace mdt {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  return i;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

}  // namespace

KeyValues parse_config_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

KeyValues load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_config(const KeyValues& kv, PretrainConfig& pc, NetworkChoice& net) {
  for (const auto& [key, v] : kv) {
    if (key == "frames_per_iter") pc.frames_per_iter = to_int(key, v);
    else if (key == "pos_per_frame") pc.pos_per_frame = to_int(key, v);
    else if (key == "neg_per_frame") pc.neg_per_frame = to_int(key, v);
    else if (key == "pos_iou") pc.pos_iou = to_double(key, v);
    else if (key == "neg_iou") pc.neg_iou = to_double(key, v);
    else if (key == "accumulate_every") pc.accumulate_every = to_int(key, v);
    else if (key == "inst_domains") pc.inst_domains = to_int(key, v);
    else if (key == "alpha") pc.alpha = to_double(key, v);
    else if (key == "epochs") pc.epochs = to_int(key, v);
    else if (key == "max_iterations") pc.max_iterations = to_int(key, v);
    else if (key == "lr") pc.lr = to_double(key, v);
    else if (key == "momentum") pc.momentum = to_double(key, v);
    else if (key == "weight_decay") pc.weight_decay = to_double(key, v);
    else if (key == "checkpoint_every_flushes") pc.checkpoint_every_flushes = to_int(key, v);
    else if (key == "input_side") pc.input_side = to_int(key, v);
    else if (key == "variant") {
      if (v == "original") net.variant = BackboneVariant::Original;
      else if (v == "dense") net.variant = BackboneVariant::DenseFM;
      else throw ConfigError("config key 'variant': expected original|dense, got '" + v + "'");
    } else if (key == "mode") {
      if (v == "pool") net.mode = ExtractMode::RoIPooling;
      else if (v == "align") net.mode = ExtractMode::RoIAlign;
      else if (v == "adaptive") net.mode = ExtractMode::AdaptiveRoIAlign;
      else throw ConfigError("config key 'mode': expected pool|align|adaptive, got '" + v + "'");
    } else if (key == "preset") {
      if (v == "toy") net.full_channels = false;
      else if (v == "full") net.full_channels = true;
      else throw ConfigError("config key 'preset': expected toy|full, got '" + v + "'");
    } else if (key == "samples_per_cell") net.samples_per_cell = to_int(key, v);
    else throw ConfigError("unknown pretrain config key: '" + key + "'");
  }
}

void apply_config(const KeyValues& kv, TrackerConfig& tc) {
  for (const auto& [key, v] : kv) {
    if (key == "n_candidates") tc.n_candidates = to_int(key, v);
    else if (key == "trans_std") tc.trans_std = to_double(key, v);
    else if (key == "scale_step") tc.scale_step = to_double(key, v);
    else if (key == "scale_min") tc.scale_min = to_double(key, v);
    else if (key == "scale_max") tc.scale_max = to_double(key, v);
    else if (key == "success_threshold") tc.success_threshold = to_double(key, v);
    else if (key == "init_pos") tc.init_pos = to_int(key, v);
    else if (key == "init_neg") tc.init_neg = to_int(key, v);
    else if (key == "init_pos_iou") tc.init_pos_iou = to_double(key, v);
    else if (key == "init_neg_iou") tc.init_neg_iou = to_double(key, v);
    else if (key == "update_pos") tc.update_pos = to_int(key, v);
    else if (key == "update_neg") tc.update_neg = to_int(key, v);
    else if (key == "update_pos_iou") tc.update_pos_iou = to_double(key, v);
    else if (key == "update_neg_iou") tc.update_neg_iou = to_double(key, v);
    else if (key == "mining_pool") tc.mining_pool = to_int(key, v);
    else if (key == "mining_keep") tc.mining_keep = to_int(key, v);
    else if (key == "batch_pos") tc.batch_pos = to_int(key, v);
    else if (key == "long_interval") tc.long_interval = to_int(key, v);
    else if (key == "t_long") tc.t_long = to_int(key, v);
    else if (key == "t_short") tc.t_short = to_int(key, v);
    else if (key == "init_iters") tc.init_iters = to_int(key, v);
    else if (key == "update_iters") tc.update_iters = to_int(key, v);
    else if (key == "lr") tc.lr = to_double(key, v);
    else if (key == "branch_lr_scale") tc.branch_lr_scale = to_double(key, v);
    else if (key == "momentum") tc.momentum = to_double(key, v);
    else if (key == "weight_decay") tc.weight_decay = to_double(key, v);
    else if (key == "use_bbox_regressor") tc.use_bbox_regressor = to_bool(key, v);
    else if (key == "top5_average") tc.top5_average = to_bool(key, v);
    else if (key == "input_side") tc.input_side = to_int(key, v);
    else if (key == "regressor_lambda") tc.regressor_lambda = to_double(key, v);
    else if (key == "regressor_iou") tc.regressor_iou = to_double(key, v);
    else if (key == "regressor_min_pairs") tc.regressor_min_pairs = to_int(key, v);
    else throw ConfigError("unknown tracker config key: '" + key + "'");
  }
}

}  // namespace mdt
