// Flat key=value config files: '#' comments, blank lines ignored, later keys
// override earlier ones. Appliers reject unknown keys so typos surface.
#pragma once

#include <map>
#include <string>

#include "mdt/pretrain.hpp"
#include "mdt/tracker.hpp"

namespace mdt {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config_text(const std::string& text);
KeyValues load_config(const std::string& path);

/// Network construction switches read from a config: variant (original|dense),
/// mode (pool|align|adaptive), preset (toy|full), samples_per_cell.
struct NetworkChoice {
  BackboneVariant variant = BackboneVariant::DenseFM;
  ExtractMode mode = ExtractMode::AdaptiveRoIAlign;
  bool full_channels = false;
  int samples_per_cell = 1;

  NetworkConfig network(int domains) const {
    NetworkConfig c = full_channels ? NetworkConfig::full(variant, domains, mode)
                                    : NetworkConfig::toy(variant, domains, mode);
    c.extract.samples_per_cell = samples_per_cell;
    return c;
  }
};

/// Each applier consumes the keys it understands and throws ConfigError on
/// anything it does not.
void apply_config(const KeyValues& kv, PretrainConfig& pc, NetworkChoice& net);
void apply_config(const KeyValues& kv, TrackerConfig& tc);

}  // namespace mdt
