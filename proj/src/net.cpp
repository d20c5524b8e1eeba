#include "mdt/net.hpp"

#include <map>

namespace mdt {

namespace {

Tensord scalar_entry(double v) {
  Tensord t({1});
  t.data[0] = v;
  return t;
}

}  // namespace

ParamDict to_param_dict(const NetworkParams& params, const NetworkConfig& cfg) {
  ParamDict d;
  d.emplace_back("meta.variant", scalar_entry(cfg.backbone.variant == BackboneVariant::DenseFM ? 1 : 0));
  d.emplace_back("meta.extract_mode", scalar_entry(static_cast<double>(cfg.extract.mode)));
  d.emplace_back("conv1.weight", params.backbone.w1);
  d.emplace_back("conv1.bias", params.backbone.b1);
  d.emplace_back("conv2.weight", params.backbone.w2);
  d.emplace_back("conv2.bias", params.backbone.b2);
  d.emplace_back("conv3.weight", params.backbone.w3);
  d.emplace_back("conv3.bias", params.backbone.b3);
  d.emplace_back("fc4.weight", params.head.w4);
  d.emplace_back("fc4.bias", params.head.b4);
  d.emplace_back("fc5.weight", params.head.w5);
  d.emplace_back("fc5.bias", params.head.b5);
  for (int k = 0; k < params.head.domains(); ++k) {
    const std::string base = "fc6." + std::to_string(k) + ".";
    d.emplace_back(base + "weight", params.head.w6[static_cast<std::size_t>(k)]);
    d.emplace_back(base + "bias", params.head.b6[static_cast<std::size_t>(k)]);
  }
  return d;
}

LoadedNetwork from_param_dict(const ParamDict& dict) {
  std::map<std::string, const Tensord*> by_name;
  int domains = 0;
  for (const auto& [name, t] : dict) {
    by_name[name] = &t;
    if (name.rfind("fc6.", 0) == 0 && name.size() > 5 && name.compare(name.size() - 7, 7, ".weight") == 0)
      ++domains;
  }
  auto get = [&](const std::string& name) -> const Tensord& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("checkpoint is missing entry '" + name + "'");
    return *it->second;
  };

  LoadedNetwork net;
  net.params.backbone.w1 = get("conv1.weight");
  net.params.backbone.b1 = get("conv1.bias");
  net.params.backbone.w2 = get("conv2.weight");
  net.params.backbone.b2 = get("conv2.bias");
  net.params.backbone.w3 = get("conv3.weight");
  net.params.backbone.b3 = get("conv3.bias");
  net.params.head.w4 = get("fc4.weight");
  net.params.head.b4 = get("fc4.bias");
  net.params.head.w5 = get("fc5.weight");
  net.params.head.b5 = get("fc5.bias");
  if (domains < 1) throw IoError("checkpoint holds no domain branches");
  for (int k = 0; k < domains; ++k) {
    const std::string base = "fc6." + std::to_string(k) + ".";
    net.params.head.w6.push_back(get(base + "weight"));
    net.params.head.b6.push_back(get(base + "bias"));
  }

  net.config.backbone.variant =
      get("meta.variant").data[0] != 0 ? BackboneVariant::DenseFM : BackboneVariant::Original;
  net.config.backbone.c1 = net.params.backbone.w1.shape[0];
  net.config.backbone.c2 = net.params.backbone.w2.shape[0];
  net.config.backbone.c3 = net.params.backbone.w3.shape[0];
  const int mode = static_cast<int>(get("meta.extract_mode").data[0]);
  if (mode < 0 || mode > 2) throw IoError("checkpoint extraction mode out of range");
  net.config.extract.mode = static_cast<ExtractMode>(mode);
  net.config.head.hidden = net.params.head.w4.shape[0];
  net.config.head.in_features = net.params.head.w4.shape[1];
  net.config.head.domains = domains;
  if (net.config.head.in_features != net.config.roi_feature_width())
    throw IoError("checkpoint fc4 width does not match the extraction pipeline");
  return net;
}

}  // namespace mdt
