#pragma once

#include <filesystem>
#include <json.hpp>
#include <stdexcept>
#include <string>

#include "pino/binio.hpp"
#include "pino/models.hpp"

namespace pino {

constexpr char kCheckpointMagic[16] = {'P', 'I', 'N', 'O', '-', 'C', 'H', 'E',
                                       'C', 'K', 'P', 'O', 'I', 'N', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::ordered_json config_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(c.kind);
  j["coord_dim"] = c.coord_dim;
  j["out_dim"] = c.out_dim;
  j["width"] = c.width;
  j["geo_width"] = c.geo_width;
  j["operator_layers"] = c.operator_layers;
  j["branch_layers"] = c.branch_layers;
  j["geo_layers"] = c.geo_layers;
  j["pointnet_layers"] = c.pointnet_layers;
  j["branch_dim"] = c.branch_dim;
  j["geo_dim"] = c.geo_dim;
  j["branch_size"] = c.branch_size;
  j["coord_scale"] = c.coord_scale;
  j["pooling"] = to_string(c.pooling);
  j["fusion"] = to_string(c.fusion);
  j["geo_input"] = to_string(c.geo_input);
  return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = parse_enum<ModelKind>(j.at("kind").get<std::string>());
  c.coord_dim = j.at("coord_dim").get<int>();
  c.out_dim = j.at("out_dim").get<int>();
  c.width = j.at("width").get<int>();
  c.geo_width = j.at("geo_width").get<int>();
  c.operator_layers = j.at("operator_layers").get<int>();
  c.branch_layers = j.at("branch_layers").get<int>();
  c.geo_layers = j.at("geo_layers").get<int>();
  c.pointnet_layers = j.at("pointnet_layers").get<int>();
  c.branch_dim = j.at("branch_dim").get<int>();
  c.geo_dim = j.at("geo_dim").get<int>();
  c.branch_size = j.at("branch_size").get<int>();
  c.coord_scale = j.at("coord_scale").get<double>();
  c.pooling = parse_enum<Pooling>(j.at("pooling").get<std::string>());
  c.fusion = parse_enum<Fusion>(j.at("fusion").get<std::string>());
  c.geo_input = parse_enum<GeoInput>(j.at("geo_input").get<std::string>());
  return c;
}

inline void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  if (state.params.empty())
    throw std::invalid_argument("save_checkpoint: model has no parameters");
  PayloadWriter w;
  w.str(config_json(state.config).dump());
  w.u32(static_cast<std::uint32_t>(state.params.size()));
  for (const auto& [name, p] : state.params) {
    w.str(name);
    w.tensor(p);
  }
  write_container(path, kCheckpointMagic, kCheckpointVersion, w.bytes);
}

inline ModelState load_checkpoint(const std::filesystem::path& path) {
  const std::string payload = read_container(path, kCheckpointMagic, kCheckpointVersion);
  PayloadReader r{&payload, 0, path.string()};
  ModelState state;
  state.config = config_from_json(nlohmann::json::parse(r.str()));
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    Tensor t = r.tensor();
    if (!t.all_finite())
      throw std::runtime_error(path.string() + ": parameter " + name + " has non-finite entries");
    state.params.emplace_back(std::move(name), std::move(t));
  }
  // The descriptor fully determines the shapes; verify the payload agrees.
  ModelState expected = init_model(state.config, 0);
  if (expected.params.size() != state.params.size())
    throw std::runtime_error(path.string() + ": parameter count does not match architecture");
  for (std::size_t i = 0; i < expected.params.size(); ++i) {
    if (expected.params[i].first != state.params[i].first ||
        expected.params[i].second.shape != state.params[i].second.shape)
      throw std::runtime_error(path.string() + ": parameter " + state.params[i].first +
                               " has shape " + shape_str(state.params[i].second.shape) +
                               ", architecture expects " +
                               shape_str(expected.params[i].second.shape) + " for " +
                               expected.params[i].first);
  }
  return state;
}

}  // namespace pino
