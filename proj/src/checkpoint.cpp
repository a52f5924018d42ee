#include "fscd/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

#include "fscd/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as native little-endian floats");

namespace fscd {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'S', 'C', 'D'};
constexpr uint16_t kVersion = 1;

json config_json(const ModelConfig& cfg) {
  return json{{"input_channels", cfg.input_channels},
              {"encoder_channels", cfg.encoder_channels},
              {"blocks_per_stage", cfg.blocks_per_stage},
              {"fusion", fusion_name(cfg.fusion)},
              {"unit_dropout_rate", cfg.unit_dropout_rate},
              {"depth_survival_p", cfg.depth_survival_p},
              {"decoder_stages", cfg.decoder_stages},
              {"tile_size", cfg.tile_size},
              {"kind", cfg.kind == ModelKind::Segmentation ? "segmentation"
                                                           : "change"}};
}

ModelConfig config_from(const json& j) {
  ModelConfig cfg;
  cfg.input_channels = j.at("input_channels").get<int>();
  cfg.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  cfg.blocks_per_stage = j.at("blocks_per_stage").get<int>();
  const std::string fusion = j.at("fusion").get<std::string>();
  if (fusion == "early_fusion")
    cfg.fusion = Fusion::EarlyFusion;
  else if (fusion == "siam_concat")
    cfg.fusion = Fusion::SiamConcat;
  else if (fusion == "siam_diff")
    cfg.fusion = Fusion::SiamDiff;
  else
    throw IoError("unknown fusion strategy '" + fusion + "'");
  cfg.unit_dropout_rate = j.at("unit_dropout_rate").get<double>();
  cfg.depth_survival_p = j.at("depth_survival_p").get<double>();
  cfg.decoder_stages = j.at("decoder_stages").get<int>();
  cfg.tile_size = j.at("tile_size").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "segmentation")
    cfg.kind = ModelKind::Segmentation;
  else if (kind == "change")
    cfg.kind = ModelKind::ChangeDetection;
  else
    throw IoError("unknown model kind '" + kind + "'");
  return cfg;
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  return config_json(cfg).dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed model config: ") + e.what());
  }
}

void save_checkpoint(const Model<float>& model,
                     const std::filesystem::path& path) {
  json header;
  header["config"] = config_json(model.config);
  json layers = json::array();
  for (const auto& [name, t] : model.params)
    layers.push_back(json{{"name", name}, {"shape", t.shape()}});
  header["layers"] = layers;
  const std::string header_text = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint to " + path.string());
  f.write(kMagic, 4);
  write_raw(f, kVersion);
  write_raw(f, static_cast<uint32_t>(header_text.size()));
  f.write(header_text.data(), std::streamsize(header_text.size()));
  for (const auto& [name, t] : model.params)
    f.write(reinterpret_cast<const char*>(t.values().data()),
            std::streamsize(t.numel() * sizeof(float)));
  if (!f) throw IoError("short write while saving checkpoint " + path.string());
}

Model<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());

  char magic[4] = {};
  f.read(magic, 4);
  if (f.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError(CheckpointError::Kind::BadMagic,
                          path.string() + ": bad magic; not an FSCD checkpoint");
  uint16_t version = 0;
  f.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (f.gcount() != sizeof(version))
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path.string() + ": truncated payload (version)");
  if (version != kVersion)
    throw CheckpointError(CheckpointError::Kind::BadVersion,
                          path.string() + ": unsupported checkpoint version " +
                              std::to_string(version));
  uint32_t header_len = 0;
  f.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (f.gcount() != sizeof(header_len))
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path.string() + ": truncated payload (header length)");
  std::string header_text(header_len, '\0');
  f.read(header_text.data(), header_len);
  if (f.gcount() != std::streamsize(header_len))
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path.string() + ": truncated payload (header)");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
  }

  Model<float> m;
  std::vector<LayerSpec> expected;
  try {
    m.config = config_from(header.at("config"));

    // The header's layer table must be exactly the canonical set for the
    // stored config; otherwise the payload cannot be trusted.
    expected = canonical_layers(m.config);
    const auto& layers = header.at("layers");
    if (layers.size() != expected.size())
      throw CheckpointError(
          CheckpointError::Kind::NameSetMismatch,
          path.string() + ": layer table has " + std::to_string(layers.size()) +
              " entries; config implies " + std::to_string(expected.size()));
    for (size_t i = 0; i < expected.size(); ++i) {
      const std::string name = layers[i].at("name").get<std::string>();
      const Shape shape = layers[i].at("shape").get<Shape>();
      if (name != expected[i].name || shape != expected[i].shape)
        throw CheckpointError(CheckpointError::Kind::NameSetMismatch,
                              path.string() + ": layer '" + name +
                                  "' does not match canonical layer '" +
                                  expected[i].name + "'");
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
  }

  for (const auto& spec : expected) {
    Tensor<float> t =
        Tensor<float>::zeros(spec.shape, /*requires_grad=*/true);
    f.read(reinterpret_cast<char*>(t.values().data()),
           std::streamsize(t.numel() * sizeof(float)));
    if (f.gcount() != std::streamsize(t.numel() * sizeof(float)))
      throw CheckpointError(
          CheckpointError::Kind::Truncated,
          path.string() + ": truncated payload at layer '" + spec.name + "'");
    m.params.emplace_back(spec.name, t);
  }
  return m;
}

std::vector<std::string> transfer_params(const Model<float>& src,
                                         Model<float>& dst) {
  std::vector<std::string> transferred;
  for (auto& [name, t] : dst.params) {
    for (const auto& [sname, st] : src.params) {
      if (sname == name && st.shape() == t.shape()) {
        t.values() = st.values();
        transferred.push_back(name);
        break;
      }
    }
  }
  return transferred;
}

}  // namespace fscd
