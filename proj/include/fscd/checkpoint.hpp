#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fscd/model.hpp"

namespace fscd {

// Checkpoint file layout, all little-endian:
//   magic "FSCD" | u16 version = 1 | u32 header length | UTF-8 JSON header
//   (config + ordered layer-name/shape table) | raw float32 payload in table
//   order.
// Round trips are bit-exact. Failure modes are distinct CheckpointError
// kinds: BadMagic, BadVersion, Truncated, NameSetMismatch.
void save_checkpoint(const Model<float>& model,
                     const std::filesystem::path& path);
Model<float> load_checkpoint(const std::filesystem::path& path);

// Copy every parameter whose name and shape both match from src into dst
// (fresh initialization is kept everywhere else). Returns the transferred
// names in dst's canonical order; this is how pretrained encoders enter
// change models.
std::vector<std::string> transfer_params(const Model<float>& src,
                                         Model<float>& dst);

// ModelConfig <-> JSON used inside the checkpoint header and in run records.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace fscd
