#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fscd/raster.hpp"
#include "fscd/rng.hpp"
#include "fscd/uncertainty.hpp"

namespace fscd {

// A co-registered bi-temporal pair with its binary change mask. All three
// rasters share H×W; image values live in [0,1], mask values in {0,1}.
struct BitemporalSample {
  std::string id;
  ImageF t1;
  ImageF t2;
  MaskU8 mask;
};

// Single-epoch image with a building-footprint mask (pretraining corpus).
struct SegSample {
  std::string id;
  ImageF image;
  MaskU8 mask;
};

enum class Split { Train, Test, Pretrain };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct ManifestEntry {
  std::string id;
  std::filesystem::path t1_path;
  std::filesystem::path t2_path;
  std::filesystem::path mask_path;
  Split split = Split::Train;
};

// Entries plus the directory that relative paths are resolved against
// (the directory containing the manifest file).
struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> with_split(Split s) const;
};

struct SplitCounts {
  int64_t train = 0;
  int64_t test = 0;
  int64_t pretrain = 0;
};

// Manifest file format: one JSON object per line,
// {id, t1_path, t2_path, mask_path, split}, UTF-8. Relative paths are
// interpreted relative to the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& manifest_path);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& manifest_path);
SplitCounts split_report(const DatasetManifest& manifest);

// Loads the three rasters of an entry, scales pixels by 1/255 and binarizes
// the mask at value > 127. Throws IoError for a missing file, for non-RGB
// input, and (naming the entry id) for a dimension mismatch within the
// triple.
BitemporalSample load_sample(const ManifestEntry& entry,
                             const std::filesystem::path& base_dir);

// Writes {id}_t1.png / {id}_t2.png / {id}_mask.png under out_dir/images and
// returns the manifest entry with paths relative to out_dir.
ManifestEntry save_sample(const BitemporalSample& sample, Split split,
                          const std::filesystem::path& out_dir);
ManifestEntry save_seg_sample(const SegSample& sample,
                              const std::filesystem::path& out_dir);

// Row-major grid of aligned (t1, t2, mask) crops at every offset where a full
// tile fits. Tile ids are "<id>_y<row>_x<col>" by top-left pixel coordinate.
std::vector<BitemporalSample> tile(const BitemporalSample& sample,
                                   int tile_size, int stride);

struct SynthParams {
  int size = 64;
  int n_buildings_min = 3;
  int n_buildings_max = 6;
  double change_fraction = 0.5;
  double noise_sigma = 0.02;
  uint64_t seed = 0;
  // Default recipe: 80 train / 20 test change pairs + 64 pretrain scenes.
  int n_train = 80;
  int n_test = 20;
  int n_pretrain = 64;

  void validate() const;
};

// Axis-aligned building footprint with a per-building gray level.
struct RectSpec {
  int y0 = 0, x0 = 0, h = 0, w = 0;
  float gray = 0.f;
  bool contains(int y, int x) const {
    return y >= y0 && y < y0 + h && x >= x0 && x < x0 + w;
  }
};

// Footprint layouts of the two epochs. For pretraining scenes t2 == t1.
struct SceneSpec {
  std::vector<RectSpec> t1;
  std::vector<RectSpec> t2;
};

// Pure functions of (params, index): the layout, and the rendered sample.
// The change mask is the symmetric difference of the two epoch coverages.
SceneSpec synth_scene_spec(const SynthParams& params, uint64_t index,
                           bool pretrain);
BitemporalSample synth_sample(const SynthParams& params, uint64_t index);
SegSample synth_seg_sample(const SynthParams& params, uint64_t index);

MaskU8 rasterize_union(const std::vector<RectSpec>& rects, int size);

// All change samples of the recipe: n_train of split train followed by
// n_test of split test, in index order.
std::vector<BitemporalSample> synth_generate(const SynthParams& params);

// Generates the full corpus (change pairs + pretraining scenes), writes the
// PNGs and manifest.jsonl under out_dir, and returns the manifest.
DatasetManifest synth_dataset(const SynthParams& params,
                              const std::filesystem::path& out_dir);

struct MapPaths {
  std::filesystem::path change_map;
  std::filesystem::path mean_prob;
  std::filesystem::path total;
  std::filesystem::path aleatoric;
  std::filesystem::path epistemic;
};

// change map: 8-bit 0/255 from mask_bin; mean probability: 8-bit
// round(255·p); entropy maps: 16-bit round(65535·bits) (binary entropy ≤ 1).
MapPaths render_maps(const RasterD& prob, const MaskU8& mask_bin,
                     const UncertaintyMaps& umaps,
                     const std::filesystem::path& out_dir);

}  // namespace fscd
