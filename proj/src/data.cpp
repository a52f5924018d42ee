#include "fscd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fscd/errors.hpp"
#include "fscd/png_io.hpp"

namespace fscd {

namespace {

// Stream labels for synthetic generation; one scene stream per sample index.
constexpr uint64_t kChangeScene = 11;
constexpr uint64_t kPretrainScene = 12;
constexpr uint64_t kLayout = 0;
constexpr uint64_t kNoiseT1 = 1;
constexpr uint64_t kNoiseT2 = 2;
constexpr uint64_t kBackground = 3;
constexpr uint64_t kChangeDraw = 4;

std::string zero_pad(uint64_t n, int width) {
  std::string s = std::to_string(n);
  while (int(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

bool overlaps_with_margin(const RectSpec& a, const RectSpec& b) {
  return a.x0 < b.x0 + b.w + 1 && b.x0 < a.x0 + a.w + 1 &&
         a.y0 < b.y0 + b.h + 1 && b.y0 < a.y0 + a.h + 1;
}

ImageF make_background(int size, RngStream bg) {
  float base[3], gy[3], gx[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.20f + 0.25f * float(bg.next_double());
    gy[c] = float((bg.next_double() - 0.5) * 0.16 / size);
    gx[c] = float((bg.next_double() - 0.5) * 0.16 / size);
  }
  ImageF img(size, size, 3);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      for (int c = 0; c < 3; ++c)
        img.at(i, j, c) = base[c] + gy[c] * float(i) + gx[c] * float(j) +
                          0.04f * float(bg.next_double() - 0.5);
  return img;
}

void paint_rects(ImageF& img, const std::vector<RectSpec>& rects) {
  for (const auto& r : rects)
    for (int i = r.y0; i < r.y0 + r.h; ++i)
      for (int j = r.x0; j < r.x0 + r.w; ++j)
        for (int c = 0; c < 3; ++c) img.at(i, j, c) = r.gray;
}

void add_noise(ImageF& img, double sigma, RngStream noise) {
  if (sigma == 0.0) return;
  for (float& v : img.v)
    v = std::clamp(v + float(sigma * noise.next_normal()), 0.f, 1.f);
}

MaskU8 coverage_xor(const SceneSpec& spec, int size) {
  const MaskU8 a = rasterize_union(spec.t1, size);
  const MaskU8 b = rasterize_union(spec.t2, size);
  MaskU8 mask(size, size);
  for (size_t i = 0; i < mask.v.size(); ++i)
    mask.v[i] = uint8_t(a.v[i] != b.v[i] ? 1 : 0);
  return mask;
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

MaskU8 mask_to_levels(const MaskU8& mask) {
  MaskU8 levels(mask.h, mask.w);
  for (size_t i = 0; i < mask.v.size(); ++i)
    levels.v[i] = mask.v[i] ? uint8_t(255) : uint8_t(0);
  return levels;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Pretrain: return "pretrain";
  }
  throw std::invalid_argument("unknown split");
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  if (name == "pretrain") return Split::Pretrain;
  throw std::invalid_argument("unknown split '" + name +
                              "' (expected train, test, or pretrain)");
}

std::vector<ManifestEntry> DatasetManifest::with_split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("missing file: " + manifest_path.string());
  DatasetManifest m;
  m.base_dir = manifest_path.parent_path();
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(manifest_path.string() + ":" + std::to_string(line_no) +
                    ": malformed manifest record: " + e.what());
    }
    for (const char* key : {"id", "t1_path", "t2_path", "mask_path", "split"})
      if (!j.contains(key))
        throw IoError(manifest_path.string() + ":" + std::to_string(line_no) +
                      ": manifest record missing field '" + key + "'");
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.t1_path = j.at("t1_path").get<std::string>();
    e.t2_path = j.at("t2_path").get<std::string>();
    e.mask_path = j.at("mask_path").get<std::string>();
    e.split = parse_split(j.at("split").get<std::string>());
    if (!seen.insert(e.id).second)
      throw IoError(manifest_path.string() + ": duplicate entry id '" + e.id +
                    "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& manifest_path) {
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  for (const auto& e : manifest.entries) {
    nlohmann::json j{{"id", e.id},
                     {"t1_path", e.t1_path.generic_string()},
                     {"t2_path", e.t2_path.generic_string()},
                     {"mask_path", e.mask_path.generic_string()},
                     {"split", split_name(e.split)}};
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("cannot write " + manifest_path.string());
}

SplitCounts split_report(const DatasetManifest& manifest) {
  SplitCounts c;
  for (const auto& e : manifest.entries) {
    if (e.split == Split::Train) ++c.train;
    else if (e.split == Split::Test) ++c.test;
    else ++c.pretrain;
  }
  return c;
}

BitemporalSample load_sample(const ManifestEntry& entry,
                             const std::filesystem::path& base_dir) {
  BitemporalSample s;
  s.id = entry.id;
  s.t1 = read_png_rgb8(resolve(base_dir, entry.t1_path));
  s.t2 = read_png_rgb8(resolve(base_dir, entry.t2_path));
  const MaskU8 levels = read_png_gray8(resolve(base_dir, entry.mask_path));
  if (s.t1.h != s.t2.h || s.t1.w != s.t2.w || s.t1.h != levels.h ||
      s.t1.w != levels.w) {
    std::ostringstream msg;
    msg << "dimension mismatch for entry '" << entry.id << "': t1 " << s.t1.h
        << "x" << s.t1.w << ", t2 " << s.t2.h << "x" << s.t2.w << ", mask "
        << levels.h << "x" << levels.w;
    throw IoError(msg.str());
  }
  s.mask = MaskU8(levels.h, levels.w);
  for (size_t i = 0; i < levels.v.size(); ++i)
    s.mask.v[i] = uint8_t(levels.v[i] > 127 ? 1 : 0);
  return s;
}

ManifestEntry save_sample(const BitemporalSample& sample, Split split,
                          const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "images");
  ManifestEntry e;
  e.id = sample.id;
  e.t1_path = std::filesystem::path("images") / (sample.id + "_t1.png");
  e.t2_path = std::filesystem::path("images") / (sample.id + "_t2.png");
  e.mask_path = std::filesystem::path("images") / (sample.id + "_mask.png");
  e.split = split;
  write_png_rgb8(out_dir / e.t1_path, sample.t1);
  write_png_rgb8(out_dir / e.t2_path, sample.t2);
  write_png_gray8(out_dir / e.mask_path, mask_to_levels(sample.mask));
  return e;
}

ManifestEntry save_seg_sample(const SegSample& sample,
                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "images");
  ManifestEntry e;
  e.id = sample.id;
  e.t1_path = std::filesystem::path("images") / (sample.id + "_t1.png");
  e.t2_path = e.t1_path;  // single-epoch corpus: both epochs are the image
  e.mask_path = std::filesystem::path("images") / (sample.id + "_mask.png");
  e.split = Split::Pretrain;
  write_png_rgb8(out_dir / e.t1_path, sample.image);
  write_png_gray8(out_dir / e.mask_path, mask_to_levels(sample.mask));
  return e;
}

std::vector<BitemporalSample> tile(const BitemporalSample& sample,
                                   int tile_size, int stride) {
  if (tile_size < 1) throw std::invalid_argument("tile size must be >= 1");
  if (stride < 1) throw std::invalid_argument("tile stride must be >= 1");
  if (tile_size > sample.t1.h || tile_size > sample.t1.w)
    throw std::invalid_argument(
        "tile size " + std::to_string(tile_size) + " exceeds image " +
        std::to_string(sample.t1.h) + "x" + std::to_string(sample.t1.w));
  std::vector<BitemporalSample> tiles;
  for (int y0 = 0; y0 + tile_size <= sample.t1.h; y0 += stride) {
    for (int x0 = 0; x0 + tile_size <= sample.t1.w; x0 += stride) {
      BitemporalSample t;
      t.id = sample.id + "_y" + std::to_string(y0) + "_x" + std::to_string(x0);
      t.t1 = ImageF(tile_size, tile_size, sample.t1.c);
      t.t2 = ImageF(tile_size, tile_size, sample.t2.c);
      t.mask = MaskU8(tile_size, tile_size);
      for (int i = 0; i < tile_size; ++i) {
        for (int j = 0; j < tile_size; ++j) {
          for (int c = 0; c < sample.t1.c; ++c) {
            t.t1.at(i, j, c) = sample.t1.at(y0 + i, x0 + j, c);
            t.t2.at(i, j, c) = sample.t2.at(y0 + i, x0 + j, c);
          }
          t.mask.at(i, j) = sample.mask.at(y0 + i, x0 + j);
        }
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

void SynthParams::validate() const {
  if (size < 16) throw std::invalid_argument("synth size must be >= 16");
  if (n_buildings_min < 1 || n_buildings_max < n_buildings_min)
    throw std::invalid_argument("building count range must satisfy 1 <= min <= max");
  if (!(change_fraction >= 0.0 && change_fraction <= 1.0))
    throw std::invalid_argument("change_fraction must lie in [0,1]");
  if (!(noise_sigma >= 0.0))
    throw std::invalid_argument("noise_sigma must be >= 0");
  if (n_train < 0 || n_test < 0 || n_pretrain < 0)
    throw std::invalid_argument("sample counts must be >= 0");
}

SceneSpec synth_scene_spec(const SynthParams& params, uint64_t index,
                           bool pretrain) {
  params.validate();
  const RngStream scene = RngStream::derive(
      params.seed, {pretrain ? kPretrainScene : kChangeScene, index});
  RngStream layout = scene.split(kLayout);
  const int n = params.n_buildings_min +
                int(layout.next_below(uint64_t(params.n_buildings_max -
                                               params.n_buildings_min + 1)));
  const int min_d = std::max(4, params.size / 8);
  const int max_d = std::max(min_d, params.size / 3);

  std::vector<RectSpec> placed;
  for (int b = 0; b < n; ++b) {
    RngStream rs = layout.split(uint64_t(16 + b));
    RectSpec r;
    for (int attempt = 0; attempt < 50; ++attempt) {
      r.h = min_d + int(rs.next_below(uint64_t(max_d - min_d + 1)));
      r.w = min_d + int(rs.next_below(uint64_t(max_d - min_d + 1)));
      r.y0 = int(rs.next_below(uint64_t(params.size - r.h + 1)));
      r.x0 = int(rs.next_below(uint64_t(params.size - r.w + 1)));
      bool clear = true;
      for (const auto& p : placed)
        if (overlaps_with_margin(r, p)) { clear = false; break; }
      if (clear) break;  // otherwise the 50th draw is kept even if it overlaps
    }
    r.gray = 0.65f + 0.30f * float(rs.next_double());
    placed.push_back(r);
  }

  SceneSpec spec;
  if (pretrain) {
    spec.t1 = placed;
    spec.t2 = placed;
    return spec;
  }
  RngStream change = scene.split(kChangeDraw);
  for (size_t b = 0; b < placed.size(); ++b) {
    RngStream cs = change.split(b);
    if (cs.next_double() >= params.change_fraction) {
      spec.t1.push_back(placed[b]);
      spec.t2.push_back(placed[b]);
    } else if (cs.next_double() < 0.5) {
      spec.t1.push_back(placed[b]);  // demolished: present only at t1
    } else {
      spec.t2.push_back(placed[b]);  // newly built: present only at t2
    }
  }
  return spec;
}

MaskU8 rasterize_union(const std::vector<RectSpec>& rects, int size) {
  MaskU8 cov(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      for (const auto& r : rects)
        if (r.contains(i, j)) { cov.at(i, j) = 1; break; }
  return cov;
}

BitemporalSample synth_sample(const SynthParams& params, uint64_t index) {
  const SceneSpec spec = synth_scene_spec(params, index, false);
  const RngStream scene = RngStream::derive(params.seed, {kChangeScene, index});
  const ImageF bg = make_background(params.size, scene.split(kBackground));
  BitemporalSample s;
  s.id = "cd" + zero_pad(index, 3);
  s.t1 = bg;
  paint_rects(s.t1, spec.t1);
  add_noise(s.t1, params.noise_sigma, scene.split(kNoiseT1));
  s.t2 = bg;
  paint_rects(s.t2, spec.t2);
  add_noise(s.t2, params.noise_sigma, scene.split(kNoiseT2));
  s.mask = coverage_xor(spec, params.size);
  return s;
}

SegSample synth_seg_sample(const SynthParams& params, uint64_t index) {
  const SceneSpec spec = synth_scene_spec(params, index, true);
  const RngStream scene =
      RngStream::derive(params.seed, {kPretrainScene, index});
  SegSample s;
  s.id = "pre" + zero_pad(index, 3);
  s.image = make_background(params.size, scene.split(kBackground));
  paint_rects(s.image, spec.t1);
  add_noise(s.image, params.noise_sigma, scene.split(kNoiseT1));
  s.mask = rasterize_union(spec.t1, params.size);
  return s;
}

std::vector<BitemporalSample> synth_generate(const SynthParams& params) {
  params.validate();
  std::vector<BitemporalSample> out;
  const int total = params.n_train + params.n_test;
  out.reserve(size_t(total));
  for (int i = 0; i < total; ++i) out.push_back(synth_sample(params, uint64_t(i)));
  return out;
}

DatasetManifest synth_dataset(const SynthParams& params,
                              const std::filesystem::path& out_dir) {
  params.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec)
    throw IoError("cannot create directory " + (out_dir / "images").string() +
                  ": " + ec.message());
  DatasetManifest m;
  m.base_dir = out_dir;
  for (int i = 0; i < params.n_train + params.n_test; ++i) {
    const Split split = i < params.n_train ? Split::Train : Split::Test;
    m.entries.push_back(
        save_sample(synth_sample(params, uint64_t(i)), split, out_dir));
  }
  for (int i = 0; i < params.n_pretrain; ++i)
    m.entries.push_back(
        save_seg_sample(synth_seg_sample(params, uint64_t(i)), out_dir));
  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

MapPaths render_maps(const RasterD& prob, const MaskU8& mask_bin,
                     const UncertaintyMaps& umaps,
                     const std::filesystem::path& out_dir) {
  if (prob.h != mask_bin.h || prob.w != mask_bin.w || prob.h != umaps.h ||
      prob.w != umaps.w)
    throw std::invalid_argument("render_maps: raster dimensions disagree");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create directory " + out_dir.string() + ": " +
                  ec.message());

  MapPaths paths;
  paths.change_map = out_dir / "change_map.png";
  paths.mean_prob = out_dir / "mean_prob.png";
  paths.total = out_dir / "total_entropy.png";
  paths.aleatoric = out_dir / "aleatoric_entropy.png";
  paths.epistemic = out_dir / "epistemic_entropy.png";

  write_png_gray8(paths.change_map, mask_to_levels(mask_bin));

  MaskU8 p8(prob.h, prob.w);
  for (size_t i = 0; i < prob.v.size(); ++i)
    p8.v[i] = uint8_t(std::lround(255.0 * std::clamp(prob.v[i], 0.0, 1.0)));
  write_png_gray8(paths.mean_prob, p8);

  auto write_bits = [&](const RasterD& bits, const std::filesystem::path& p) {
    Raster<uint16_t> q(bits.h, bits.w);
    for (size_t i = 0; i < bits.v.size(); ++i)
      q.v[i] = uint16_t(std::lround(65535.0 * std::clamp(bits.v[i], 0.0, 1.0)));
    write_png_gray16(p, q);
  };
  write_bits(umaps.total, paths.total);
  write_bits(umaps.aleatoric, paths.aleatoric);
  write_bits(umaps.epistemic, paths.epistemic);
  return paths;
}

}  // namespace fscd
