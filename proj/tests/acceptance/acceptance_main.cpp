// Acceptance harness: exercises the shipped binary plus the library against
// the nine release criteria and prints one PASS/FAIL line per criterion.
//
//   fscd_acceptance --cli <path-to-fscd> --manifest-template <jsonl>
//
// Exit code 0 iff every criterion passes.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fscd/checkpoint.hpp"
#include "fscd/data.hpp"
#include "fscd/errors.hpp"
#include "fscd/metrics.hpp"
#include "fscd/model.hpp"
#include "fscd/png_io.hpp"
#include "fscd/rng.hpp"
#include "fscd/run_record.hpp"
#include "fscd/tensor.hpp"
#include "fscd/trainer.hpp"
#include "fscd/uncertainty.hpp"
#include "fscd/verify.hpp"

namespace fs = std::filesystem;
using namespace fscd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string cli_path;
fs::path template_path;
fs::path work_root;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// Runs one CLI invocation with cwd set to `dir`, appending output to a log
// outside the compared trees. Returns the subcommand exit code.
int run_cli(const fs::path& dir, const std::string& args,
            const std::string& log_name) {
  const fs::path log = work_root / log_name;
  std::string cmd = "cd '" + dir.string() + "' && '" + cli_path + "' " + args +
                    " >> '" + log.string() + "' 2>&1";
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<uint8_t> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Byte-compares every regular file under two directory trees.
bool trees_equal(const fs::path& a, const fs::path& b, std::string& why,
                 size_t& file_count) {
  auto collect = [](const fs::path& root) {
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), root));
    std::sort(rel.begin(), rel.end());
    return rel;
  };
  const auto fa = collect(a), fb = collect(b);
  if (fa != fb) {
    why = "file lists differ (" + std::to_string(fa.size()) + " vs " +
          std::to_string(fb.size()) + ")";
    return false;
  }
  for (const auto& r : fa)
    if (slurp(a / r) != slurp(b / r)) {
      why = "bytes differ: " + r.string();
      return false;
    }
  file_count = fa.size();
  return true;
}

// ---------------------------------------------------------------------------
// 1. gradient correctness
// ---------------------------------------------------------------------------
Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = run_gradcheck_suite();
  const double secs = seconds_since(t0);
  double worst_op = 0, worst_e2e = 0;
  for (const auto& e : entries) {
    if (!e.pass())
      return {false, e.name + " rel err " + fmt(e.max_rel_err) +
                         " exceeds " + fmt(e.tolerance)};
    (e.tolerance <= 1e-4 ? worst_op : worst_e2e) =
        std::max(e.tolerance <= 1e-4 ? worst_op : worst_e2e, e.max_rel_err);
  }
  if (secs >= 60.0) return {false, "suite took " + fmt(secs, 3) + " s"};
  return {true, std::to_string(entries.size()) + " checks, max op err " +
                    fmt(worst_op, 3) + ", e2e err " + fmt(worst_e2e, 3) +
                    ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 2. uncertainty identities
// ---------------------------------------------------------------------------
Outcome criterion_uncertainty() {
  const int ts[] = {1, 2, 5, 20};
  RngStream rng(20240, 0);
  double worst_gap = 0;
  for (int stack_i = 0; stack_i < 1000; ++stack_i) {
    const int t = ts[stack_i % 4];
    std::vector<RasterF> stack;
    for (int s = 0; s < t; ++s) {
      RasterF r(3, 3);
      for (auto& v : r.v) v = float(rng.next_double());
      stack.push_back(std::move(r));
    }
    const UncertaintyMaps u = decompose(stack);
    for (size_t px = 0; px < u.total.v.size(); ++px) {
      const double gap =
          std::abs(u.total.v[px] - (u.aleatoric.v[px] + u.epistemic.v[px]));
      worst_gap = std::max(worst_gap, gap);
      if (gap > 1e-12)
        return {false, "total != aleatoric + epistemic (gap " + fmt(gap) + ")"};
      if (u.epistemic.v[px] < 0.0)
        return {false, "negative epistemic " + fmt(u.epistemic.v[px])};
    }
  }

  // Closed form for the two-sample {0.2, 0.8} stack.
  std::vector<RasterF> pair{RasterF(1, 1, 0.2f), RasterF(1, 1, 0.8f)};
  const UncertaintyMaps u = decompose(pair);
  if (std::abs(u.aleatoric.v[0] - 0.721928) > 1e-6 ||
      std::abs(u.epistemic.v[0] - 0.278072) > 1e-6)
    return {false, "{0.2,0.8} gave aleatoric " + fmt(u.aleatoric.v[0]) +
                       ", epistemic " + fmt(u.epistemic.v[0])};

  // Dropout rate 0: MC samples agree bitwise, epistemic exactly zero.
  ModelConfig cfg;
  cfg.encoder_channels = {4, 8};
  cfg.blocks_per_stage = 1;
  cfg.decoder_stages = 2;
  cfg.tile_size = 16;
  cfg.unit_dropout_rate = 0.0;
  cfg.depth_survival_p = 0.9;
  const auto m = build_model<float>(cfg, RngStream(2, 0));
  SynthParams sp;
  sp.size = 16;
  const auto sample = synth_sample(sp, 0);
  const auto t1 = images_to_tensor({sample}, 1);
  const auto t2 = images_to_tensor({sample}, 2);
  const auto mc = mc_sample(m, t1, t2, McConfig{8, 99});
  const UncertaintyMaps um = decompose(mc);
  for (double e : um.epistemic.v)
    if (e != 0.0)
      return {false, "dropout 0 epistemic not exactly zero: " + fmt(e)};

  return {true, "1000 stacks, worst identity gap " + fmt(worst_gap, 3) +
                    "; {0.2,0.8} and dropout-0 cases exact"};
}

// ---------------------------------------------------------------------------
// 3. determinism
// ---------------------------------------------------------------------------
Outcome criterion_determinism() {
  auto pipeline = [&](const fs::path& dir, int workers) -> std::string {
    fs::create_directories(dir);
    const std::string w = " --workers " + std::to_string(workers);
    const std::string log = "c3_log.txt";
    struct Step {
      const char* name;
      std::string args;
    };
    const Step steps[] = {
        {"synth",
         "synth --out data --seed 11 --size 64 --train 6 --test 2 --pretrain 4"},
        {"pretrain",
         "pretrain --manifest data/manifest.jsonl --out pre --epochs 4 "
         "--batch 2 --seed 11"},
        {"train",
         "train --manifest data/manifest.jsonl --out trained --init "
         "pre/pretrain.fscd --epochs 4 --batch 2 --seed 11"},
        {"finetune",
         "finetune --manifest data/manifest.jsonl --out tuned --checkpoint "
         "trained/model.fscd --shots 3 --adapt-epochs 5 --seed 11"},
        {"evaluate",
         "evaluate --checkpoint trained/model.fscd --manifest "
         "data/manifest.jsonl --out eval --mc-samples 5 --seed 11"},
    };
    for (const auto& s : steps)
      if (int rc = run_cli(dir, s.args + w, log); rc != 0)
        return std::string(s.name) + " exited " + std::to_string(rc);
    return "";
  };

  const fs::path a = work_root / "c3_run_a";
  const fs::path b = work_root / "c3_run_b";
  const fs::path c = work_root / "c3_run_w4";
  for (const auto& [dir, workers] :
       std::vector<std::pair<fs::path, int>>{{a, 1}, {b, 1}, {c, 4}})
    if (const std::string err = pipeline(dir, workers); !err.empty())
      return {false, err};

  std::string why;
  size_t files = 0;
  if (!trees_equal(a, b, why, files))
    return {false, "same-seed reruns differ: " + why};
  size_t files_w = 0;
  if (!trees_equal(a, c, why, files_w))
    return {false, "workers 1 vs 4 differ: " + why};
  return {true, std::to_string(files) +
                    " files byte-identical across reruns and worker counts"};
}

// ---------------------------------------------------------------------------
// 4. desk-scale few-shot experiment
// ---------------------------------------------------------------------------
Outcome criterion_few_shot() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = work_root / "c4";
  fs::create_directories(dir);
  const std::string log = "c4_log.txt";

  // Default recipe: 80 train / 20 test change pairs + 64 pretrain scenes,
  // 64x64. Both arms share the corpus, the seed, and every preset value;
  // they differ only in whether the change model starts from the pretrained
  // encoder.
  if (run_cli(dir, "synth --out data --seed 0", log) != 0)
    return {false, "synth failed"};
  if (run_cli(dir, "pretrain --manifest data/manifest.jsonl --out pre --seed 0",
              log) != 0)
    return {false, "pretrain failed"};
  if (run_cli(dir,
              "train --manifest data/manifest.jsonl --out trained_pre --init "
              "pre/pretrain.fscd --seed 0",
              log) != 0)
    return {false, "pretrained-arm train failed"};
  if (run_cli(dir,
              "finetune --manifest data/manifest.jsonl --out tuned_pre "
              "--checkpoint trained_pre/model.fscd --seed 0",
              log) != 0)
    return {false, "pretrained-arm finetune failed"};
  if (run_cli(dir,
              "train --manifest data/manifest.jsonl --out trained_scratch "
              "--seed 0",
              log) != 0)
    return {false, "scratch-arm train failed"};
  if (run_cli(dir,
              "finetune --manifest data/manifest.jsonl --out tuned_scratch "
              "--checkpoint trained_scratch/model.fscd --seed 0",
              log) != 0)
    return {false, "scratch-arm finetune failed"};

  const double iou_pre =
      load_run_record(dir / "tuned_pre" / "run_record.json")
          .metric_aggregates.at("iou");
  const double iou_scratch =
      load_run_record(dir / "tuned_scratch" / "run_record.json")
          .metric_aggregates.at("iou");
  const double secs = seconds_since(t0);

  if (iou_pre < 0.70 || iou_scratch < 0.70)
    return {false, "mean query IoU below 0.70: pretrained " + fmt(iou_pre) +
                       ", scratch " + fmt(iou_scratch)};
  if (!(iou_pre > iou_scratch))
    return {false, "pretraining did not help: " + fmt(iou_pre) +
                       " vs scratch " + fmt(iou_scratch)};
  if (secs > 600.0) return {false, "took " + fmt(secs, 4) + " s (limit 600)"};
  return {true, "K=5 mean query IoU " + fmt(iou_pre) + " pretrained vs " +
                    fmt(iou_scratch) + " scratch, " + fmt(secs, 4) + " s"};
}

// ---------------------------------------------------------------------------
// 5. siamese contract
// ---------------------------------------------------------------------------
Outcome criterion_siamese() {
  ModelConfig cfg;
  cfg.encoder_channels = {8, 16};
  cfg.blocks_per_stage = 1;
  cfg.decoder_stages = 2;
  cfg.tile_size = 32;
  cfg.unit_dropout_rate = 0.3;
  cfg.depth_survival_p = 0.9;
  auto m = build_model<float>(cfg, RngStream(5, 0));

  auto rand_input = [&](RngStream s) {
    std::vector<float> v(size_t(1) * 3 * 32 * 32);
    for (auto& x : v) x = float(s.next_double());
    return Tensor<float>::from_values({1, 3, 32, 32}, std::move(v));
  };
  for (uint64_t i = 0; i < 50; ++i) {
    const auto a = rand_input(RngStream(500 + i, 1));
    const auto b = rand_input(RngStream(500 + i, 2));
    Tape<float> tape;
    tape.set_recording(false);
    const auto pab =
        forward(tape, m, a, b, ForwardMode::Eval, RngStream(0, 0));
    const auto pba =
        forward(tape, m, b, a, ForwardMode::Eval, RngStream(0, 0));
    if (pab.values() != pba.values())
      return {false, "swap changed the prediction on pair " +
                         std::to_string(i)};
  }

  // Tied weights: after perturbing the shared encoder, both branch
  // evaluations of the same input report the identical shifted features.
  const auto x = rand_input(RngStream(7, 7));
  Tape<float> tape;
  tape.set_recording(false);
  const auto before =
      encode_features(tape, m, x, ForwardMode::Eval, RngStream(0, 0));
  m.param("enc.s0.down.w").values()[0] += 0.25f;
  const auto branch1 =
      encode_features(tape, m, x, ForwardMode::Eval, RngStream(0, 0));
  const auto branch2 =
      encode_features(tape, m, x, ForwardMode::Eval, RngStream(0, 0));
  for (size_t s = 0; s < branch1.size(); ++s) {
    if (branch1[s].values() != branch2[s].values())
      return {false, "branches disagree after perturbation at stage " +
                         std::to_string(s)};
    if (branch1[s].values() == before[s].values())
      return {false, "perturbation did not reach stage " + std::to_string(s)};
  }
  return {true, "50 swap pairs bit-identical; encoder perturbation shifts "
                "both branches identically"};
}

// ---------------------------------------------------------------------------
// 6. split protocol
// ---------------------------------------------------------------------------
Outcome criterion_split_protocol() {
  const DatasetManifest tmpl = load_manifest(template_path);
  const SplitCounts counts = split_report(tmpl);
  if (counts.train != 150 || counts.test != 40)
    return {false, "template reports " + std::to_string(counts.train) + "/" +
                       std::to_string(counts.test) + " train/test"};

  // Stand-in for "user supplies real LEVIR-CD files": materialize 64x64
  // crops at exactly the paths the template names, then run `evaluate`
  // against it unmodified. No metric threshold at this scale.
  const fs::path dir = work_root / "c6";
  fs::create_directories(dir);
  fs::copy_file(template_path, dir / "manifest.jsonl");
  SynthParams sp;
  sp.size = 64;
  sp.seed = 6;
  uint64_t index = 0;
  for (const auto& e : tmpl.entries) {
    const BitemporalSample s = synth_sample(sp, index++);
    fs::create_directories((dir / e.t1_path).parent_path());
    fs::create_directories((dir / e.t2_path).parent_path());
    fs::create_directories((dir / e.mask_path).parent_path());
    write_png_rgb8(dir / e.t1_path, s.t1);
    write_png_rgb8(dir / e.t2_path, s.t2);
    MaskU8 levels(s.mask.h, s.mask.w);
    for (size_t i = 0; i < levels.v.size(); ++i)
      levels.v[i] = s.mask.v[i] ? 255 : 0;
    write_png_gray8(dir / e.mask_path, levels);
  }

  // Any 64-tile change checkpoint will do; train a quick one.
  const std::string log = "c6_log.txt";
  if (run_cli(dir,
              "synth --out tiny --seed 6 --size 64 --train 4 --test 2 "
              "--pretrain 2",
              log) != 0)
    return {false, "stand-in synth failed"};
  if (run_cli(dir,
              "train --manifest tiny/manifest.jsonl --out model --epochs 2 "
              "--batch 2 --seed 6",
              log) != 0)
    return {false, "stand-in train failed"};
  if (int rc = run_cli(dir,
                       "evaluate --checkpoint model/model.fscd --manifest "
                       "manifest.jsonl --out eval --mc-samples 5 --seed 6",
                       log);
      rc != 0)
    return {false, "evaluate on the template exited " + std::to_string(rc)};
  if (!fs::exists(dir / "eval" / "metrics.json"))
    return {false, "evaluate left no metrics.json"};
  return {true, "template = 150 train / 40 test; evaluate ran end-to-end on "
                "64x64 stand-in crops"};
}

// ---------------------------------------------------------------------------
// 7. metric oracles
// ---------------------------------------------------------------------------
Outcome criterion_metrics() {
  RngStream rng(7, 0);
  for (int trial = 0; trial < 100; ++trial) {
    MaskU8 pred(8, 8), truth(8, 8);
    for (auto& v : pred.v) v = rng.next_double() < 0.5 ? 0 : 1;
    for (auto& v : truth.v) v = rng.next_double() < 0.5 ? 0 : 1;
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
      if (pred.v[i] && truth.v[i]) ++tp;
      else if (pred.v[i]) ++fp;
      else if (truth.v[i]) ++fn;
      else ++tn;
    }
    const ConfusionCounts c = confusion(pred, truth);
    if (c.tp != tp || c.fp != fp || c.fn != fn || c.tn != tn)
      return {false, "confusion tally mismatch on trial " +
                         std::to_string(trial)};
    auto ratio = [](int64_t num, int64_t den) {
      return den == 0 ? 0.0 : double(num) / double(den);
    };
    if (iou(c) != ratio(tp, tp + fp + fn) ||
        precision(c) != ratio(tp, tp + fp) || recall(c) != ratio(tp, tp + fn))
      return {false, "ratio mismatch on trial " + std::to_string(trial)};
    const double f1_brute = (2 * tp + fp + fn) == 0
                                ? 0.0
                                : 2.0 * double(tp) / double(2 * tp + fp + fn);
    if (std::abs(f1(c) - f1_brute) > 1e-15)
      return {false, "f1 mismatch on trial " + std::to_string(trial)};
  }

  // Worked 1/3 overlap: two 2x2 blocks sharing a 2x1 strip.
  MaskU8 pred(4, 4), truth(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      pred.at(i, j) = 1;       // rows 0-1, cols 0-1
      truth.at(i, j + 1) = 1;  // rows 0-1, cols 1-2
    }
  const double third = iou(confusion(pred, truth));
  if (std::abs(third - 1.0 / 3.0) > 1e-12)
    return {false, "1/3 overlap case gave " + fmt(third)};

  const ConfusionCounts empty = confusion(MaskU8(4, 4), MaskU8(4, 4));
  if (iou(empty) != 1.0 || precision(empty) != 1.0 || recall(empty) != 1.0 ||
      f1(empty) != 1.0)
    return {false, "empty-vs-empty convention broken"};
  return {true, "100 random 8x8 pairs match brute force; 1/3-IoU and "
                "empty = 1.0 conventions hold"};
}

// ---------------------------------------------------------------------------
// 8. fusion comparison
// ---------------------------------------------------------------------------
Outcome criterion_compare() {
  const fs::path dir = work_root / "c8";
  fs::create_directories(dir);
  const fs::path data = work_root / "c4" / "data";
  std::string manifest = (data / "manifest.jsonl").string();
  if (!fs::exists(manifest)) {
    if (run_cli(dir, "synth --out data --seed 0", "c8_log.txt") != 0)
      return {false, "synth failed"};
    manifest = (dir / "data" / "manifest.jsonl").string();
  }
  if (int rc = run_cli(dir,
                       "compare --manifest '" + manifest +
                           "' --out report --mc-samples 5 --seed 8",
                       "c8_log.txt");
      rc != 0)
    return {false, "compare exited " + std::to_string(rc)};

  const auto rows = load_comparison_json(dir / "report" / "comparison.json");
  if (rows.size() != 3)
    return {false, std::to_string(rows.size()) + " variants in the report"};
  std::string summary;
  for (const auto& r : rows) {
    if (!(r.final_loss < 0.5 * r.first_loss))
      return {false, r.variant + " final loss " + fmt(r.final_loss) +
                         " not below half of " + fmt(r.first_loss)};
    summary += (summary.empty() ? "" : ", ") + r.variant + " " +
               fmt(r.first_loss, 3) + "->" + fmt(r.final_loss, 3);
  }
  return {true, summary};
}

// ---------------------------------------------------------------------------
// 9. checkpoint format
// ---------------------------------------------------------------------------
Outcome criterion_checkpoint() {
  ModelConfig cfg;
  cfg.encoder_channels = {4, 8};
  cfg.blocks_per_stage = 1;
  cfg.decoder_stages = 2;
  cfg.tile_size = 16;
  const auto m = build_model<float>(cfg, RngStream(9, 0));
  const fs::path dir = work_root / "c9";
  fs::create_directories(dir);
  const fs::path path = dir / "model.fscd";
  save_checkpoint(m, path);
  const auto loaded = load_checkpoint(path);
  for (size_t i = 0; i < m.params.size(); ++i)
    if (loaded.params[i].second.values() != m.params[i].second.values())
      return {false, "round trip changed " + m.params[i].first};
  save_checkpoint(loaded, dir / "again.fscd");
  if (slurp(path) != slurp(dir / "again.fscd"))
    return {false, "re-serialization is not byte-identical"};

  const std::vector<uint8_t> good = slurp(path);
  auto corrupted_kind = [&](std::vector<uint8_t> bytes,
                            const char* label) -> std::string {
    const fs::path p = dir / (std::string(label) + ".fscd");
    std::ofstream(p, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()),
               std::streamsize(bytes.size()));
    try {
      load_checkpoint(p);
      return "no error";
    } catch (const CheckpointError& e) {
      switch (e.kind) {
        case CheckpointError::Kind::BadMagic: return "BadMagic";
        case CheckpointError::Kind::BadVersion: return "BadVersion";
        case CheckpointError::Kind::Truncated: return "Truncated";
        case CheckpointError::Kind::NameSetMismatch: return "NameSetMismatch";
      }
      return "unknown";
    } catch (const std::exception& e) {
      return std::string("wrong type: ") + e.what();
    }
  };

  auto magic = good;
  magic[0] = 'X';
  auto version = good;
  version[4] = 2;
  auto truncated = good;
  truncated.resize(truncated.size() - 9);
  const std::string k1 = corrupted_kind(magic, "magic");
  const std::string k2 = corrupted_kind(version, "version");
  const std::string k3 = corrupted_kind(truncated, "truncated");
  if (k1 != "BadMagic" || k2 != "BadVersion" || k3 != "Truncated")
    return {false, "corruption kinds were " + k1 + "/" + k2 + "/" + k3};
  return {true,
          "round trip bit-exact; magic/version/truncation raise BadMagic/"
          "BadVersion/Truncated"};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") cli_path = argv[i + 1];
    else if (flag == "--manifest-template") template_path = argv[i + 1];
    else {
      std::cerr << "unknown flag " << flag << "\n";
      return 2;
    }
  }
  if (cli_path.empty() || template_path.empty()) {
    std::cerr << "usage: fscd_acceptance --cli <fscd> --manifest-template "
                 "<jsonl>\n";
    return 2;
  }
  cli_path = fs::absolute(cli_path).string();  // commands run from other cwds
  template_path = fs::absolute(template_path);

  work_root = fs::temp_directory_path() /
              ("fscd_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work_root);
  fs::create_directories(work_root);

  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"gradient correctness", criterion_gradients},
      {"uncertainty identities", criterion_uncertainty},
      {"determinism", criterion_determinism},
      {"desk-scale few-shot experiment", criterion_few_shot},
      {"siamese contract", criterion_siamese},
      {"split protocol", criterion_split_protocol},
      {"metric oracles", criterion_metrics},
      {"fusion comparison", criterion_compare},
      {"checkpoint format", criterion_checkpoint},
  };

  bool all_pass = true;
  for (size_t i = 0; i < std::size(criteria); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << (i + 1) << " (" << criteria[i].name
              << "): " << (o.pass ? "PASS" : "FAIL") << " — " << o.detail
              << std::endl;
  }

  std::error_code ec;
  fs::remove_all(work_root, ec);
  return all_pass ? 0 : 1;
}
