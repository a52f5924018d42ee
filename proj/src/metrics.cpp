#include "fscd/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fscd/errors.hpp"

namespace fscd {

namespace {

bool truth_and_pred_empty(const ConfusionCounts& c) {
  return c.tp == 0 && c.fp == 0 && c.fn == 0;
}

double ratio(int64_t num, int64_t den) {
  return den == 0 ? 0.0 : double(num) / double(den);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string fixed6(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

MaskU8 binarize(const RasterD& prob, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("binarize threshold must lie in [0,1]");
  MaskU8 out(prob.h, prob.w);
  for (size_t i = 0; i < prob.v.size(); ++i) {
    if (!(prob.v[i] >= 0.0 && prob.v[i] <= 1.0))
      throw std::invalid_argument("binarize input probability outside [0,1]");
    out.v[i] = uint8_t(prob.v[i] > threshold ? 1 : 0);
  }
  return out;
}

ConfusionCounts confusion(const MaskU8& pred, const MaskU8& truth) {
  if (pred.h != truth.h || pred.w != truth.w)
    throw std::invalid_argument("confusion: prediction and truth shapes differ");
  ConfusionCounts c;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const bool p = pred.v[i] != 0, t = truth.v[i] != 0;
    if (p && t) ++c.tp;
    else if (p && !t) ++c.fp;
    else if (!p && t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double iou(const ConfusionCounts& c) {
  if (truth_and_pred_empty(c)) return 1.0;
  return ratio(c.tp, c.tp + c.fp + c.fn);
}

double precision(const ConfusionCounts& c) {
  if (truth_and_pred_empty(c)) return 1.0;
  return ratio(c.tp, c.tp + c.fp);
}

double recall(const ConfusionCounts& c) {
  if (truth_and_pred_empty(c)) return 1.0;
  return ratio(c.tp, c.tp + c.fn);
}

double f1(const ConfusionCounts& c) {
  if (truth_and_pred_empty(c)) return 1.0;
  const double p = precision(c), r = recall(c);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double mean_entropy(const RasterD& map) {
  if (map.v.empty()) return 0.0;
  double sum = 0.0;
  for (double v : map.v) sum += v;
  return sum / double(map.v.size());
}

MetricsReport make_report(std::vector<SceneMetrics> scenes) {
  std::sort(scenes.begin(), scenes.end(),
            [](const SceneMetrics& a, const SceneMetrics& b) { return a.id < b.id; });
  MetricsReport r;
  r.scenes = std::move(scenes);
  if (!r.scenes.empty()) {
    for (const auto& s : r.scenes) {
      r.aggregate.iou += s.iou;
      r.aggregate.precision += s.precision;
      r.aggregate.recall += s.recall;
      r.aggregate.f1 += s.f1;
      r.aggregate.mean_entropy += s.mean_entropy;
    }
    const double n = double(r.scenes.size());
    r.aggregate.iou /= n;
    r.aggregate.precision /= n;
    r.aggregate.recall /= n;
    r.aggregate.f1 /= n;
    r.aggregate.mean_entropy /= n;
  }
  return r;
}

void write_report_json(const MetricsReport& report,
                       const std::filesystem::path& path) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : report.scenes)
    scenes.push_back({{"id", s.id},
                      {"iou", s.iou},
                      {"precision", s.precision},
                      {"recall", s.recall},
                      {"f1", s.f1},
                      {"mean_entropy", s.mean_entropy}});
  nlohmann::json j{{"scenes", scenes},
                   {"aggregate",
                    {{"iou", report.aggregate.iou},
                     {"precision", report.aggregate.precision},
                     {"recall", report.aggregate.recall},
                     {"f1", report.aggregate.f1},
                     {"mean_entropy", report.aggregate.mean_entropy}}}};
  open_out(path) << j.dump(2) << "\n";
}

void write_report_csv(const MetricsReport& report,
                      const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "id,iou,precision,recall,f1,mean_entropy\n";
  auto row = [&](const std::string& id, double i, double p, double r, double f,
                 double e) {
    out << id << ',' << fixed6(i) << ',' << fixed6(p) << ',' << fixed6(r)
        << ',' << fixed6(f) << ',' << fixed6(e) << '\n';
  };
  for (const auto& s : report.scenes)
    row(s.id, s.iou, s.precision, s.recall, s.f1, s.mean_entropy);
  const auto& a = report.aggregate;
  row("mean", a.iou, a.precision, a.recall, a.f1, a.mean_entropy);
}

MetricsReport load_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed metrics report: " + e.what());
  }
  MetricsReport r;
  for (const auto& s : j.at("scenes")) {
    SceneMetrics m;
    m.id = s.at("id").get<std::string>();
    m.iou = s.at("iou").get<double>();
    m.precision = s.at("precision").get<double>();
    m.recall = s.at("recall").get<double>();
    m.f1 = s.at("f1").get<double>();
    m.mean_entropy = s.at("mean_entropy").get<double>();
    r.scenes.push_back(std::move(m));
  }
  const auto& a = j.at("aggregate");
  r.aggregate.iou = a.at("iou").get<double>();
  r.aggregate.precision = a.at("precision").get<double>();
  r.aggregate.recall = a.at("recall").get<double>();
  r.aggregate.f1 = a.at("f1").get<double>();
  r.aggregate.mean_entropy = a.at("mean_entropy").get<double>();
  return r;
}

std::vector<ComparisonRow> compare_variants(
    const std::vector<VariantResult>& results) {
  if (results.empty())
    throw std::invalid_argument("compare_variants: no variants given");
  auto id_set = [](const VariantResult& v) {
    std::set<std::string> ids;
    for (const auto& s : v.scenes) ids.insert(s.id);
    return ids;
  };
  const auto reference = id_set(results.front());
  for (const auto& v : results)
    if (id_set(v) != reference)
      throw std::invalid_argument(
          "compare_variants: variant '" + v.variant +
          "' covers a different scene set than '" + results.front().variant +
          "'");
  std::vector<ComparisonRow> rows;
  for (const auto& v : results) {
    const MetricsReport rep = make_report(v.scenes);
    ComparisonRow row;
    row.variant = v.variant;
    row.precision = rep.aggregate.precision;
    row.iou = rep.aggregate.iou;
    row.mean_entropy = rep.aggregate.mean_entropy;
    row.first_loss = v.first_loss;
    row.final_loss = v.final_loss;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_comparison_json(const std::vector<ComparisonRow>& rows,
                           const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"variant", r.variant},
                   {"precision", r.precision},
                   {"iou", r.iou},
                   {"mean_entropy", r.mean_entropy},
                   {"first_loss", r.first_loss},
                   {"final_loss", r.final_loss}});
  open_out(path) << nlohmann::json{{"variants", arr}}.dump(2) << "\n";
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                          const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "variant,precision,iou,mean_entropy,first_loss,final_loss\n";
  for (const auto& r : rows)
    out << r.variant << ',' << fixed6(r.precision) << ',' << fixed6(r.iou)
        << ',' << fixed6(r.mean_entropy) << ',' << fixed6(r.first_loss) << ','
        << fixed6(r.final_loss) << '\n';
}

std::vector<ComparisonRow> load_comparison_json(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed comparison report: " + e.what());
  }
  std::vector<ComparisonRow> rows;
  for (const auto& r : j.at("variants")) {
    ComparisonRow row;
    row.variant = r.at("variant").get<std::string>();
    row.precision = r.at("precision").get<double>();
    row.iou = r.at("iou").get<double>();
    row.mean_entropy = r.at("mean_entropy").get<double>();
    row.first_loss = r.at("first_loss").get<double>();
    row.final_loss = r.at("final_loss").get<double>();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fscd
