#include "certmark/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "certmark/errors.hpp"

#include "json.hpp"

namespace certmark {

double z_score(const TokenSeq& seq, const GeneratorModel& gen, double gamma,
               const GenParams& params) {
  const int w = params.w;
  const int n = static_cast<int>(seq.ids.size());
  if (n <= w) throw DataError("z_score: sequence too short to score");
  const int t_count = n - w;
  int g = 0;
  for (int i = w; i < n; ++i) {
    if (gen.is_green({seq.ids.data() + i - w, static_cast<std::size_t>(w + 1)})) ++g;
  }
  return (g - gamma * t_count) / std::sqrt(t_count * gamma * (1.0 - gamma));
}

ConfusionMetrics confusion_metrics(const std::vector<Label>& preds,
                                   const std::vector<int>& truth) {
  if (preds.size() != truth.size()) {
    throw DataError("confusion_metrics: prediction/truth length mismatch");
  }
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool pred_pos = preds[i] == Label::watermarked;  // ABSTAIN -> negative
    if (truth[i] == 1) {
      (pred_pos ? tp : fn)++;
    } else {
      (pred_pos ? fp : tn)++;
    }
  }
  ConfusionMetrics m;
  m.tpr = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.fpr = fp + tn > 0 ? static_cast<double>(fp) / (fp + tn) : 0.0;
  m.f1 = 2 * tp + fp + fn > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
  return m;
}

double f1_from_rates(double tpr, double fpr, int n_pos, int n_neg) {
  const double tp = tpr * n_pos;
  const double fn = n_pos - tp;
  const double fp = fpr * n_neg;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

std::vector<double> certified_accuracy(const std::vector<CertifiedResult>& results,
                                       const std::vector<int>& truth,
                                       const std::vector<double>& radius_grid,
                                       RadiusSpace space) {
  if (results.size() != truth.size()) {
    throw DataError("certified_accuracy: results/truth length mismatch");
  }
  if (results.empty()) throw DataError("certified_accuracy: no results");
  std::vector<double> curve(radius_grid.size(), 0.0);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.label == Label::abstain) continue;
    if (static_cast<int>(r.label) != truth[i]) continue;
    const double rad = space == RadiusSpace::embedding ? r.rad_e : r.rad_p;
    for (std::size_t j = 0; j < radius_grid.size(); ++j) {
      if (rad >= radius_grid[j]) curve[j] += 1.0;
    }
  }
  for (double& v : curve) v /= static_cast<double>(results.size());
  return curve;
}

bool sliding_window_detect(const std::function<bool(const TokenSeq&)>& detect_fn,
                           const TokenSeq& seq, int window, int stride) {
  if (window < 1 || stride < 1 || stride > window) {
    throw std::invalid_argument("sliding_window_detect: need window >= stride >= 1");
  }
  const int n = static_cast<int>(seq.ids.size());
  for (int start = 0;; start += stride) {
    const int end = std::min(start + window, n);
    TokenSeq piece;
    piece.ns = seq.ns;
    piece.ids.assign(seq.ids.begin() + start, seq.ids.begin() + end);
    if (detect_fn(piece)) return true;
    if (end >= n) return false;
  }
}

EmbeddingStats embedding_stats(const Vocabulary& vocab) {
  const int v = vocab.size();
  if (v < 2) throw DataError("embedding_stats: need at least two tokens");

  EmbeddingStats s;
  std::vector<double> norms(v);
  for (int i = 0; i < v; ++i) {
    double ss = 0.0;
    for (double x : vocab.embedding(i)) ss += x * x;
    norms[i] = std::sqrt(ss);
    s.mean_norm += norms[i];
  }
  s.mean_norm /= v;

  const auto dist = [&](int a, int b) {
    const auto ea = vocab.embedding(a), eb = vocab.embedding(b);
    double ss = 0.0;
    for (std::size_t c = 0; c < ea.size(); ++c) {
      const double diff = ea[c] - eb[c];
      ss += diff * diff;
    }
    return std::sqrt(ss);
  };

  constexpr std::int64_t kMaxPairs = 1000000;
  const std::int64_t all_pairs = static_cast<std::int64_t>(v) * (v - 1) / 2;
  std::vector<double> dists;
  if (all_pairs <= kMaxPairs) {
    dists.reserve(all_pairs);
    for (int a = 0; a < v; ++a) {
      for (int b = a + 1; b < v; ++b) dists.push_back(dist(a, b));
    }
  } else {
    // Documented fixed-seed subsample.
    CounterRng rng(12345);
    dists.reserve(kMaxPairs);
    while (static_cast<std::int64_t>(dists.size()) < kMaxPairs) {
      const int a = static_cast<int>(rng.next_below(v));
      const int b = static_cast<int>(rng.next_below(v));
      if (a == b) continue;
      dists.push_back(dist(a, b));
    }
  }
  s.pairs_used = static_cast<std::int64_t>(dists.size());
  double sum = 0.0;
  for (double d : dists) sum += d;
  s.mean_pair_distance = sum / static_cast<double>(dists.size());

  const auto histogram = [](const std::vector<double>& xs, double& lo, double& hi) {
    std::vector<std::int64_t> h(32, 0);
    lo = *std::min_element(xs.begin(), xs.end());
    hi = *std::max_element(xs.begin(), xs.end());
    const double width = hi > lo ? (hi - lo) / 32.0 : 1.0;
    for (double x : xs) {
      const int bin = std::min(31, static_cast<int>((x - lo) / width));
      h[bin]++;
    }
    return h;
  };
  s.norm_hist = histogram(norms, s.norm_min, s.norm_max);
  s.distance_hist = histogram(dists, s.dist_min, s.dist_max);
  return s;
}

int tokens_tolerated(double rad_e, double mean_pair_distance) {
  if (mean_pair_distance <= 0.0) {
    throw std::invalid_argument("tokens_tolerated: mean distance must be > 0");
  }
  const double ratio = rad_e / mean_pair_distance;
  return static_cast<int>(ratio * ratio);
}

namespace {

std::string label_name(Label l) {
  switch (l) {
    case Label::unwatermarked: return "unwatermarked";
    case Label::watermarked: return "watermarked";
    default: return "abstain";
  }
}

}  // namespace

void emit_report(const EvalReport& report, const std::string& path,
                 const std::string& format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path);

  if (format == "csv") {
    out << "id,label,prediction,p_value,pa_lower,rad_e,rad_p,z\n";
    std::ostringstream row;
    row.precision(17);
    for (const auto& r : report.samples) {
      row.str("");
      row << r.id << ',' << r.label << ',' << label_name(r.prediction) << ','
          << r.p_value << ',' << r.pA_lower << ',' << r.rad_e << ',' << r.rad_p
          << ',' << r.z << '\n';
      out << row.str();
    }
    return;
  }
  if (format != "json") throw std::invalid_argument("emit_report: unknown format " + format);

  nlohmann::json j;
  j["metadata"] = report.metadata;
  j["aggregates"] = {
      {"tpr", report.metrics.tpr},
      {"fpr", report.metrics.fpr},
      {"f1", report.metrics.f1},
  };
  if (!report.radius_grid_e.empty()) {
    j["aggregates"]["certified_accuracy_embedding"] = {
        {"radius", report.radius_grid_e}, {"accuracy", report.curve_e}};
  }
  if (!report.radius_grid_p.empty()) {
    j["aggregates"]["certified_accuracy_permutation"] = {
        {"radius", report.radius_grid_p}, {"accuracy", report.curve_p}};
  }
  auto& samples = j["samples"] = nlohmann::json::array();
  for (const auto& r : report.samples) {
    samples.push_back({{"id", r.id},
                       {"label", r.label},
                       {"prediction", label_name(r.prediction)},
                       {"p_value", r.p_value},
                       {"pa_lower", r.pA_lower},
                       {"rad_e", r.rad_e},
                       {"rad_p", r.rad_p},
                       {"z", r.z}});
  }
  out << j.dump(2) << '\n';
}

EvalReport parse_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": not a json report: " + e.what());
  }

  EvalReport report;
  try {
    if (j.contains("metadata"))
      report.metadata = j["metadata"].get<std::map<std::string, std::string>>();
    const auto& agg = j.at("aggregates");
    report.metrics.tpr = agg.at("tpr").get<double>();
    report.metrics.fpr = agg.at("fpr").get<double>();
    report.metrics.f1 = agg.at("f1").get<double>();
    if (agg.contains("certified_accuracy_embedding")) {
      report.radius_grid_e =
          agg["certified_accuracy_embedding"].at("radius").get<std::vector<double>>();
      report.curve_e =
          agg["certified_accuracy_embedding"].at("accuracy").get<std::vector<double>>();
    }
    if (agg.contains("certified_accuracy_permutation")) {
      report.radius_grid_p =
          agg["certified_accuracy_permutation"].at("radius").get<std::vector<double>>();
      report.curve_p =
          agg["certified_accuracy_permutation"].at("accuracy").get<std::vector<double>>();
    }
    for (const auto& s : j.at("samples")) {
      SampleRecord r;
      r.id = s.at("id").get<int>();
      r.label = s.at("label").get<int>();
      const auto name = s.at("prediction").get<std::string>();
      r.prediction = name == "watermarked"     ? Label::watermarked
                     : name == "unwatermarked" ? Label::unwatermarked
                                               : Label::abstain;
      r.p_value = s.at("p_value").get<double>();
      r.pA_lower = s.at("pa_lower").get<double>();
      r.rad_e = s.at("rad_e").get<double>();
      r.rad_p = s.at("rad_p").get<double>();
      r.z = s.at("z").get<double>();
      report.samples.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": report schema violation: " + e.what());
  }
  return report;
}

}  // namespace certmark
