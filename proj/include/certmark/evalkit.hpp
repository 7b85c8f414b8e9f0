#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "certmark/smoothing.hpp"
#include "certmark/wmgen.hpp"

namespace certmark {

// z = (g - gamma*T) / sqrt(T*gamma*(1-gamma)) where T is the number of scored
// (w+1)-windows and g the count of green ones.
double z_score(const TokenSeq& seq, const GeneratorModel& gen, double gamma,
               const GenParams& params);

struct ConfusionMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
  double f1 = 0.0;
};

// Standard confusion metrics with ABSTAIN mapped to the negative class
// (conservative for the watermark owner). Positives = watermarked.
ConfusionMetrics confusion_metrics(const std::vector<Label>& preds,
                                   const std::vector<int>& truth);

// F1 implied by operating rates on a fixed class balance.
double f1_from_rates(double tpr, double fpr, int n_pos, int n_neg);

// Fraction of samples whose certificate is correct, non-abstaining, and has
// radius >= r, for each r in the grid. Non-increasing in r by construction.
enum class RadiusSpace { embedding, permutation };
std::vector<double> certified_accuracy(const std::vector<CertifiedResult>& results,
                                       const std::vector<int>& truth,
                                       const std::vector<double>& radius_grid,
                                       RadiusSpace space);

// Long-text detection: split into `window`-token segments every `stride`
// tokens and report watermarked iff any segment is. Equals a single plain
// detection when the text fits in one window.
bool sliding_window_detect(const std::function<bool(const TokenSeq&)>& detect_fn,
                           const TokenSeq& seq, int window = 200, int stride = 100);

struct EmbeddingStats {
  double mean_norm = 0.0;
  double mean_pair_distance = 0.0;
  std::vector<std::int64_t> norm_hist;       // 32 equal-width bins
  std::vector<std::int64_t> distance_hist;   // 32 equal-width bins
  double norm_min = 0.0, norm_max = 0.0;
  double dist_min = 0.0, dist_max = 0.0;
  std::int64_t pairs_used = 0;  // subsampled (fixed seed) above 10^6 pairs
};
EmbeddingStats embedding_stats(const Vocabulary& vocab);

// floor((rad_e / mean_pair_distance)^2): replacing k tokens moves E by about
// mean_distance * sqrt(k) in Frobenius norm.
int tokens_tolerated(double rad_e, double mean_pair_distance);

struct SampleRecord {
  int id = 0;
  int label = 0;
  Label prediction = Label::abstain;
  double p_value = 1.0;
  double pA_lower = 0.0;
  double rad_e = 0.0;
  double rad_p = 0.0;
  double z = 0.0;
};

struct EvalReport {
  std::vector<SampleRecord> samples;
  ConfusionMetrics metrics;
  std::vector<double> radius_grid_e, curve_e;
  std::vector<double> radius_grid_p, curve_p;
  std::map<std::string, std::string> metadata;  // config echo, seeds, versions
};

// Bit-stable emission: identical reports produce identical bytes.
void emit_report(const EvalReport& report, const std::string& path,
                 const std::string& format);  // "json" or "csv"

// Inverse of the json emitter; emit(parse(emit(r))) == emit(r).
EvalReport parse_report(const std::string& path);

}  // namespace certmark
