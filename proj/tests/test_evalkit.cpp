// Evaluation toolkit: z-scores, confusion metrics, certified-accuracy curves,
// sliding-window detection, embedding geometry, and report serialization.
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "certmark/errors.hpp"
#include "certmark/evalkit.hpp"
#include "certmark/rng.hpp"
#include "certmark/smoothing.hpp"
#include "certmark/tokenspace.hpp"
#include "certmark/wmgen.hpp"

#include "fixtures.hpp"

using namespace certmark;

namespace {

// Generator whose score network is identically zero, so green-ness is decided
// purely by the sign of tau: tau < 0 -> every window green, tau > 0 -> none.
GeneratorModel constant_generator(const Vocabulary& vocab, int w, double gamma,
                                  double tau) {
  const std::size_t n1 = static_cast<std::size_t>(64) * (w + 1) * vocab.dim();
  return GeneratorModel::from_parts(1, vocab, w, gamma, tau,
                                    std::vector<double>(n1, 0.0),
                                    std::vector<double>(64, 0.0));
}

TokenSeq random_ref_seq(std::uint64_t seed, int n) {
  const auto& ref = fixtures::ref_vocab();
  CounterRng rng(seed);
  TokenSeq s;
  s.ns = Ns::reference;
  s.ids.resize(n);
  for (auto& id : s.ids) id = static_cast<int>(rng.next_below(ref.size()));
  return s;
}

}  // namespace

TEST_CASE("z_score: degenerate generators hit the closed form exactly") {
  const auto& ref = fixtures::ref_vocab();
  GenParams params;  // w = 2
  const auto seq = random_ref_seq(31, 102);  // T = n - w = 100 windows

  const auto all_green = constant_generator(ref, params.w, 0.5, -1.0);
  const auto none_green = constant_generator(ref, params.w, 0.5, 1.0);

  // g = T: z = T(1-gamma) / sqrt(T gamma (1-gamma)) = sqrt(T) for gamma = 1/2.
  CHECK(z_score(seq, all_green, 0.5, params) == 10.0);
  CHECK(z_score(seq, none_green, 0.5, params) == -10.0);

  // Same identity at an asymmetric gamma, evaluated with the same arithmetic.
  const double expect = (100.0 - 0.25 * 100) / std::sqrt(100 * 0.25 * 0.75);
  CHECK(z_score(seq, all_green, 0.25, params) == expect);

  // One window is the minimum scoreable length.
  TokenSeq tiny;
  tiny.ns = Ns::reference;
  tiny.ids = {1, 2, 3};
  CHECK(z_score(tiny, all_green, 0.5, params) == 1.0);  // (1 - 0.5) / 0.5
  tiny.ids = {1, 2};
  CHECK_THROWS_AS(z_score(tiny, all_green, 0.5, params), DataError);
  tiny.ids.clear();
  CHECK_THROWS_AS(z_score(tiny, all_green, 0.5, params), DataError);
}

TEST_CASE("z_score: agrees with a manual window count under the fixture key") {
  const auto& gen = fixtures::generator();
  GenParams params;
  const auto seq = random_ref_seq(77, 150);

  int g = 0;
  const int n = static_cast<int>(seq.ids.size());
  for (int i = params.w; i < n; ++i) {
    std::span<const int> window(seq.ids.data() + i - params.w, params.w + 1);
    if (gen.is_green(window)) ++g;
  }
  const int t = n - params.w;
  const double expect = (g - 0.5 * t) / std::sqrt(t * 0.5 * 0.5);
  CHECK(z_score(seq, gen, 0.5, params) == expect);

  // Random text should sit near zero; +/-4 sigma is a generous envelope.
  CHECK(std::abs(expect) < 4.0);
}

TEST_CASE("confusion_metrics: exact fractions, abstain counts as negative") {
  const std::vector<Label> preds = {
      Label::watermarked, Label::watermarked, Label::unwatermarked, Label::abstain,
      Label::unwatermarked, Label::unwatermarked, Label::watermarked, Label::abstain};
  const std::vector<int> truth = {1, 1, 1, 1, 0, 0, 0, 0};
  // tp=2, fn=2 (miss + abstain), fp=1, tn=3 (abstain on a negative is a tn).
  const auto m = confusion_metrics(preds, truth);
  CHECK(m.tpr == 0.5);
  CHECK(m.fpr == 0.25);
  CHECK(m.f1 == doctest::Approx(4.0 / 7.0).epsilon(1e-15));

  const std::vector<Label> perfect = {Label::watermarked, Label::unwatermarked};
  const auto p = confusion_metrics(perfect, {1, 0});
  CHECK(p.tpr == 1.0);
  CHECK(p.fpr == 0.0);
  CHECK(p.f1 == 1.0);

  const std::vector<Label> all_neg(4, Label::unwatermarked);
  const auto q = confusion_metrics(all_neg, {1, 1, 0, 0});
  CHECK(q.tpr == 0.0);
  CHECK(q.fpr == 0.0);
  CHECK(q.f1 == 0.0);

  CHECK_THROWS_AS(confusion_metrics(perfect, {1, 0, 1}), DataError);
}

TEST_CASE("f1_from_rates: reference operating point and count identity") {
  const double f1 = f1_from_rates(0.994, 0.012, 500, 500);
  CHECK(std::abs(f1 - 0.991) < 0.0005);

  // Same operating point realized as integer counts: tp=497 fn=3 fp=6 tn=494.
  std::vector<Label> preds;
  std::vector<int> truth;
  auto add = [&](int n, Label l, int t) {
    preds.insert(preds.end(), n, l);
    truth.insert(truth.end(), n, t);
  };
  add(497, Label::watermarked, 1);
  add(3, Label::unwatermarked, 1);
  add(6, Label::watermarked, 0);
  add(494, Label::unwatermarked, 0);
  const auto m = confusion_metrics(preds, truth);
  CHECK(std::abs(m.f1 - f1) < 1e-12);
  CHECK(std::abs(m.tpr - 0.994) < 1e-15);
  CHECK(std::abs(m.fpr - 0.012) < 1e-15);

  CHECK(f1_from_rates(0.0, 0.012, 500, 500) == 0.0);
}

TEST_CASE("certified_accuracy: hand-built certificates, both radius spaces") {
  auto cert = [](Label l, double rad_e, double rad_p) {
    CertifiedResult r;
    r.label = l;
    r.rad_e = rad_e;
    r.rad_p = rad_p;
    return r;
  };
  const std::vector<CertifiedResult> results = {
      cert(Label::watermarked, 10.0, 3.0),    // correct, roomy
      cert(Label::watermarked, 3.0, 1.0),     // correct, tight
      cert(Label::unwatermarked, 50.0, 9.0),  // wrong label: never counts
      cert(Label::abstain, 99.0, 99.0),       // abstain: never counts
      cert(Label::unwatermarked, 7.0, 0.5),   // correct negative
  };
  const std::vector<int> truth = {1, 1, 1, 1, 0};

  const auto e = certified_accuracy(results, truth, {0.0, 5.0, 20.0},
                                    RadiusSpace::embedding);
  REQUIRE(e.size() == 3);
  CHECK(e[0] == 0.6);  // three correct non-abstaining certificates
  CHECK(e[1] == 0.4);  // rad_e >= 5: the 10.0 and 7.0 ones
  CHECK(e[2] == 0.0);

  const auto p = certified_accuracy(results, truth, {0.0, 2.0},
                                    RadiusSpace::permutation);
  CHECK(p[0] == 0.6);
  CHECK(p[1] == 0.2);  // only rad_p = 3.0 survives

  // Non-increasing along any grid.
  const std::vector<double> grid = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  const auto curve = certified_accuracy(results, truth, grid, RadiusSpace::embedding);
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);

  CHECK_THROWS_AS(certified_accuracy({}, {}, {0.0}, RadiusSpace::embedding), DataError);
  CHECK_THROWS_AS(certified_accuracy(results, {1, 1}, {0.0}, RadiusSpace::embedding),
                  DataError);
}

TEST_CASE("sliding_window_detect: segmentation, aggregation, early exit") {
  auto seq = random_ref_seq(5, 450);

  std::vector<std::pair<int, int>> pieces;       // (size, first id)
  std::vector<int> lasts;
  auto recorder = [&](const TokenSeq& piece) {
    pieces.emplace_back(static_cast<int>(piece.ids.size()), piece.ids.front());
    lasts.push_back(piece.ids.back());
    return false;
  };
  CHECK_FALSE(sliding_window_detect(recorder, seq, 200, 100));
  // Segments [0,200) [100,300) [200,400) [300,450): stop once a piece reaches
  // the end of the text.
  REQUIRE(pieces.size() == 4);
  CHECK(pieces[0] == std::pair(200, seq.ids[0]));
  CHECK(pieces[1] == std::pair(200, seq.ids[100]));
  CHECK(pieces[2] == std::pair(200, seq.ids[200]));
  CHECK(pieces[3] == std::pair(150, seq.ids[300]));
  CHECK(lasts[3] == seq.ids[449]);

  // Texts at most one window long are passed through whole, exactly once.
  auto short_seq = random_ref_seq(6, 120);
  pieces.clear();
  lasts.clear();
  CHECK_FALSE(sliding_window_detect(recorder, short_seq, 200, 100));
  REQUIRE(pieces.size() == 1);
  CHECK(pieces[0] == std::pair(120, short_seq.ids[0]));

  // Any positive segment makes the whole text positive, even one that only
  // the final partial window can see.
  auto has_sentinel_late = [&](const TokenSeq& piece) {
    return std::find(piece.ids.begin(), piece.ids.end(), -1) != piece.ids.end();
  };
  auto marked = seq;
  marked.ids[449] = -1;  // only windows covering the tail see it
  CHECK(sliding_window_detect(has_sentinel_late, marked, 200, 100));
  CHECK_FALSE(sliding_window_detect(has_sentinel_late, seq, 200, 100));

  // A hit in the first window short-circuits the scan.
  int calls = 0;
  auto count_then_hit = [&](const TokenSeq&) {
    ++calls;
    return true;
  };
  CHECK(sliding_window_detect(count_then_hit, seq, 200, 100));
  CHECK(calls == 1);

  CHECK_THROWS_AS(sliding_window_detect(recorder, seq, 100, 200),
                  std::invalid_argument);
  CHECK_THROWS_AS(sliding_window_detect(recorder, seq, 200, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(sliding_window_detect(recorder, seq, 0, 0),
                  std::invalid_argument);
}

TEST_CASE("embedding_stats: tiny vocabularies with known geometry") {
  fixtures::TempDir tmp;

  // Two tokens with identical embeddings: every pair distance is zero.
  const auto same = tmp.write("same.txt", "aa\t1 1\nbb\t1 1\n");
  const auto vs = Vocabulary::load(same, Ns::reference, 0);
  REQUIRE(vs.size() == 2);
  const auto ss = embedding_stats(vs);
  CHECK(ss.mean_norm == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(ss.mean_pair_distance == 0.0);
  CHECK(ss.pairs_used == 1);

  // Four one-hot tokens: unit norms, all pair distances sqrt(2).
  const auto onehot = tmp.write(
      "onehot.txt", "a\t1 0 0 0\nb\t0 1 0 0\nc\t0 0 1 0\nd\t0 0 0 1\n");
  const auto vo = Vocabulary::load(onehot, Ns::reference, 0);
  REQUIRE(vo.size() == 4);
  const auto so = embedding_stats(vo);
  CHECK(so.mean_norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(so.mean_pair_distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(so.pairs_used == 6);
  CHECK(so.norm_min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(so.norm_max == doctest::Approx(1.0).epsilon(1e-12));

  const auto single = tmp.write("single.txt", "a\t1 0\n");
  const auto v1 = Vocabulary::load(single, Ns::reference, 0);
  CHECK_THROWS_AS(embedding_stats(v1), DataError);
}

TEST_CASE("embedding_stats: fixture vocabulary is frozen and deterministic") {
  const auto& ref = fixtures::ref_vocab();
  const auto st = embedding_stats(ref);

  CHECK(st.mean_norm == doctest::Approx(47.27625735290831).epsilon(1e-12));
  CHECK(st.mean_pair_distance == doctest::Approx(66.857531218661421).epsilon(1e-12));
  CHECK(st.pairs_used == 1000000);  // subsample cap over ~2e6 pairs

  REQUIRE(st.norm_hist.size() == 32);
  REQUIRE(st.distance_hist.size() == 32);
  std::int64_t norm_count = 0, dist_count = 0;
  for (auto c : st.norm_hist) {
    CHECK(c >= 0);
    norm_count += c;
  }
  for (auto c : st.distance_hist) {
    CHECK(c >= 0);
    dist_count += c;
  }
  CHECK(norm_count == ref.size());
  CHECK(dist_count == st.pairs_used);
  CHECK(st.norm_min <= st.mean_norm);
  CHECK(st.mean_norm <= st.norm_max);
  CHECK(st.dist_min <= st.mean_pair_distance);
  CHECK(st.mean_pair_distance <= st.dist_max);

  // The pair subsample is seeded, so repeat calls agree bit for bit.
  const auto again = embedding_stats(ref);
  CHECK(again.mean_norm == st.mean_norm);
  CHECK(again.mean_pair_distance == st.mean_pair_distance);
  CHECK(again.distance_hist == st.distance_hist);
  CHECK(again.dist_min == st.dist_min);
  CHECK(again.dist_max == st.dist_max);
}

TEST_CASE("tokens_tolerated: floor of the squared radius-to-distance ratio") {
  CHECK(tokens_tolerated(20.0, 3.0) == 44);
  CHECK(tokens_tolerated(20.0, 3.2) == 39);
  CHECK(tokens_tolerated(0.0, 3.0) == 0);
  CHECK(tokens_tolerated(3.0, 3.0) == 1);
  CHECK(tokens_tolerated(2.9, 3.0) == 0);
  CHECK_THROWS_AS(tokens_tolerated(20.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(tokens_tolerated(20.0, -1.0), std::invalid_argument);
}

TEST_CASE("reports: json round trip is lossless and emission is byte-stable") {
  EvalReport r;
  r.metadata = {{"alpha", "0.05"}, {"seed", "7"}, {"sigma", "15"}};
  r.metrics = {0.994, 0.012, f1_from_rates(0.994, 0.012, 500, 500)};
  r.radius_grid_e = {0.0, 5.0, 10.0};
  r.curve_e = {0.9, 1.0 / 3.0, 0.1};
  r.radius_grid_p = {0.0, 2.0};
  r.curve_p = {0.8, 0.2};

  SampleRecord a;
  a.id = 0;
  a.label = 1;
  a.prediction = Label::watermarked;
  a.p_value = std::pow(0.5, 99);  // awkward doubles must survive the trip
  a.pA_lower = 1.0 / 3.0;
  a.rad_e = std::sqrt(2.0) * 13.7;
  a.rad_p = 160.0;
  a.z = 10.76;
  SampleRecord b;
  b.id = 1;
  b.label = 0;
  b.prediction = Label::abstain;
  SampleRecord c;
  c.id = 2;
  c.label = 0;
  c.prediction = Label::unwatermarked;
  c.p_value = 0.73;
  c.z = -0.4;
  r.samples = {a, b, c};

  fixtures::TempDir tmp;
  const auto p1 = tmp.path("report.json");
  emit_report(r, p1, "json");

  const auto back = parse_report(p1);
  REQUIRE(back.samples.size() == 3);
  CHECK(back.metadata == r.metadata);
  CHECK(back.metrics.tpr == r.metrics.tpr);
  CHECK(back.metrics.fpr == r.metrics.fpr);
  CHECK(back.metrics.f1 == r.metrics.f1);
  CHECK(back.radius_grid_e == r.radius_grid_e);
  CHECK(back.curve_e == r.curve_e);
  CHECK(back.radius_grid_p == r.radius_grid_p);
  CHECK(back.curve_p == r.curve_p);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.samples[i].id == r.samples[i].id);
    CHECK(back.samples[i].label == r.samples[i].label);
    CHECK(back.samples[i].prediction == r.samples[i].prediction);
    CHECK(back.samples[i].p_value == r.samples[i].p_value);
    CHECK(back.samples[i].pA_lower == r.samples[i].pA_lower);
    CHECK(back.samples[i].rad_e == r.samples[i].rad_e);
    CHECK(back.samples[i].rad_p == r.samples[i].rad_p);
    CHECK(back.samples[i].z == r.samples[i].z);
  }

  // emit(parse(emit(r))) == emit(r), and re-emitting is byte-identical.
  const auto p2 = tmp.path("report2.json");
  const auto p3 = tmp.path("report3.json");
  emit_report(back, p2, "json");
  emit_report(r, p3, "json");
  const auto bytes1 = fixtures::slurp(p1);
  CHECK(bytes1 == fixtures::slurp(p2));
  CHECK(bytes1 == fixtures::slurp(p3));
  CHECK(!bytes1.empty());

  CHECK_THROWS_AS(emit_report(r, tmp.path("x.yaml"), "yaml"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_report(tmp.path("missing.json")), DataError);

  const auto garbled = tmp.write("garbled.json", "not json at all {");
  CHECK_THROWS_AS(parse_report(garbled), DataError);
  const auto hollow = tmp.write("hollow.json", "{\"metadata\": {}}");
  CHECK_THROWS_AS(parse_report(hollow), DataError);
}

TEST_CASE("reports: csv emits a header plus one row per sample") {
  EvalReport r;
  r.metrics = {1.0, 0.0, 1.0};
  SampleRecord a;
  a.id = 4;
  a.label = 1;
  a.prediction = Label::watermarked;
  a.p_value = 0.001;
  a.pA_lower = 0.97;
  a.rad_e = 19.223;
  a.rad_p = 160.0;
  a.z = 10.5;
  SampleRecord b;
  b.id = 5;
  b.label = 0;
  b.prediction = Label::abstain;
  r.samples = {a, b};

  fixtures::TempDir tmp;
  const auto path = tmp.path("report.csv");
  emit_report(r, path, "csv");

  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "id,label,prediction,p_value,pa_lower,rad_e,rad_p,z");
  CHECK(lines[1].rfind("4,1,watermarked,", 0) == 0);
  CHECK(lines[2].rfind("5,0,abstain,", 0) == 0);

  const auto path2 = tmp.path("report_again.csv");
  emit_report(r, path2, "csv");
  CHECK(fixtures::slurp(path) == fixtures::slurp(path2));
}
