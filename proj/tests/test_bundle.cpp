// Model persistence: versioned JSON bundles with payload and vocabulary
// checksums, plus the JSON-lines plumbing the CLI uses for corpora.
#include "doctest.h"

#include <cstdint>
#include <string>
#include <vector>

#include "certmark/bundle.hpp"
#include "certmark/dataset.hpp"
#include "certmark/errors.hpp"
#include "certmark/rng.hpp"
#include "certmark/tokenspace.hpp"

#include "fixtures.hpp"

using namespace certmark;

namespace {

TokenSeq llm_context(std::initializer_list<int> ids) {
  TokenSeq s;
  s.ns = Ns::llm;
  s.ids = ids;
  return s;
}

// Rewrite one field inside an existing bundle file, keeping everything else
// (including the now-stale checksums) untouched.
void rewrite_field(const std::string& path, const char* pointer,
                   const nlohmann::json& value) {
  auto j = nlohmann::json::parse(fixtures::slurp(path));
  j[nlohmann::json::json_pointer(pointer)] = value;
  std::ofstream out(path, std::ios::binary);
  out << j.dump(1) << '\n';
}

}  // namespace

TEST_CASE("bundle: toy LM round trips bitwise") {
  const auto& llm = fixtures::llm_vocab();
  const auto& lm = fixtures::toy_lm();

  fixtures::TempDir tmp;
  const auto path = tmp.path("lm.json");
  save_toylm(lm, path);
  const auto back = load_toylm(path, llm);

  CHECK(back.order() == lm.order());
  CHECK(back.smoothing() == lm.smoothing());

  // Conditional distributions agree exactly on empty, short, and full-order
  // contexts, seen or not.
  const std::vector<TokenSeq> contexts = {
      llm_context({}), llm_context({3}), llm_context({4, 9}),
      llm_context({10, 15, 21}), llm_context({2000, 2001, 1}),
  };
  for (const auto& ctx : contexts) {
    const auto a = lm.logits(ctx);
    const auto b = back.logits(ctx);
    REQUIRE(a.size() == b.size());
    CHECK(a == b);
  }

  // Decoding from the reloaded model reproduces the original stream.
  DecodeConfig cfg;
  cfg.max_len = 60;
  cfg.seed = 123;
  const auto prompt = llm_context({5, 17, 40});
  CHECK(lm.generate(prompt, cfg).ids == back.generate(prompt, cfg).ids);
  cfg.strategy = DecodeConfig::Strategy::beam;
  CHECK(lm.generate(prompt, cfg).ids == back.generate(prompt, cfg).ids);
}

TEST_CASE("bundle: generator round trips bitwise") {
  const auto& ref = fixtures::ref_vocab();
  const auto& gen = fixtures::generator();

  fixtures::TempDir tmp;
  const auto path = tmp.path("gen.json");
  save_generator(gen, path);
  const auto back = load_generator(path, ref);

  CHECK(back.w() == gen.w());
  CHECK(back.gamma() == gen.gamma());
  CHECK(back.tau() == gen.tau());

  CounterRng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> window(gen.w() + 1);
    for (auto& id : window) id = static_cast<int>(rng.next_below(ref.total_ids()));
    CHECK(back.score(window) == gen.score(window));
  }

  const auto& llm = fixtures::llm_vocab();
  std::vector<int> prefix(10);
  for (auto& id : prefix) id = static_cast<int>(rng.next_below(llm.size()));
  std::vector<int> cands(30);
  for (auto& id : cands) id = static_cast<int>(rng.next_below(llm.size()));
  GenParams params;
  CHECK(select_green(back, prefix, cands, llm, ref, params) ==
        select_green(gen, prefix, cands, llm, ref, params));
}

TEST_CASE("bundle: detector round trips bitwise") {
  const auto& ref = fixtures::ref_vocab();
  auto det = DetectorModel::init(99, ref);
  // Nudge a few weights so we are not persisting a freshly seeded model.
  det.w1[7] += 0.25;
  det.b2[3] = -1.5;
  det.w3[11] *= 2.0;

  fixtures::TempDir tmp;
  const auto path = tmp.path("det.json");
  save_detector(det, path);
  const auto back = load_detector(path, ref);

  CHECK(back.w() == det.w());
  CHECK(back.max_len() == det.max_len());
  CHECK(back.w1 == det.w1);
  CHECK(back.b1 == det.b1);
  CHECK(back.w2 == det.w2);
  CHECK(back.b2 == det.b2);
  CHECK(back.w3 == det.w3);
  CHECK(back.b3 == det.b3);

  CounterRng rng(2718);
  for (int trial = 0; trial < 5; ++trial) {
    TokenSeq s;
    s.ns = Ns::reference;
    s.ids.resize(50 + 30 * trial);
    for (auto& id : s.ids) id = static_cast<int>(rng.next_below(ref.size()));
    const auto e = split_embedding(s, ref).first;
    const auto pa = det.forward(e);
    const auto pb = back.forward(e);
    CHECK(pa[0] == pb[0]);
    CHECK(pa[1] == pb[1]);
  }
}

TEST_CASE("bundle: refuses tampered, mismatched, and truncated files") {
  const auto& ref = fixtures::ref_vocab();
  const auto& llm = fixtures::llm_vocab();
  const auto& gen = fixtures::generator();

  fixtures::TempDir tmp;
  const auto path = tmp.path("gen.json");
  save_generator(gen, path);

  // Edit one payload value without refreshing the stored checksum.
  {
    const auto tampered = tmp.path("tampered.json");
    std::ofstream(tampered, std::ios::binary) << fixtures::slurp(path);
    rewrite_field(tampered, "/payload/tau", gen.tau() + 1e-9);
    CHECK_THROWS_WITH_AS(load_generator(tampered, ref),
                         doctest::Contains("payload checksum"), DataError);
  }

  // A model written against one vocabulary will not load under another.
  CHECK_THROWS_WITH_AS(load_generator(path, llm),
                       doctest::Contains("different vocabulary"), DataError);

  // Future format versions are rejected up front.
  {
    const auto wrong_ver = tmp.path("wrong_ver.json");
    std::ofstream(wrong_ver, std::ios::binary) << fixtures::slurp(path);
    rewrite_field(wrong_ver, "/format_version", 99);
    CHECK_THROWS_WITH_AS(load_generator(wrong_ver, ref),
                         doctest::Contains("format_version"), DataError);
  }

  // Kind mismatch: a generator bundle is not a detector.
  CHECK_THROWS_WITH_AS(load_detector(path, ref), doctest::Contains("kind"),
                       DataError);
  CHECK_THROWS_AS(load_toylm(path, llm), DataError);

  // Truncation corrupts the JSON itself.
  {
    const auto bytes = fixtures::slurp(path);
    const auto cut = tmp.write("cut.json", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_WITH_AS(load_generator(cut, ref),
                         doctest::Contains("corrupt"), DataError);
  }

  // Valid JSON that is not a bundle at all.
  const auto not_bundle = tmp.write("plain.json", "{\"hello\": 1}\n");
  CHECK_THROWS_WITH_AS(load_generator(not_bundle, ref),
                       doctest::Contains("not a model bundle"), DataError);

  CHECK_THROWS_AS(load_generator(tmp.path("missing.json"), ref), DataError);
}

TEST_CASE("bundle: saving is deterministic byte for byte") {
  fixtures::TempDir tmp;
  const auto a = tmp.path("a.json");
  const auto b = tmp.path("b.json");
  save_generator(fixtures::generator(), a);
  save_generator(fixtures::generator(), b);
  const auto bytes = fixtures::slurp(a);
  CHECK(bytes == fixtures::slurp(b));
  CHECK(!bytes.empty());
}

TEST_CASE("jsonl: round trip, blank lines, and parse diagnostics") {
  fixtures::TempDir tmp;

  std::vector<nlohmann::json> records = {
      {{"id", 0}, {"text", "the unhappiness of the fleet"}},
      {{"id", 1}, {"label", 1}, {"z", 10.76}},
      nlohmann::json::array({1, 2, 3}),
  };
  const auto path = tmp.path("data.jsonl");
  write_jsonl(path, records);
  const auto back = read_jsonl(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) CHECK(back[i] == records[i]);

  // Blank lines are skipped, not parsed.
  const auto gappy = tmp.write("gappy.jsonl", "{\"a\":1}\n\n{\"b\":2}\n\n");
  CHECK(read_jsonl(gappy).size() == 2);

  // Parse failures point at the offending line.
  const auto bad = tmp.write("bad.jsonl", "{\"a\":1}\n{oops\n{\"b\":2}\n");
  CHECK_THROWS_WITH_AS(read_jsonl(bad), doctest::Contains(":2:"), DataError);

  CHECK_THROWS_AS(read_jsonl(tmp.path("absent.jsonl")), DataError);

  // The committed fixture corpus reads cleanly and is fully labeled.
  const auto corpus = read_jsonl(fixtures::data_path("corpus.jsonl"));
  REQUIRE(!corpus.empty());
  for (const auto& rec : corpus) {
    CHECK(rec.contains("text"));
    CHECK(rec.at("label").get<int>() == 0);
  }
}
