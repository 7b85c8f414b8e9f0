#include "certmark/bundle.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "certmark/errors.hpp"

namespace certmark {
namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path + ": corrupt bundle: " + e.what());
  }
  return j;
}

// The payload checksum covers the canonical dump of the payload object, so a
// single flipped byte anywhere in the stored weights is caught at load time
// even when it still parses as valid JSON.
std::uint64_t payload_checksum(const json& payload) { return fnv1a(payload.dump()); }

void write_bundle(const std::string& path, const std::string& kind,
                  std::uint64_t vocab_checksum, json payload) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = kind;
  j["vocab_checksum"] = vocab_checksum;
  j["payload_checksum"] = payload_checksum(payload);
  j["payload"] = std::move(payload);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << j.dump(1) << '\n';
  if (!out) throw DataError(path + ": write failed");
}

json read_bundle(const std::string& path, const std::string& kind,
                 const Vocabulary& vocab) {
  json j = read_json_file(path);
  if (!j.is_object() || !j.contains("format_version"))
    throw DataError(path + ": not a model bundle");
  if (j["format_version"] != kFormatVersion)
    throw DataError(path + ": unsupported format_version " + j["format_version"].dump() +
                    " (expected " + std::to_string(kFormatVersion) + ")");
  if (j.value("kind", std::string()) != kind)
    throw DataError(path + ": bundle kind '" + j.value("kind", std::string()) +
                    "' does not match expected '" + kind + "'");
  if (!j.contains("payload") || !j.contains("payload_checksum") ||
      !j.contains("vocab_checksum"))
    throw DataError(path + ": incomplete bundle");
  const auto stored = j["payload_checksum"].get<std::uint64_t>();
  if (stored != payload_checksum(j["payload"]))
    throw DataError(path + ": payload checksum mismatch (file corrupted?)");
  const auto vsum = j["vocab_checksum"].get<std::uint64_t>();
  if (vsum != vocab.checksum())
    throw DataError(path + ": model was built against a different vocabulary (checksum " +
                    std::to_string(vsum) + " vs " + std::to_string(vocab.checksum()) + ")");
  return j["payload"];
}

template <typename T>
T field(const json& payload, const char* name, const std::string& path) {
  if (!payload.contains(name))
    throw DataError(path + ": bundle payload missing field '" + name + "'");
  try {
    return payload.at(name).get<T>();
  } catch (const json::exception& e) {
    throw DataError(path + ": bad field '" + std::string(name) + "': " + e.what());
  }
}

}  // namespace

void save_toylm(const ToyLM& lm, const std::string& path) {
  json payload;
  payload["order"] = lm.order();
  payload["smoothing"] = lm.smoothing();
  payload["vocab_size"] = lm.vocab_size();
  payload["unigrams"] = lm.unigram_counts();
  json levels = json::array();
  for (int k = 1; k <= lm.order(); ++k) {
    json lv = json::array();
    for (const auto& e : lm.level_entries(k))
      lv.push_back(json::array({e.key, e.token, e.count}));
    levels.push_back(std::move(lv));
  }
  payload["levels"] = std::move(levels);
  write_bundle(path, "toylm", lm.vocab().checksum(), std::move(payload));
}

ToyLM load_toylm(const std::string& path, const Vocabulary& llm_vocab) {
  const json payload = read_bundle(path, "toylm", llm_vocab);
  const int order = field<int>(payload, "order", path);
  const double smoothing = field<double>(payload, "smoothing", path);
  const int vocab_size = field<int>(payload, "vocab_size", path);
  if (vocab_size != llm_vocab.total_ids())
    throw DataError(path + ": vocab size mismatch");
  auto unigrams = field<std::vector<std::int64_t>>(payload, "unigrams", path);
  if (static_cast<int>(unigrams.size()) != vocab_size)
    throw DataError(path + ": unigram table size mismatch");
  if (!payload.contains("levels") || !payload["levels"].is_array() ||
      static_cast<int>(payload["levels"].size()) != order)
    throw DataError(path + ": level table count mismatch");
  std::vector<std::vector<ToyLM::LevelEntry>> levels(order);
  for (int k = 0; k < order; ++k) {
    for (const auto& row : payload["levels"][k]) {
      if (!row.is_array() || row.size() != 3)
        throw DataError(path + ": malformed level entry");
      levels[k].push_back({row[0].get<std::uint64_t>(), row[1].get<int>(),
                           row[2].get<std::int64_t>()});
    }
  }
  return ToyLM::from_parts(order, smoothing, llm_vocab, std::move(unigrams), levels);
}

void save_generator(const GeneratorModel& gen, const std::string& path) {
  json payload;
  payload["seed"] = gen.seed();
  payload["w"] = gen.w();
  payload["gamma"] = gen.gamma();
  payload["tau"] = gen.tau();
  payload["w1"] = gen.w1();
  payload["w2"] = gen.w2();
  write_bundle(path, "generator", gen.vocab().checksum(), std::move(payload));
}

GeneratorModel load_generator(const std::string& path, const Vocabulary& ref_vocab) {
  const json payload = read_bundle(path, "generator", ref_vocab);
  const int w = field<int>(payload, "w", path);
  auto w1 = field<std::vector<double>>(payload, "w1", path);
  auto w2 = field<std::vector<double>>(payload, "w2", path);
  const auto in_dim = static_cast<std::size_t>(w + 1) * ref_vocab.dim();
  if (w < 1 || w2.size() != GeneratorModel::kHidden || w1.size() != w2.size() * in_dim)
    throw DataError(path + ": generator weight shape mismatch");
  return GeneratorModel::from_parts(
      field<std::uint64_t>(payload, "seed", path), ref_vocab, w,
      field<double>(payload, "gamma", path), field<double>(payload, "tau", path),
      std::move(w1), std::move(w2));
}

void save_detector(const DetectorModel& det, const std::string& path) {
  json payload;
  payload["w"] = det.w();
  payload["max_len"] = det.max_len();
  payload["dim"] = det.dim();
  payload["feature"] = DetectorModel::kFeature;
  payload["hidden"] = DetectorModel::kHiddenCls;
  payload["w1"] = det.w1;
  payload["b1"] = det.b1;
  payload["w2"] = det.w2;
  payload["b2"] = det.b2;
  payload["w3"] = det.w3;
  payload["b3"] = det.b3;
  write_bundle(path, "detector", det.vocab().checksum(), std::move(payload));
}

DetectorModel load_detector(const std::string& path, const Vocabulary& ref_vocab) {
  const json payload = read_bundle(path, "detector", ref_vocab);
  const int w = field<int>(payload, "w", path);
  const int max_len = field<int>(payload, "max_len", path);
  if (field<int>(payload, "dim", path) != ref_vocab.dim())
    throw DataError(path + ": embedding dimension mismatch");
  if (field<int>(payload, "feature", path) != DetectorModel::kFeature ||
      field<int>(payload, "hidden", path) != DetectorModel::kHiddenCls)
    throw DataError(path + ": architecture dims mismatch");
  auto w1 = field<std::vector<double>>(payload, "w1", path);
  auto b1 = field<std::vector<double>>(payload, "b1", path);
  auto w2 = field<std::vector<double>>(payload, "w2", path);
  auto b2 = field<std::vector<double>>(payload, "b2", path);
  auto w3 = field<std::vector<double>>(payload, "w3", path);
  auto b3 = field<std::vector<double>>(payload, "b3", path);
  const auto in_dim = static_cast<std::size_t>(w + 1) * ref_vocab.dim();
  if (w < 1 || max_len < 1 || b1.size() != DetectorModel::kFeature ||
      w1.size() != b1.size() * in_dim || b2.size() != DetectorModel::kHiddenCls ||
      w2.size() != b2.size() * b1.size() || b3.size() != 2 ||
      w3.size() != 2 * b2.size())
    throw DataError(path + ": detector weight shape mismatch");
  return DetectorModel::from_parts(ref_vocab, w, max_len, std::move(w1), std::move(b1),
                                   std::move(w2), std::move(b2), std::move(w3),
                                   std::move(b3));
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::vector<json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace certmark
