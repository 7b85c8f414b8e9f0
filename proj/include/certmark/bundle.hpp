#pragma once

#include <string>
#include <vector>

#include "certmark/detector.hpp"
#include "certmark/toylm.hpp"
#include "certmark/wmgen.hpp"

#include "json.hpp"

namespace certmark {

// Versioned single-file persistence. Every bundle records the checksum of the
// vocabulary it was built against and refuses to load under a different one.
inline constexpr int kFormatVersion = 1;

void save_toylm(const ToyLM& lm, const std::string& path);
ToyLM load_toylm(const std::string& path, const Vocabulary& llm_vocab);

void save_generator(const GeneratorModel& gen, const std::string& path);
GeneratorModel load_generator(const std::string& path, const Vocabulary& ref_vocab);

void save_detector(const DetectorModel& det, const std::string& path);
DetectorModel load_detector(const std::string& path, const Vocabulary& ref_vocab);

// JSON-lines plumbing shared by the CLI.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records);

}  // namespace certmark
