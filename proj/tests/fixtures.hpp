#pragma once

// Shared access to the committed data/ fixtures (CERTMARK_DATA_DIR is set by
// the build) plus temp-file plumbing for tests that write artifacts.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "certmark/dataset.hpp"
#include "certmark/detector.hpp"
#include "certmark/tokenspace.hpp"
#include "certmark/toylm.hpp"
#include "certmark/wmgen.hpp"

#include "json.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) {
  return std::string(CERTMARK_DATA_DIR) + "/" + name;
}

inline const certmark::Vocabulary& ref_vocab() {
  static const auto v =
      certmark::Vocabulary::load(data_path("ref_vocab.txt"), certmark::Ns::reference, 64);
  return v;
}

inline const certmark::Vocabulary& llm_vocab() {
  static const auto v =
      certmark::Vocabulary::load(data_path("llm_vocab.txt"), certmark::Ns::llm, 0);
  return v;
}

inline std::vector<std::string> corpus_texts() {
  std::vector<std::string> texts;
  std::ifstream in(data_path("corpus.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) texts.push_back(nlohmann::json::parse(line).at("text"));
  }
  return texts;
}

inline std::vector<certmark::TokenSeq> corpus_llm_seqs() {
  std::vector<certmark::TokenSeq> seqs;
  for (const auto& t : corpus_texts()) seqs.push_back(certmark::encode_llm(t, llm_vocab()));
  return seqs;
}

inline std::vector<std::string> prompt_texts() {
  std::vector<std::string> texts;
  std::ifstream in(data_path("prompts.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) texts.push_back(nlohmann::json::parse(line).at("text"));
  }
  return texts;
}

inline const certmark::ToyLM& toy_lm() {
  static const auto lm = certmark::ToyLM::train(corpus_llm_seqs(), 3, 0.1, llm_vocab());
  return lm;
}

inline const certmark::GeneratorModel& generator() {
  static const auto gen = certmark::GeneratorModel::init(7, ref_vocab(), 0.5, 2);
  return gen;
}

// A freshly created unique directory under the system temp root, removed on
// destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    dir_ = std::filesystem::temp_directory_path() /
           ("certmark_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& body) const {
    const auto p = path(name);
    std::ofstream out(p, std::ios::binary);
    out << body;
    return p;
  }

 private:
  std::filesystem::path dir_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
