// certmark: watermark generation, smoothing-certified detection, attacks and
// evaluation in one subcommand-style binary. Exit codes: 0 success, 2 usage,
// 3 data error, 4 numeric failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "certmark/attacks.hpp"
#include "certmark/bundle.hpp"
#include "certmark/dataset.hpp"
#include "certmark/detector.hpp"
#include "certmark/errors.hpp"
#include "certmark/evalkit.hpp"
#include "certmark/smoothing.hpp"
#include "certmark/synth.hpp"
#include "certmark/tokenspace.hpp"
#include "certmark/toylm.hpp"
#include "certmark/wmgen.hpp"

namespace {

using certmark::CounterRng;
using certmark::DataError;
using certmark::TokenSeq;
using certmark::Vocabulary;
using nlohmann::json;

// Every run echoes its resolved configuration (including defaulted values)
// and the seed to stderr so runs are reconstructible from logs alone.
void echo_config(const CLI::App& sub) {
  std::cerr << "# resolved config for '" << sub.get_name() << "'\n";
  std::istringstream ini(const_cast<CLI::App&>(sub).config_to_str(true, false));
  std::string line;
  while (std::getline(ini, line)) std::cerr << "#   " << line << '\n';
}

Vocabulary load_ref(const std::string& path, int oov_buckets) {
  return Vocabulary::load(path, certmark::Ns::reference, oov_buckets);
}

Vocabulary load_llm(const std::string& path) {
  return Vocabulary::load(path, certmark::Ns::llm, 0);
}

// Accepts records carrying either pre-tokenized reference ids ("ref_ids",
// written by `attack`) or raw "text". Text goes through the LLM tokenizer and
// the bridge when an LLM vocabulary is supplied — the same path watermarked
// generations take — and through plain word-level encoding otherwise.
TokenSeq record_ref_seq(const json& rec, const Vocabulary& ref,
                        const Vocabulary* llm, int bridge_n) {
  if (rec.contains("ref_ids")) {
    TokenSeq seq;
    seq.ns = certmark::Ns::reference;
    for (const auto& v : rec.at("ref_ids")) {
      const int id = v.get<int>();
      if (id < 0 || id >= ref.total_ids())
        throw DataError("ref_ids entry " + std::to_string(id) + " out of range");
      seq.ids.push_back(id);
    }
    return seq;
  }
  if (rec.contains("text")) {
    const auto text = rec.at("text").get<std::string>();
    if (llm != nullptr)
      return certmark::bridge_encode(certmark::encode_llm(text, *llm), *llm, ref,
                                     bridge_n);
    return certmark::encode_reference(text, ref);
  }
  throw DataError("input record has neither 'ref_ids' nor 'text'");
}

std::string label_name(certmark::Label l) {
  switch (l) {
    case certmark::Label::unwatermarked: return "unwatermarked";
    case certmark::Label::watermarked: return "watermarked";
    default: return "ABSTAIN";
  }
}

certmark::CertifyMode parse_mode(const std::string& name) {
  if (name == "paper") return certmark::CertifyMode::paper;
  if (name == "two_stage" || name == "two-stage") return certmark::CertifyMode::two_stage;
  throw CLI::ValidationError("--mode", "expected 'paper' or 'two_stage'");
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) grid.push_back(std::stod(item));
  }
  return grid;
}

// ---------------------------------------------------------------- build-vocab

struct BuildVocabOpts {
  std::string out_dir;
  certmark::synth::VocabConfig vocab;
  certmark::synth::CorpusConfig corpus;
  int n_prompts = 64;
  int prompt_words = 5;
  std::uint64_t prompts_seed = 3;
};

void run_build_vocab(const BuildVocabOpts& o) {
  namespace fs = std::filesystem;
  fs::create_directories(o.out_dir);
  const auto words = certmark::synth::make_wordlist(o.vocab.n_words, o.vocab.seed);

  const auto write = [&](const std::string& name, const std::string& body) {
    const auto path = (fs::path(o.out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << body;
    return path;
  };

  json summary;
  summary["ref_vocab"] = write("ref_vocab.txt", certmark::synth::ref_vocab_text(words, o.vocab));
  summary["llm_vocab"] = write("llm_vocab.txt", certmark::synth::llm_vocab_text(words, o.vocab));
  const auto docs = certmark::synth::make_corpus(words, o.corpus);
  summary["corpus"] = write("corpus.jsonl", certmark::synth::corpus_jsonl(docs));
  summary["prompts"] = write(
      "prompts.jsonl", certmark::synth::prompts_jsonl(words, o.n_prompts, o.prompt_words,
                                                      o.corpus.zipf_s, o.prompts_seed));
  summary["words"] = o.vocab.n_words;
  summary["docs"] = o.corpus.n_docs;
  std::cout << summary.dump() << '\n';
}

// ------------------------------------------------------------------- train-lm

struct TrainLmOpts {
  std::string llm_vocab, corpus, out;
  int order = 3;
  double smoothing = 0.1;
};

void run_train_lm(const TrainLmOpts& o) {
  const auto vocab = load_llm(o.llm_vocab);
  std::vector<TokenSeq> corpus;
  for (const auto& rec : certmark::read_jsonl(o.corpus))
    corpus.push_back(certmark::encode_llm(rec.at("text").get<std::string>(), vocab));
  const auto lm = certmark::ToyLM::train(corpus, o.order, o.smoothing, vocab);
  certmark::save_toylm(lm, o.out);

  json summary;
  summary["out"] = o.out;
  summary["documents"] = corpus.size();
  json contexts = json::array();
  for (int k = 1; k <= lm.order(); ++k) contexts.push_back(lm.level_entries(k).size());
  summary["ngram_entries"] = std::move(contexts);
  std::cout << summary.dump() << '\n';
}

// ------------------------------------------------------------- init-generator

struct InitGenOpts {
  std::string ref_vocab, out;
  std::uint64_t seed = 7;
  double gamma = 0.5;
  int window = 2;
  int oov_buckets = 64;
};

void run_init_generator(const InitGenOpts& o) {
  const auto vocab = load_ref(o.ref_vocab, o.oov_buckets);
  const auto gen = certmark::GeneratorModel::init(o.seed, vocab, o.gamma, o.window);
  certmark::save_generator(gen, o.out);
  json summary;
  summary["out"] = o.out;
  summary["gamma"] = gen.gamma();
  summary["tau"] = gen.tau();
  summary["seed"] = gen.seed();
  std::cout << summary.dump() << '\n';
}

// ------------------------------------------------------------------- generate

struct GenerateOpts {
  std::string llm_vocab, ref_vocab, lm, gen, prompts, out;
  certmark::GenParams params;
  std::string strategy = "sample";
  double temperature = 0.7;
  int beam_width = 3;
  int max_len = 200;
  std::uint64_t seed = 7;
  int oov_buckets = 64;
};

void run_generate(const GenerateOpts& o) {
  const auto llm_vocab = load_llm(o.llm_vocab);
  const auto ref_vocab = load_ref(o.ref_vocab, o.oov_buckets);
  const auto lm = certmark::load_toylm(o.lm, llm_vocab);
  const auto gen = certmark::load_generator(o.gen, ref_vocab);
  if (gen.w() != o.params.w)
    throw CLI::ValidationError("--window", "generator was initialized with w=" +
                                               std::to_string(gen.w()));

  certmark::DecodeConfig cfg;
  cfg.strategy = o.strategy == "beam" ? certmark::DecodeConfig::Strategy::beam
                                      : certmark::DecodeConfig::Strategy::sample;
  cfg.temperature = o.temperature;
  cfg.beam_width = o.beam_width;
  cfg.max_len = o.max_len;

  CounterRng seeder(o.seed);
  std::vector<json> out_records;
  int idx = 0;
  for (const auto& rec : certmark::read_jsonl(o.prompts)) {
    const auto prompt_text = rec.at("text").get<std::string>();
    const auto prompt = certmark::encode_llm(prompt_text, llm_vocab);
    certmark::DecodeConfig sample_cfg = cfg;
    sample_cfg.seed = seeder.fork(static_cast<std::uint64_t>(idx)).next_u64();
    const auto continuation =
        certmark::generate_watermarked(lm, gen, prompt, o.params, sample_cfg);
    const auto bridged =
        certmark::bridge_encode(continuation, llm_vocab, ref_vocab, o.params.bridge_n);

    json out;
    out["id"] = rec.contains("id") ? rec.at("id") : json(idx);
    out["prompt"] = prompt_text;
    out["text"] = certmark::decode_llm(continuation, llm_vocab);
    out["label"] = o.params.delta > 0 ? 1 : 0;
    out["z"] = certmark::z_score(bridged, gen, gen.gamma(), o.params);
    out["seed"] = sample_cfg.seed;
    out_records.push_back(std::move(out));
    ++idx;
  }
  certmark::write_jsonl(o.out, out_records);
  json summary;
  summary["out"] = o.out;
  summary["generations"] = out_records.size();
  std::cout << summary.dump() << '\n';
}

// -------------------------------------------------------------- train-detector

struct TrainDetOpts {
  std::string ref_vocab, llm_vocab, corpus, out;
  certmark::TrainConfig cfg;
  std::string strategy = "duplicate";
  int window = 2;
  int max_len = 200;
  int bridge_n = 30;
  int oov_buckets = 64;
  std::uint64_t init_seed = 1;
};

void run_train_detector(const TrainDetOpts& o) {
  const auto ref_vocab = load_ref(o.ref_vocab, o.oov_buckets);
  std::optional<Vocabulary> llm_vocab;
  if (!o.llm_vocab.empty()) llm_vocab.emplace(load_llm(o.llm_vocab));

  std::vector<certmark::LabeledSample> corpus;
  for (const auto& rec : certmark::read_jsonl(o.corpus)) {
    certmark::LabeledSample s;
    s.seq = record_ref_seq(rec, ref_vocab, llm_vocab ? &*llm_vocab : nullptr, o.bridge_n);
    if (!rec.contains("label")) throw DataError("training record missing 'label'");
    s.label = rec.at("label").get<int>();
    s.z = rec.value("z", 0.0);
    corpus.push_back(std::move(s));
  }

  certmark::TrainConfig cfg = o.cfg;
  cfg.strategy = o.strategy == "joint" ? certmark::TrainConfig::Strategy::joint
                                       : certmark::TrainConfig::Strategy::duplicate;
  auto det = certmark::DetectorModel::init(o.init_seed, ref_vocab, o.window, o.max_len);
  const auto trace = certmark::train_detector(det, corpus, cfg);
  certmark::save_detector(det, o.out);

  json summary;
  summary["out"] = o.out;
  summary["samples"] = corpus.size();
  summary["loss"] = trace;
  std::cout << summary.dump() << '\n';
}

// --------------------------------------------------------------------- attack

struct AttackOpts {
  std::string ref_vocab, in, out, human;
  std::string kind = "swap";
  double fraction = 0.0;
  std::uint64_t seed = 7;
  int n_wm = 150;
  int human_len = 600;
  int oov_buckets = 64;
  std::string llm_vocab;
  int bridge_n = 30;
};

void run_attack(const AttackOpts& o) {
  const auto ref_vocab = load_ref(o.ref_vocab, o.oov_buckets);
  std::optional<Vocabulary> llm_vocab;
  if (!o.llm_vocab.empty()) llm_vocab.emplace(load_llm(o.llm_vocab));
  const Vocabulary* llm = llm_vocab ? &*llm_vocab : nullptr;

  certmark::AttackSpec spec;
  spec.kind = certmark::parse_attack_kind(o.kind);
  spec.fraction = o.fraction;
  spec.seed = o.seed;
  spec.n_wm = o.n_wm;
  spec.human_len = o.human_len;

  std::vector<TokenSeq> human_pool;
  if (spec.kind == certmark::AttackSpec::Kind::copy_paste) {
    if (o.human.empty())
      throw CLI::ValidationError("--human", "copy-paste needs a human-text pool");
    for (const auto& rec : certmark::read_jsonl(o.human)) {
      auto seq = record_ref_seq(rec, ref_vocab, llm, o.bridge_n);
      if (static_cast<int>(seq.ids.size()) >= o.human_len)
        human_pool.push_back(std::move(seq));
    }
    if (human_pool.empty())
      throw DataError("no human document reaches --human-len tokens");
  }

  CounterRng root(o.seed);
  std::vector<json> out_records;
  int idx = 0;
  for (const auto& rec : certmark::read_jsonl(o.in)) {
    const auto seq = record_ref_seq(rec, ref_vocab, llm, o.bridge_n);
    auto rng = root.fork(static_cast<std::uint64_t>(idx));
    TokenSeq attacked;
    if (spec.kind == certmark::AttackSpec::Kind::copy_paste) {
      attacked = certmark::copy_paste(seq, human_pool[idx % human_pool.size()],
                                      spec.n_wm, spec.human_len, rng);
    } else {
      attacked = certmark::apply_edit(seq, spec, ref_vocab, rng);
    }

    json out;
    out["id"] = rec.contains("id") ? rec.at("id") : json(idx);
    if (rec.contains("label")) out["label"] = rec.at("label");
    if (rec.contains("z")) out["z_before"] = rec.at("z");
    out["attack"] = o.kind;
    out["fraction"] = o.fraction;
    out["ref_ids"] = attacked.ids;
    out_records.push_back(std::move(out));
    ++idx;
  }
  certmark::write_jsonl(o.out, out_records);
  json summary;
  summary["out"] = o.out;
  summary["records"] = out_records.size();
  std::cout << summary.dump() << '\n';
}

// --------------------------------------------------------------------- detect

struct DetectOpts {
  std::string detector, ref_vocab, llm_vocab, gen, in, out;
  bool sliding = false;
  int window = 200;
  int stride = 100;
  int bridge_n = 30;
  int oov_buckets = 64;
};

void run_detect(const DetectOpts& o) {
  const auto ref_vocab = load_ref(o.ref_vocab, o.oov_buckets);
  std::optional<Vocabulary> llm_vocab;
  if (!o.llm_vocab.empty()) llm_vocab.emplace(load_llm(o.llm_vocab));
  const auto det = certmark::load_detector(o.detector, ref_vocab);
  std::optional<certmark::GeneratorModel> gen;
  if (!o.gen.empty()) gen.emplace(certmark::load_generator(o.gen, ref_vocab));

  const auto plain_vote = [&det](const TokenSeq& seq) {
    TokenSeq head = seq;
    if (static_cast<int>(head.ids.size()) > det.max_len()) head.ids.resize(det.max_len());
    const auto [e, u] = certmark::split_embedding(head, det.vocab());
    return det.forward(certmark::compose(e, u));
  };

  std::vector<json> out_records;
  int idx = 0;
  for (const auto& rec : certmark::read_jsonl(o.in)) {
    const auto seq =
        record_ref_seq(rec, ref_vocab, llm_vocab ? &*llm_vocab : nullptr, o.bridge_n);
    const auto probs = plain_vote(seq);

    json out;
    out["id"] = rec.contains("id") ? rec.at("id") : json(idx);
    if (rec.contains("label")) out["truth_label"] = rec.at("label");
    out["p_watermarked"] = probs[1];
    out["vote"] = probs[1] > probs[0] ? 1 : 0;
    if (o.sliding) {
      const bool hit = certmark::sliding_window_detect(
          [&](const TokenSeq& piece) {
            const auto p = plain_vote(piece);
            return p[1] > p[0];
          },
          seq, o.window, o.stride);
      out["sliding_vote"] = hit ? 1 : 0;
    }
    if (gen && static_cast<int>(seq.ids.size()) > gen->w()) {
      certmark::GenParams zp;
      zp.w = gen->w();
      out["z"] = certmark::z_score(seq, *gen, gen->gamma(), zp);
    }
    out_records.push_back(std::move(out));
    ++idx;
  }
  certmark::write_jsonl(o.out, out_records);
  json summary;
  summary["out"] = o.out;
  summary["records"] = out_records.size();
  std::cout << summary.dump() << '\n';
}

// -------------------------------------------------------------------- certify

struct CertifyOpts {
  std::string detector, ref_vocab, llm_vocab, in, out;
  certmark::NoiseConfig noise;
  std::int64_t n0 = 1000;
  std::int64_t n_sel = 100;
  double alpha = 0.05;
  std::string mode = "paper";
  std::uint64_t seed = 7;
  int workers = 1;
  int bridge_n = 30;
  int oov_buckets = 64;
};

void run_certify(const CertifyOpts& o) {
  const auto ref_vocab = load_ref(o.ref_vocab, o.oov_buckets);
  std::optional<Vocabulary> llm_vocab;
  if (!o.llm_vocab.empty()) llm_vocab.emplace(load_llm(o.llm_vocab));
  const auto det = certmark::load_detector(o.detector, ref_vocab);
  const auto mode = parse_mode(o.mode);

  CounterRng root(o.seed);
  std::vector<json> out_records;
  int idx = 0;
  for (const auto& rec : certmark::read_jsonl(o.in)) {
    const auto seq =
        record_ref_seq(rec, ref_vocab, llm_vocab ? &*llm_vocab : nullptr, o.bridge_n);
    const auto t0 = std::chrono::steady_clock::now();
    const auto cert =
        certmark::certify(det, seq, o.noise, o.n0, o.alpha, mode, o.n_sel,
                          root.fork(static_cast<std::uint64_t>(idx)), o.workers);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;

    json out;
    out["id"] = rec.contains("id") ? rec.at("id") : json(idx);
    if (rec.contains("label")) out["truth_label"] = rec.at("label");
    out["label"] = label_name(cert.label);
    out["p_value"] = cert.p_value;
    out["pa_lower"] = cert.pA_lower;
    out["pb_upper"] = cert.pB_upper;
    out["rad_e"] = cert.rad_e;
    out["rad_p"] = cert.rad_p;
    out["n_a"] = cert.n_A;
    out["n_b"] = cert.n_B;
    out["n0"] = cert.N0;
    out["alpha"] = cert.alpha;
    out["wall_time_s"] = dt.count();
    out_records.push_back(std::move(out));
    ++idx;
  }
  certmark::write_jsonl(o.out, out_records);
  json summary;
  summary["out"] = o.out;
  summary["records"] = out_records.size();
  std::cout << summary.dump() << '\n';
}

// ------------------------------------------------------------------- evaluate

struct EvaluateOpts {
  std::string detector, ref_vocab, llm_vocab, gen, dataset, out, human;
  std::string attack = "none";
  certmark::NoiseConfig noise;
  std::int64_t n0 = 1000;
  std::int64_t n_sel = 100;
  double alpha = 0.05;
  std::string mode = "paper";
  std::uint64_t seed = 7;
  int workers = 1;
  int n_wm = 150;
  int human_len = 600;
  std::string grid_e, grid_p;
  std::string format = "json";
  int bridge_n = 30;
  int oov_buckets = 64;
};

void run_evaluate(const EvaluateOpts& o) {
  const auto ref_vocab = load_ref(o.ref_vocab, o.oov_buckets);
  std::optional<Vocabulary> llm_vocab;
  if (!o.llm_vocab.empty()) llm_vocab.emplace(load_llm(o.llm_vocab));
  const Vocabulary* llm = llm_vocab ? &*llm_vocab : nullptr;
  const auto det = certmark::load_detector(o.detector, ref_vocab);
  std::optional<certmark::GeneratorModel> gen;
  if (!o.gen.empty()) gen.emplace(certmark::load_generator(o.gen, ref_vocab));
  const auto mode = parse_mode(o.mode);

  // --attack none | <kind>:<fraction>, e.g. swap:0.2 or copy-paste:150:600.
  std::optional<certmark::AttackSpec> attack;
  if (o.attack != "none") {
    certmark::AttackSpec spec;
    std::istringstream in(o.attack);
    std::string kind, arg;
    std::getline(in, kind, ':');
    spec.kind = certmark::parse_attack_kind(kind);
    spec.seed = o.seed;
    if (spec.kind == certmark::AttackSpec::Kind::copy_paste) {
      spec.n_wm = o.n_wm;
      spec.human_len = o.human_len;
      if (std::getline(in, arg, ':')) spec.n_wm = std::stoi(arg);
      if (std::getline(in, arg, ':')) spec.human_len = std::stoi(arg);
    } else if (std::getline(in, arg, ':')) {
      spec.fraction = std::stod(arg);
    }
    attack = spec;
  }

  std::vector<TokenSeq> human_pool;
  if (attack && attack->kind == certmark::AttackSpec::Kind::copy_paste) {
    if (o.human.empty())
      throw CLI::ValidationError("--human", "copy-paste needs a human-text pool");
    for (const auto& rec : certmark::read_jsonl(o.human)) {
      auto seq = record_ref_seq(rec, ref_vocab, llm, o.bridge_n);
      if (static_cast<int>(seq.ids.size()) >= attack->human_len)
        human_pool.push_back(std::move(seq));
    }
    if (human_pool.empty()) throw DataError("no human document reaches human_len tokens");
  }

  CounterRng attack_root(o.seed ^ 0x5eedULL);
  CounterRng cert_root(o.seed);
  certmark::EvalReport report;
  std::vector<certmark::CertifiedResult> results;
  std::vector<int> truth;
  int idx = 0;
  for (const auto& rec : certmark::read_jsonl(o.dataset)) {
    if (!rec.contains("label")) throw DataError("evaluate: dataset record missing 'label'");
    auto seq = record_ref_seq(rec, ref_vocab, llm, o.bridge_n);
    if (attack) {
      auto rng = attack_root.fork(static_cast<std::uint64_t>(idx));
      if (attack->kind == certmark::AttackSpec::Kind::copy_paste) {
        seq = certmark::copy_paste(seq, human_pool[idx % human_pool.size()],
                                   attack->n_wm, attack->human_len, rng);
      } else {
        seq = certmark::apply_edit(seq, *attack, ref_vocab, rng);
      }
    }
    const auto cert =
        certmark::certify(det, seq, o.noise, o.n0, o.alpha, mode, o.n_sel,
                          cert_root.fork(static_cast<std::uint64_t>(idx)), o.workers);

    certmark::SampleRecord s;
    s.id = idx;
    s.label = rec.at("label").get<int>();
    s.prediction = cert.label;
    s.p_value = cert.p_value;
    s.pA_lower = cert.pA_lower;
    s.rad_e = cert.rad_e;
    s.rad_p = cert.rad_p;
    if (gen && static_cast<int>(seq.ids.size()) > gen->w()) {
      certmark::GenParams zp;
      zp.w = gen->w();
      s.z = certmark::z_score(seq, *gen, gen->gamma(), zp);
    }
    report.samples.push_back(s);
    results.push_back(cert);
    truth.push_back(s.label);
    ++idx;
  }
  if (results.empty()) throw DataError("evaluate: empty dataset");

  std::vector<certmark::Label> preds;
  for (const auto& r : results) preds.push_back(r.label);
  report.metrics = certmark::confusion_metrics(preds, truth);

  report.radius_grid_e = o.grid_e.empty() ? std::vector<double>() : parse_grid(o.grid_e);
  if (report.radius_grid_e.empty()) {
    for (int k = 0; k <= 12; ++k) report.radius_grid_e.push_back(o.noise.sigma * 0.25 * k);
  }
  report.radius_grid_p = o.grid_p.empty() ? std::vector<double>() : parse_grid(o.grid_p);
  if (report.radius_grid_p.empty()) {
    for (int k = 0; k <= 8; ++k) report.radius_grid_p.push_back(o.noise.lambda * k / 8.0);
  }
  report.curve_e = certmark::certified_accuracy(results, truth, report.radius_grid_e,
                                                certmark::RadiusSpace::embedding);
  report.curve_p = certmark::certified_accuracy(results, truth, report.radius_grid_p,
                                                certmark::RadiusSpace::permutation);

  report.metadata["alpha"] = std::to_string(o.alpha);
  report.metadata["attack"] = o.attack;
  report.metadata["dataset"] = o.dataset;
  report.metadata["detector"] = o.detector;
  report.metadata["format_version"] = std::to_string(certmark::kFormatVersion);
  report.metadata["lambda"] = std::to_string(o.noise.lambda);
  report.metadata["mode"] = o.mode;
  report.metadata["n0"] = std::to_string(o.n0);
  report.metadata["n_sel"] = std::to_string(o.n_sel);
  report.metadata["seed"] = std::to_string(o.seed);
  report.metadata["sigma"] = std::to_string(o.noise.sigma);
  report.metadata["vocab_checksum"] = std::to_string(ref_vocab.checksum());

  certmark::emit_report(report, o.out, o.format);
  json summary;
  summary["out"] = o.out;
  summary["samples"] = report.samples.size();
  summary["f1"] = report.metrics.f1;
  std::cout << summary.dump() << '\n';
}

// --------------------------------------------------------------------- report

struct ReportOpts {
  std::string in, out;
  std::string format = "csv";
};

void run_report(const ReportOpts& o) {
  const auto report = certmark::parse_report(o.in);
  certmark::emit_report(report, o.out, o.format);
  json summary;
  summary["out"] = o.out;
  summary["samples"] = report.samples.size();
  std::cout << summary.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified-robust text watermarking toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key-value config file; flags override");
  app.get_formatter()->column_width(26);

  // build-vocab ---------------------------------------------------------
  auto bv = std::make_shared<BuildVocabOpts>();
  auto* bv_cmd = app.add_subcommand("build-vocab", "generate the synthetic vocabulary/corpus fixtures");
  bv_cmd->add_option("--out-dir", bv->out_dir, "output directory")->required();
  bv_cmd->add_option("--words", bv->vocab.n_words, "content words")->capture_default_str();
  bv_cmd->add_option("--dim", bv->vocab.dim, "embedding dimension")->capture_default_str();
  bv_cmd->add_option("--emb-scale", bv->vocab.emb_scale, "embedding coordinate std")->capture_default_str();
  bv_cmd->add_option("--split-prob", bv->vocab.split_prob, "two-piece subword fraction")->capture_default_str();
  bv_cmd->add_option("--seed", bv->vocab.seed, "vocabulary seed")->capture_default_str();
  bv_cmd->add_option("--docs", bv->corpus.n_docs, "corpus documents")->capture_default_str();
  bv_cmd->add_option("--doc-words", bv->corpus.doc_words, "words per document")->capture_default_str();
  bv_cmd->add_option("--zipf", bv->corpus.zipf_s, "Zipf exponent")->capture_default_str();
  bv_cmd->add_option("--phrase-prob", bv->corpus.phrase_prob, "stock phrase rate")->capture_default_str();
  bv_cmd->add_option("--n-phrases", bv->corpus.n_phrases, "stock phrase count")->capture_default_str();
  bv_cmd->add_option("--corpus-seed", bv->corpus.seed, "corpus seed")->capture_default_str();
  bv_cmd->add_option("--prompts", bv->n_prompts, "prompt count")->capture_default_str();
  bv_cmd->add_option("--prompt-words", bv->prompt_words, "words per prompt")->capture_default_str();
  bv_cmd->add_option("--prompts-seed", bv->prompts_seed, "prompts seed")->capture_default_str();
  bv_cmd->callback([bv, bv_cmd] { echo_config(*bv_cmd); run_build_vocab(*bv); });

  // train-lm ------------------------------------------------------------
  auto tl = std::make_shared<TrainLmOpts>();
  auto* tl_cmd = app.add_subcommand("train-lm", "count-train the toy n-gram LM");
  tl_cmd->add_option("--llm-vocab", tl->llm_vocab, "LLM vocabulary path")->required();
  tl_cmd->add_option("--corpus", tl->corpus, "jsonl corpus with 'text'")->required();
  tl_cmd->add_option("--order", tl->order, "context length")->capture_default_str()
      ->check(CLI::Range(1, 4));
  tl_cmd->add_option("--smoothing", tl->smoothing, "additive smoothing a")->capture_default_str();
  tl_cmd->add_option("--out", tl->out, "model bundle path")->required();
  tl_cmd->callback([tl, tl_cmd] { echo_config(*tl_cmd); run_train_lm(*tl); });

  // init-generator ------------------------------------------------------
  auto ig = std::make_shared<InitGenOpts>();
  auto* ig_cmd = app.add_subcommand("init-generator", "key and calibrate the green-token generator");
  ig_cmd->add_option("--ref-vocab", ig->ref_vocab, "reference vocabulary path")->required();
  ig_cmd->add_option("--seed", ig->seed, "watermark key")->capture_default_str();
  ig_cmd->add_option("--gamma", ig->gamma, "target green fraction")->capture_default_str();
  ig_cmd->add_option("--window", ig->window, "window w")->capture_default_str();
  ig_cmd->add_option("--oov-buckets", ig->oov_buckets, "OOV hash buckets")->capture_default_str();
  ig_cmd->add_option("--out", ig->out, "model bundle path")->required();
  ig_cmd->callback([ig, ig_cmd] { echo_config(*ig_cmd); run_init_generator(*ig); });

  // generate ------------------------------------------------------------
  auto g = std::make_shared<GenerateOpts>();
  auto* g_cmd = app.add_subcommand("generate", "decode watermarked continuations for prompts");
  g_cmd->add_option("--llm-vocab", g->llm_vocab, "LLM vocabulary path")->required();
  g_cmd->add_option("--ref-vocab", g->ref_vocab, "reference vocabulary path")->required();
  g_cmd->add_option("--lm", g->lm, "toy LM bundle")->required();
  g_cmd->add_option("--gen", g->gen, "generator bundle")->required();
  g_cmd->add_option("--prompts", g->prompts, "jsonl prompts with 'text'")->required();
  g_cmd->add_option("--delta", g->params.delta, "green logit boost")->capture_default_str();
  g_cmd->add_option("--topk", g->params.top_k, "candidate pool size K")->capture_default_str();
  g_cmd->add_option("--window", g->params.w, "window w")->capture_default_str();
  g_cmd->add_option("--bridge-n", g->params.bridge_n, "bridge context length N")->capture_default_str();
  g_cmd->add_option("--strategy", g->strategy, "sample|beam")->capture_default_str()
      ->check(CLI::IsMember({"sample", "beam"}));
  g_cmd->add_option("--temperature", g->temperature, "sampling temperature")->capture_default_str();
  g_cmd->add_option("--beam-width", g->beam_width, "beam width")->capture_default_str();
  g_cmd->add_option("--max-len", g->max_len, "continuation tokens")->capture_default_str();
  g_cmd->add_option("--seed", g->seed, "decode seed")->capture_default_str();
  g_cmd->add_option("--oov-buckets", g->oov_buckets, "OOV hash buckets")->capture_default_str();
  g_cmd->add_option("--out", g->out, "jsonl output")->required();
  g_cmd->callback([g, g_cmd] { echo_config(*g_cmd); run_generate(*g); });

  // train-detector ------------------------------------------------------
  auto td = std::make_shared<TrainDetOpts>();
  auto* td_cmd = app.add_subcommand("train-detector", "noise-injected SGD training of the detector");
  td_cmd->add_option("--ref-vocab", td->ref_vocab, "reference vocabulary path")->required();
  td_cmd->add_option("--llm-vocab", td->llm_vocab, "LLM vocabulary (to bridge 'text' records)");
  td_cmd->add_option("--corpus", td->corpus, "labeled jsonl corpus")->required();
  td_cmd->add_option("--sigma", td->cfg.noise.sigma, "Gaussian noise std")->capture_default_str();
  td_cmd->add_option("--lambda", td->cfg.noise.lambda, "shuffle group length")->capture_default_str();
  td_cmd->add_option("--strategy", td->strategy, "duplicate|joint")->capture_default_str()
      ->check(CLI::IsMember({"duplicate", "joint"}));
  td_cmd->add_option("--epochs", td->cfg.epochs, "training epochs")->capture_default_str();
  td_cmd->add_option("--lr", td->cfg.lr, "learning rate")->capture_default_str();
  td_cmd->add_option("--batch", td->cfg.batch, "batch size")->capture_default_str();
  td_cmd->add_option("--seed", td->cfg.seed, "training seed")->capture_default_str();
  td_cmd->add_option("--init-seed", td->init_seed, "weight init seed")->capture_default_str();
  td_cmd->add_option("--window", td->window, "window w")->capture_default_str();
  td_cmd->add_option("--max-len", td->max_len, "max reference tokens")->capture_default_str();
  td_cmd->add_option("--bridge-n", td->bridge_n, "bridge context length N")->capture_default_str();
  td_cmd->add_option("--oov-buckets", td->oov_buckets, "OOV hash buckets")->capture_default_str();
  td_cmd->add_option("--out", td->out, "model bundle path")->required();
  td_cmd->callback([td, td_cmd] { echo_config(*td_cmd); run_train_detector(*td); });

  // attack ---------------------------------------------------------------
  auto at = std::make_shared<AttackOpts>();
  auto* at_cmd = app.add_subcommand("attack", "apply a removal attack to each record");
  at_cmd->add_option("--ref-vocab", at->ref_vocab, "reference vocabulary path")->required();
  at_cmd->add_option("--llm-vocab", at->llm_vocab, "LLM vocabulary (to bridge 'text' records)");
  at_cmd->add_option("--kind", at->kind, "delete|swap|substitute|copy-paste")->capture_default_str();
  at_cmd->add_option("--fraction", at->fraction, "edited fraction")->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  at_cmd->add_option("--seed", at->seed, "attack seed")->capture_default_str();
  at_cmd->add_option("--n-wm", at->n_wm, "copy-paste watermark tokens")->capture_default_str();
  at_cmd->add_option("--human-len", at->human_len, "copy-paste human tokens")->capture_default_str();
  at_cmd->add_option("--human", at->human, "jsonl pool of human texts (copy-paste)");
  at_cmd->add_option("--bridge-n", at->bridge_n, "bridge context length N")->capture_default_str();
  at_cmd->add_option("--oov-buckets", at->oov_buckets, "OOV hash buckets")->capture_default_str();
  at_cmd->add_option("--in", at->in, "jsonl input")->required();
  at_cmd->add_option("--out", at->out, "jsonl output")->required();
  at_cmd->callback([at, at_cmd] { echo_config(*at_cmd); run_attack(*at); });

  // detect ---------------------------------------------------------------
  auto de = std::make_shared<DetectOpts>();
  auto* de_cmd = app.add_subcommand("detect", "plain (noise-free) detector votes");
  de_cmd->add_option("--detector", de->detector, "detector bundle")->required();
  de_cmd->add_option("--ref-vocab", de->ref_vocab, "reference vocabulary path")->required();
  de_cmd->add_option("--llm-vocab", de->llm_vocab, "LLM vocabulary (to bridge 'text' records)");
  de_cmd->add_option("--gen", de->gen, "generator bundle (adds z-scores)");
  de_cmd->add_flag("--sliding-window", de->sliding, "segment long texts");
  de_cmd->add_option("--window", de->window, "segment length")->capture_default_str();
  de_cmd->add_option("--stride", de->stride, "segment stride")->capture_default_str();
  de_cmd->add_option("--bridge-n", de->bridge_n, "bridge context length N")->capture_default_str();
  de_cmd->add_option("--oov-buckets", de->oov_buckets, "OOV hash buckets")->capture_default_str();
  de_cmd->add_option("--input", de->in, "jsonl input")->required();
  de_cmd->add_option("--out", de->out, "jsonl output")->required();
  de_cmd->callback([de, de_cmd] { echo_config(*de_cmd); run_detect(*de); });

  // certify ---------------------------------------------------------------
  auto ce = std::make_shared<CertifyOpts>();
  auto* ce_cmd = app.add_subcommand("certify", "Monte-Carlo smoothed prediction + certified radii");
  ce_cmd->add_option("--detector", ce->detector, "detector bundle")->required();
  ce_cmd->add_option("--ref-vocab", ce->ref_vocab, "reference vocabulary path")->required();
  ce_cmd->add_option("--llm-vocab", ce->llm_vocab, "LLM vocabulary (to bridge 'text' records)");
  ce_cmd->add_option("--input", ce->in, "jsonl input")->required();
  ce_cmd->add_option("--sigma", ce->noise.sigma, "Gaussian noise std")->capture_default_str();
  ce_cmd->add_option("--lambda", ce->noise.lambda, "shuffle group length")->capture_default_str();
  ce_cmd->add_option("--n0", ce->n0, "Monte-Carlo draws N0")->capture_default_str();
  ce_cmd->add_option("--n-sel", ce->n_sel, "selection draws (two_stage mode)")->capture_default_str();
  ce_cmd->add_option("--alpha", ce->alpha, "confidence level")->capture_default_str();
  ce_cmd->add_option("--mode", ce->mode, "paper|two_stage")->capture_default_str();
  ce_cmd->add_option("--seed", ce->seed, "certification seed")->capture_default_str();
  ce_cmd->add_option("--workers", ce->workers, "OpenMP draw workers")->capture_default_str();
  ce_cmd->add_option("--bridge-n", ce->bridge_n, "bridge context length N")->capture_default_str();
  ce_cmd->add_option("--oov-buckets", ce->oov_buckets, "OOV hash buckets")->capture_default_str();
  ce_cmd->add_option("--out", ce->out, "jsonl output")->required();
  ce_cmd->callback([ce, ce_cmd] { echo_config(*ce_cmd); run_certify(*ce); });

  // evaluate ---------------------------------------------------------------
  auto ev = std::make_shared<EvaluateOpts>();
  auto* ev_cmd = app.add_subcommand("evaluate", "attack + certify a labeled dataset into a report");
  ev_cmd->add_option("--detector", ev->detector, "detector bundle")->required();
  ev_cmd->add_option("--ref-vocab", ev->ref_vocab, "reference vocabulary path")->required();
  ev_cmd->add_option("--llm-vocab", ev->llm_vocab, "LLM vocabulary (to bridge 'text' records)");
  ev_cmd->add_option("--gen", ev->gen, "generator bundle (adds z-scores)");
  ev_cmd->add_option("--dataset", ev->dataset, "labeled jsonl dataset")->required();
  ev_cmd->add_option("--attack", ev->attack, "none | kind:fraction | copy-paste:n_wm:human_len")
      ->capture_default_str();
  ev_cmd->add_option("--human", ev->human, "jsonl pool of human texts (copy-paste)");
  ev_cmd->add_option("--sigma", ev->noise.sigma, "Gaussian noise std")->capture_default_str();
  ev_cmd->add_option("--lambda", ev->noise.lambda, "shuffle group length")->capture_default_str();
  ev_cmd->add_option("--n0", ev->n0, "Monte-Carlo draws N0")->capture_default_str();
  ev_cmd->add_option("--n-sel", ev->n_sel, "selection draws (two_stage mode)")->capture_default_str();
  ev_cmd->add_option("--alpha", ev->alpha, "confidence level")->capture_default_str();
  ev_cmd->add_option("--mode", ev->mode, "paper|two_stage")->capture_default_str();
  ev_cmd->add_option("--seed", ev->seed, "evaluation seed")->capture_default_str();
  ev_cmd->add_option("--workers", ev->workers, "OpenMP draw workers")->capture_default_str();
  ev_cmd->add_option("--grid-e", ev->grid_e, "embedding radius grid, comma separated");
  ev_cmd->add_option("--grid-p", ev->grid_p, "permutation radius grid, comma separated");
  ev_cmd->add_option("--format", ev->format, "json|csv")->capture_default_str()
      ->check(CLI::IsMember({"json", "csv"}));
  ev_cmd->add_option("--bridge-n", ev->bridge_n, "bridge context length N")->capture_default_str();
  ev_cmd->add_option("--oov-buckets", ev->oov_buckets, "OOV hash buckets")->capture_default_str();
  ev_cmd->add_option("--out", ev->out, "report path")->required();
  ev_cmd->callback([ev, ev_cmd] { echo_config(*ev_cmd); run_evaluate(*ev); });

  // report ---------------------------------------------------------------
  auto rp = std::make_shared<ReportOpts>();
  auto* rp_cmd = app.add_subcommand("report", "re-emit / convert a json report");
  rp_cmd->add_option("--in", rp->in, "json report")->required();
  rp_cmd->add_option("--format", rp->format, "json|csv")->capture_default_str()
      ->check(CLI::IsMember({"json", "csv"}));
  rp_cmd->add_option("--out", rp->out, "output path")->required();
  rp_cmd->callback([rp, rp_cmd] { echo_config(*rp_cmd); run_report(*rp); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const certmark::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const certmark::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
