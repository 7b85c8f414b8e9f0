#include "certmark/dataset.hpp"

#include <string>

#include "certmark/errors.hpp"
#include "certmark/evalkit.hpp"
#include "certmark/rng.hpp"

namespace certmark {
namespace {

constexpr int kPromptTokens = 5;

}  // namespace

std::vector<LabeledSample> build_dataset(const ToyLM& lm, const GeneratorModel& gen,
                                         int n_pos, int n_neg,
                                         const std::vector<TokenSeq>& human_corpus,
                                         const GenParams& params,
                                         const DecodeConfig& cfg) {
  if (n_pos < 1 || n_neg < 1) throw DataError("build_dataset: n_pos, n_neg must be >= 1");
  const Vocabulary& llm_vocab = lm.vocab();
  const Vocabulary& ref_vocab = gen.vocab();

  std::vector<const TokenSeq*> eligible;
  for (const auto& doc : human_corpus) {
    if (doc.ns != Ns::llm)
      throw DataError("build_dataset: human corpus must be LLM-namespace token sequences");
    if (static_cast<int>(doc.ids.size()) >= cfg.max_len + kPromptTokens)
      eligible.push_back(&doc);
  }
  if (static_cast<int>(eligible.size()) < n_neg)
    throw DataError("build_dataset: insufficient human corpus: " +
                    std::to_string(eligible.size()) + " documents of >= " +
                    std::to_string(cfg.max_len + kPromptTokens) + " tokens, need " +
                    std::to_string(n_neg));

  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(n_pos) + n_neg);
  CounterRng seeder(cfg.seed);

  for (int i = 0; i < n_pos; ++i) {
    const auto& src = *eligible[i % eligible.size()];
    TokenSeq prompt{{src.ids.begin(), src.ids.begin() + kPromptTokens}, Ns::llm};
    DecodeConfig sample_cfg = cfg;
    sample_cfg.seed = seeder.fork(static_cast<std::uint64_t>(i)).next_u64();
    const TokenSeq text = generate_watermarked(lm, gen, prompt, params, sample_cfg);
    LabeledSample s;
    s.seq = bridge_encode(text, llm_vocab, ref_vocab, params.bridge_n);
    s.label = 1;
    s.z = z_score(s.seq, gen, gen.gamma(), params);
    out.push_back(std::move(s));
  }
  for (int i = 0; i < n_neg; ++i) {
    const auto& src = *eligible[i % eligible.size()];
    // Skip the prompt region so a shared prefix never leaks across classes.
    TokenSeq body{{src.ids.begin() + kPromptTokens,
                   src.ids.begin() + kPromptTokens + cfg.max_len},
                  Ns::llm};
    LabeledSample s;
    s.seq = bridge_encode(body, llm_vocab, ref_vocab, params.bridge_n);
    s.label = 0;
    s.z = z_score(s.seq, gen, gen.gamma(), params);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace certmark
