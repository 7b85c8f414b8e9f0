#pragma once

#include <vector>

#include "certmark/detector.hpp"
#include "certmark/wmgen.hpp"

namespace certmark {

// Detector training corpus: n_pos watermarked generations (label 1) plus
// n_neg human texts (label 0), everything bridge-encoded to the reference
// namespace and length-matched at cfg.max_len tokens. The generator z-score
// is recorded per sample. Prompts for the positive side are short prefixes of
// the human corpus; negatives are the human documents themselves, so the two
// classes differ only by the watermark.
std::vector<LabeledSample> build_dataset(const ToyLM& lm, const GeneratorModel& gen,
                                         int n_pos, int n_neg,
                                         const std::vector<TokenSeq>& human_corpus,
                                         const GenParams& params,
                                         const DecodeConfig& cfg);

}  // namespace certmark
