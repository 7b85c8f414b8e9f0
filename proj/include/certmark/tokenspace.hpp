#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace certmark {

enum class Ns { reference, llm };

// Immutable token table with embeddings. Reference vocabularies reserve
// `oov_buckets` extra ids past |V| for hashed out-of-vocabulary words; their
// embeddings are synthesized deterministically at load time.
class Vocabulary {
 public:
  static Vocabulary load(const std::string& path, Ns ns, int oov_buckets);

  Ns ns() const { return ns_; }
  int size() const { return static_cast<int>(surfaces_.size()); }
  int dim() const { return dim_; }
  int oov_buckets() const { return oov_buckets_; }
  // Total addressable ids: regular entries plus OOV buckets.
  int total_ids() const { return size() + oov_buckets_; }

  const std::string& surface(int id) const;
  std::optional<int> lookup(const std::string& surface) const;
  // Valid for any id < total_ids(), including OOV buckets.
  std::span<const double> embedding(int id) const;

  // FNV-1a over surfaces and embedding bit patterns; ties saved models to the
  // exact vocabulary they were built with.
  std::uint64_t checksum() const { return checksum_; }

  // Root-mean-square of the regular embedding entries (used for weight
  // initialization scales).
  double embedding_rms() const;

 private:
  Ns ns_ = Ns::reference;
  int dim_ = 0;
  int oov_buckets_ = 0;
  std::vector<std::string> surfaces_;
  std::vector<double> embeddings_;  // row-major (size + oov_buckets) x dim
  std::unordered_map<std::string, int> index_;
  std::uint64_t checksum_ = 0;
};

struct TokenSeq {
  std::vector<int> ids;
  Ns ns = Ns::reference;

  bool operator==(const TokenSeq&) const = default;
};

// Row-major n x d matrix of per-position embeddings.
struct EmbeddingMatrix {
  int n = 0;
  int d = 0;
  std::vector<double> a;

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * d + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * d + j]; }
  std::span<const double> row(int i) const {
    return {a.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
  }
};

struct PermutationVector {
  std::vector<int> indices;

  static PermutationVector identity(int n);
  bool is_permutation() const;
};

// FNV-1a 64-bit string hash (OOV bucketing).
std::uint64_t fnv1a(std::string_view s);

// Lowercases and splits into word tokens: maximal runs of letters/digits;
// every other non-space character is its own token.
std::vector<std::string> tokenize_words(const std::string& text);

// Word-level encoding into a reference vocabulary; OOV words hash into the
// reserved buckets.
TokenSeq encode_reference(const std::string& text, const Vocabulary& vocab);

// Subword encoding: per word, greedy longest-match of a word-initial piece
// ('_'-prefixed surface) optionally followed by one continuation piece; words
// that cannot be covered map to "<unk>".
TokenSeq encode_llm(const std::string& text, const Vocabulary& vocab);

// Inverse of encode_llm's surface convention: '_'-prefixed pieces start a new
// space-separated word, bare pieces extend the current one.
std::string decode_llm(const TokenSeq& seq, const Vocabulary& vocab);

// Reference id assigned to position `i` of an LLM-namespace sequence: decode
// the window [max(0, i-N), i], re-encode it at word level, take the last id.
int bridge_at(std::span<const int> llm_ids, int i, const Vocabulary& llm_vocab,
              const Vocabulary& ref_vocab, int n_window);

// Tokenizer bridge: applies bridge_at at every position. Output length always
// equals input length.
TokenSeq bridge_encode(const TokenSeq& seq, const Vocabulary& llm_vocab,
                       const Vocabulary& ref_vocab, int n_window);

// E = W • U at rest: W holds the rows in sequence order, U is the identity.
std::pair<EmbeddingMatrix, PermutationVector> split_embedding(
    const TokenSeq& seq, const Vocabulary& vocab);

// Places W row i at output row U[i].
EmbeddingMatrix compose(const EmbeddingMatrix& w, const PermutationVector& u);

}  // namespace certmark
