#include "certmark/tokenspace.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "certmark/errors.hpp"
#include "certmark/rng.hpp"

namespace certmark {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

}  // namespace

Vocabulary Vocabulary::load(const std::string& path, Ns ns, int oov_buckets) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);

  Vocabulary v;
  v.ns_ = ns;
  v.oov_buckets_ = oov_buckets;

  std::string line;
  int line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": missing tab separator");
    }
    std::string surface = line.substr(0, tab);
    if (surface.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty surface");
    }
    row.clear();
    std::istringstream floats(line.substr(tab + 1));
    double f;
    while (floats >> f) row.push_back(f);
    if (!floats.eof()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed embedding value");
    }
    if (row.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": no embedding values");
    }
    if (v.dim_ == 0) {
      v.dim_ = static_cast<int>(row.size());
    } else if (static_cast<int>(row.size()) != v.dim_) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(v.dim_) + " values, got " +
                      std::to_string(row.size()));
    }
    if (!v.index_.emplace(surface, static_cast<int>(v.surfaces_.size())).second) {
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate surface '" +
                      surface + "'");
    }
    v.surfaces_.push_back(std::move(surface));
    v.embeddings_.insert(v.embeddings_.end(), row.begin(), row.end());
  }
  if (v.surfaces_.empty()) throw DataError(path + ": empty vocabulary");

  // Synthesize OOV bucket embeddings deterministically: one stream per bucket,
  // scaled to the table's RMS so buckets look like ordinary tokens.
  const double rms = v.embedding_rms();
  for (int b = 0; b < oov_buckets; ++b) {
    CounterRng rng = CounterRng(0x00564f4f6b657973ULL).fork(b);  // fixed internal key
    for (int j = 0; j < v.dim_; ++j) v.embeddings_.push_back(rms * rng.next_normal());
  }

  std::uint64_t h = 14695981039346656037ULL;
  const char tag = ns == Ns::reference ? 'r' : 'l';
  hash_bytes(h, &tag, 1);
  hash_bytes(h, &v.dim_, sizeof v.dim_);
  hash_bytes(h, &oov_buckets, sizeof oov_buckets);
  for (int i = 0; i < v.size(); ++i) {
    hash_bytes(h, v.surfaces_[i].data(), v.surfaces_[i].size());
    const char sep = '\0';
    hash_bytes(h, &sep, 1);
  }
  hash_bytes(h, v.embeddings_.data(), v.embeddings_.size() * sizeof(double));
  v.checksum_ = h;
  return v;
}

const std::string& Vocabulary::surface(int id) const {
  if (id < 0 || id >= size()) {
    throw DataError("token id " + std::to_string(id) + " has no surface (|V|=" +
                    std::to_string(size()) + ")");
  }
  return surfaces_[id];
}

std::optional<int> Vocabulary::lookup(const std::string& surface) const {
  const auto it = index_.find(surface);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> Vocabulary::embedding(int id) const {
  if (id < 0 || id >= total_ids()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return {embeddings_.data() + static_cast<std::size_t>(id) * dim_,
          static_cast<std::size_t>(dim_)};
}

double Vocabulary::embedding_rms() const {
  const std::size_t n = static_cast<std::size_t>(size()) * dim_;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += embeddings_[i] * embeddings_[i];
  return std::sqrt(ss / static_cast<double>(n));
}

PermutationVector PermutationVector::identity(int n) {
  PermutationVector u;
  u.indices.resize(n);
  std::iota(u.indices.begin(), u.indices.end(), 0);
  return u;
}

bool PermutationVector::is_permutation() const {
  const int n = static_cast<int>(indices.size());
  std::vector<char> seen(n, 0);
  for (int x : indices) {
    if (x < 0 || x >= n || seen[x]) return false;
    seen[x] = 1;
  }
  return true;
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
      if (!std::isspace(c)) out.emplace_back(1, static_cast<char>(c));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

TokenSeq encode_reference(const std::string& text, const Vocabulary& vocab) {
  TokenSeq seq;
  seq.ns = Ns::reference;
  for (const auto& word : tokenize_words(text)) {
    if (auto id = vocab.lookup(word)) {
      seq.ids.push_back(*id);
    } else {
      if (vocab.oov_buckets() == 0) {
        throw DataError("OOV word '" + word + "' and vocabulary has no OOV buckets");
      }
      seq.ids.push_back(vocab.size() +
                        static_cast<int>(fnv1a(word) % vocab.oov_buckets()));
    }
  }
  return seq;
}

TokenSeq encode_llm(const std::string& text, const Vocabulary& vocab) {
  TokenSeq seq;
  seq.ns = Ns::llm;
  for (const auto& word : tokenize_words(text)) {
    if (auto whole = vocab.lookup("_" + word)) {
      seq.ids.push_back(*whole);
      continue;
    }
    bool matched = false;
    for (int cut = static_cast<int>(word.size()) - 1; cut >= 1 && !matched; --cut) {
      const auto head = vocab.lookup("_" + word.substr(0, cut));
      if (!head) continue;
      const auto tail = vocab.lookup(word.substr(cut));
      if (!tail) continue;
      seq.ids.push_back(*head);
      seq.ids.push_back(*tail);
      matched = true;
    }
    if (!matched) {
      const auto unk = vocab.lookup("<unk>");
      if (!unk) throw DataError("word '" + word + "' not encodable and no <unk> token");
      seq.ids.push_back(*unk);
    }
  }
  return seq;
}

std::string decode_llm(const TokenSeq& seq, const Vocabulary& vocab) {
  std::string out;
  for (int id : seq.ids) {
    const std::string& s = vocab.surface(id);
    if (!s.empty() && s[0] == '_') {
      if (!out.empty()) out.push_back(' ');
      out.append(s, 1, std::string::npos);
    } else {
      out.append(s);
    }
  }
  return out;
}

int bridge_at(std::span<const int> llm_ids, int i, const Vocabulary& llm_vocab,
              const Vocabulary& ref_vocab, int n_window) {
  const int lo = std::max(0, i - n_window);
  TokenSeq window;
  window.ns = Ns::llm;
  window.ids.assign(llm_ids.begin() + lo, llm_ids.begin() + i + 1);
  const TokenSeq ref = encode_reference(decode_llm(window, llm_vocab), ref_vocab);
  if (ref.ids.empty()) {
    throw DataError("bridge window at position " + std::to_string(i) +
                    " decoded to an empty reference encoding");
  }
  return ref.ids.back();
}

TokenSeq bridge_encode(const TokenSeq& seq, const Vocabulary& llm_vocab,
                       const Vocabulary& ref_vocab, int n_window) {
  if (n_window < 1) throw std::invalid_argument("bridge_encode: n_window must be >= 1");
  TokenSeq out;
  out.ns = Ns::reference;
  out.ids.reserve(seq.ids.size());
  for (int i = 0; i < static_cast<int>(seq.ids.size()); ++i) {
    out.ids.push_back(bridge_at(seq.ids, i, llm_vocab, ref_vocab, n_window));
  }
  return out;
}

std::pair<EmbeddingMatrix, PermutationVector> split_embedding(
    const TokenSeq& seq, const Vocabulary& vocab) {
  EmbeddingMatrix w;
  w.n = static_cast<int>(seq.ids.size());
  w.d = vocab.dim();
  w.a.reserve(static_cast<std::size_t>(w.n) * w.d);
  for (int id : seq.ids) {
    const auto e = vocab.embedding(id);
    w.a.insert(w.a.end(), e.begin(), e.end());
  }
  return {std::move(w), PermutationVector::identity(w.n)};
}

EmbeddingMatrix compose(const EmbeddingMatrix& w, const PermutationVector& u) {
  if (w.n != static_cast<int>(u.indices.size())) {
    throw DataError("compose: W has " + std::to_string(w.n) + " rows but U has " +
                    std::to_string(u.indices.size()));
  }
  if (!u.is_permutation()) throw DataError("compose: U is not a permutation");
  EmbeddingMatrix out;
  out.n = w.n;
  out.d = w.d;
  out.a.resize(w.a.size());
  for (int i = 0; i < w.n; ++i) {
    std::memcpy(out.a.data() + static_cast<std::size_t>(u.indices[i]) * w.d,
                w.a.data() + static_cast<std::size_t>(i) * w.d, sizeof(double) * w.d);
  }
  return out;
}

}  // namespace certmark
