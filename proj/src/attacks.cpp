#include "certmark/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "certmark/errors.hpp"

namespace certmark {

AttackSpec::Kind parse_attack_kind(const std::string& name) {
  if (name == "delete") return AttackSpec::Kind::delete_;
  if (name == "swap") return AttackSpec::Kind::swap;
  if (name == "substitute") return AttackSpec::Kind::substitute;
  if (name == "copy-paste" || name == "copy_paste") return AttackSpec::Kind::copy_paste;
  throw std::invalid_argument("unknown attack kind: " + name);
}

int nearest_neighbor(const Vocabulary& vocab, int id) {
  const auto target = vocab.embedding(id);
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  // Candidates are the regular entries only; OOV buckets are synthetic.
  for (int t = 0; t < vocab.size(); ++t) {
    if (t == id) continue;
    const auto e = vocab.embedding(t);
    double d2 = 0.0;
    for (std::size_t c = 0; c < e.size(); ++c) {
      const double diff = e[c] - target[c];
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = t;
    }
  }
  if (best < 0) throw DataError("nearest_neighbor: vocabulary too small");
  return best;
}

TokenSeq apply_edit(const TokenSeq& seq, const AttackSpec& spec,
                    const Vocabulary& vocab, CounterRng& rng) {
  if (spec.fraction < 0.0 || spec.fraction > 1.0) {
    throw std::invalid_argument("apply_edit: fraction must lie in [0,1]");
  }
  const int n = static_cast<int>(seq.ids.size());
  const int k = static_cast<int>(spec.fraction * n);
  TokenSeq out = seq;
  if (k == 0) return out;

  switch (spec.kind) {
    case AttackSpec::Kind::delete_: {
      // Choose k distinct positions by partial Fisher-Yates over indices.
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i;
      for (int i = 0; i < k; ++i) {
        std::swap(idx[i], idx[i + rng.next_below(n - i)]);
      }
      std::vector<char> drop(n, 0);
      for (int i = 0; i < k; ++i) drop[idx[i]] = 1;
      out.ids.clear();
      for (int i = 0; i < n; ++i) {
        if (!drop[i]) out.ids.push_back(seq.ids[i]);
      }
      break;
    }
    case AttackSpec::Kind::swap: {
      for (int i = 0; i < k && n >= 2; ++i) {
        const auto j = rng.next_below(n - 1);
        std::swap(out.ids[j], out.ids[j + 1]);
      }
      break;
    }
    case AttackSpec::Kind::substitute: {
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i;
      for (int i = 0; i < k; ++i) {
        std::swap(idx[i], idx[i + rng.next_below(n - i)]);
      }
      for (int i = 0; i < k; ++i) {
        out.ids[idx[i]] = nearest_neighbor(vocab, out.ids[idx[i]]);
      }
      break;
    }
    case AttackSpec::Kind::copy_paste:
      throw std::invalid_argument("apply_edit: copy_paste has its own entry point");
  }
  return out;
}

TokenSeq copy_paste(const TokenSeq& wm, const TokenSeq& human, int n_wm,
                    int human_len, CounterRng& rng) {
  if (static_cast<int>(wm.ids.size()) < n_wm) {
    throw DataError("copy_paste: watermarked text shorter than n_wm");
  }
  if (static_cast<int>(human.ids.size()) < human_len) {
    throw DataError("copy_paste: human text shorter than human_len");
  }
  const int offset = human_len > 0 ? static_cast<int>(rng.next_below(human_len + 1)) : 0;
  TokenSeq out;
  out.ns = wm.ns;
  out.ids.reserve(n_wm + human_len);
  out.ids.insert(out.ids.end(), human.ids.begin(), human.ids.begin() + offset);
  out.ids.insert(out.ids.end(), wm.ids.begin(), wm.ids.begin() + n_wm);
  out.ids.insert(out.ids.end(), human.ids.begin() + offset,
                 human.ids.begin() + human_len);
  return out;
}

std::int64_t permutation_displacement(const PermutationVector& u,
                                      const PermutationVector& u2) {
  if (u.indices.size() != u2.indices.size()) {
    throw DataError("permutation_displacement: length mismatch");
  }
  std::int64_t total = 0;
  for (std::size_t i = 0; i < u.indices.size(); ++i) {
    total += std::llabs(static_cast<long long>(u2.indices[i]) - u.indices[i]);
  }
  return total;
}

}  // namespace certmark
