#pragma once

#include <cstdint>
#include <string>

#include "certmark/rng.hpp"
#include "certmark/tokenspace.hpp"

namespace certmark {

struct AttackSpec {
  enum class Kind { delete_, swap, substitute, copy_paste };
  Kind kind = Kind::swap;
  double fraction = 0.0;  // edit attacks: share of positions touched
  std::uint64_t seed = 7;
  // copy_paste parameters
  int n_wm = 150;
  int human_len = 600;
};

AttackSpec::Kind parse_attack_kind(const std::string& name);

// Edit attacks on reference-namespace sequences:
//  - delete_: remove floor(fraction*n) uniformly chosen positions
//  - swap: floor(fraction*n) random adjacent transpositions
//  - substitute: replace floor(fraction*n) uniformly chosen tokens with their
//    nearest l2 embedding neighbor (self and OOV buckets excluded)
TokenSeq apply_edit(const TokenSeq& seq, const AttackSpec& spec,
                    const Vocabulary& vocab, CounterRng& rng);

// Insert a contiguous block of n_wm watermarked tokens at a random offset
// inside human_len human tokens. Output length is n_wm + human_len.
TokenSeq copy_paste(const TokenSeq& wm, const TokenSeq& human, int n_wm,
                    int human_len, CounterRng& rng);

// Sum_i |u2_i - u_i|, the l1 displacement between two permutations.
std::int64_t permutation_displacement(const PermutationVector& u,
                                      const PermutationVector& u2);

// Exhaustive nearest-neighbor lookup used by substitute (exposed for tests).
int nearest_neighbor(const Vocabulary& vocab, int id);

}  // namespace certmark
