#pragma once

#include <vector>

#include "cgcre/corpus.hpp"
#include "cgcre/tensor.hpp"

namespace cgcre {

// Linear-chain CRF over encoder emissions. Scores use emissions O (n x k)
// and transitions T (k x k) where T[i][j] scores tag i followed by tag j.
// There is no START/STOP augmentation: the transition sum runs over the n-1
// adjacent pairs.

// sum_i O[i][y_i] + sum_i T[y_i][y_{i+1}]; differentiable in O and T.
Tensor sequence_score(const Tensor& emissions, const TagSequence& tags, const Tensor& transitions);

// log sum over all k^n tag sequences of exp(score), via the forward
// algorithm in O(n k^2); differentiable.
Tensor log_partition(const Tensor& emissions, const Tensor& transitions);

// log_partition - sequence_score(gold); always >= 0.
Tensor crf_nll(const Tensor& emissions, const TagSequence& gold, const Tensor& transitions);

// Additive decode-time penalty making structurally illegal BIO transitions
// (anything -> I-t except from B-t/I-t) unreachable. k must equal kNumTags.
std::vector<double> bio_transition_penalty(int k);

// Max-scoring tag sequence; ties break toward the lower tag id. The optional
// penalty matrix (k x k, row-major) is added to the transitions.
TagSequence viterbi_decode(const Tensor& emissions, const Tensor& transitions,
                           const std::vector<double>* penalty = nullptr);

}  // namespace cgcre
