#pragma once

#include <vector>

#include "cgcre/corpus.hpp"
#include "cgcre/tensor.hpp"

namespace cgcre {

// Relation classes: the two annotated labels plus NONE for candidate pairs
// without a relation.
inline constexpr int kNumRelationClasses = 3;
inline constexpr int kRelationNone = 2;
inline int relation_class(RelationLabel label) { return static_cast<int>(label); }

// Neighbor structure over the dependency tree. Forward arcs run
// head -> dependent, backward arcs dependent -> head; every token also has a
// self-loop unless it is disabled for diagnostics.
struct DependencyAdjacency {
  int length = 0;
  // Row-normalized? No: plain 0/1 sums, stored as n x n matrices so the
  // neighbor aggregation is a matrix product.
  Tensor forward;   // forward.at(w, v) == 1 iff v in N_fwd(w)
  Tensor backward;  // backward.at(w, v) == 1 iff v in N_bwd(w)
  std::vector<bool> has_fwd_neighbor;
  std::vector<bool> has_bwd_neighbor;
};

DependencyAdjacency build_adjacency(const Tweet& tweet, bool self_loops = true);

// One GCN layer per direction: weights (gcn_hidden + shared_dim) x gcn_hidden
// and bias (gcn_hidden).
struct GcnLayerParams {
  Tensor w_fwd, b_fwd;
  Tensor w_bwd, b_bwd;
};

struct BiGcnParams {
  std::vector<GcnLayerParams> layers;  // L >= 1
  int hidden = 0;
};

// Stacked bidirectional graph convolution. Each layer computes
//   h''_w = ReLU( sum_{v in N(w)} W . [h''_v_prev ; shared_v] + b )
// per direction, starting from a zero layer-0 state; the result is the
// concatenation of both directions (n x 2*hidden). Tokens with no neighbors
// stay exactly zero.
Tensor bigcn_forward(const DependencyAdjacency& adjacency, const Tensor& shared_states,
                     const BiGcnParams& params);

// Mean pooling of h'' rows over [start, end).
Tensor span_repr(const Tensor& gcn_states, const ConcernSpan& span);

struct RelationHeadParams {
  Tensor w_subject;  // 2*gcn_hidden x cls_hidden
  Tensor w_object;   // 2*gcn_hidden x cls_hidden
  Tensor bias;       // cls_hidden
  Tensor w_cls;      // cls_hidden x 3
};

// Tendency scores S = W_cls . ReLU(W_subj h_ci + W_obj h_cj + b); 1-D, 3 wide.
Tensor relation_score(const Tensor& subject_repr, const Tensor& object_repr,
                      const RelationHeadParams& head);

// Softmax over the three classes.
Tensor relation_prob(const Tensor& scores);

// Candidate pairs for a span list: every unordered pair, subject = the span
// starting earlier. target holds the relation class per pair.
struct RelationCandidate {
  int subject = 0;
  int object = 0;
  int target = kRelationNone;
};
std::vector<RelationCandidate> relation_candidates(const std::vector<ConcernSpan>& spans,
                                                   const std::vector<RelationAnnotation>& relations);

// Mean cross-entropy over candidate pairs; zero when fewer than two spans.
Tensor relation_loss(const std::vector<ConcernSpan>& spans,
                     const std::vector<RelationAnnotation>& relations, const Tensor& gcn_states,
                     const RelationHeadParams& head);

}  // namespace cgcre
