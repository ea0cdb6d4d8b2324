#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cgcre/corpus.hpp"
#include "cgcre/tensor.hpp"
#include "cgcre/vocab.hpp"

namespace cgcre {

// Per-tweet graph of concern, attribute (type/score), and relation nodes,
// used as an auxiliary token-level input feature.
struct CgNode {
  enum class Kind { Concern, Attribute, Relation };
  enum class AttrKind { Type, Score };

  Kind kind = Kind::Concern;

  // Concern payload: which span, plus the span head token's syntactic features.
  int span_index = -1;
  std::string head_dep;
  std::string head_pos;

  // Attribute payload; owner points back at the concern node.
  AttrKind attr_kind = AttrKind::Type;
  ConcernType attr_type = ConcernType::FIN;
  double attr_score = 0.0;
  int owner_concern_node = -1;

  // Relation payload.
  RelationLabel rel_label = RelationLabel::CO_OCC;
  int rel_index = -1;
};

struct ConcernGraph {
  std::vector<CgNode> nodes;
  // Concern->attribute edges are undirected and stored once;
  // subject->relation->object edges are directed.
  std::vector<std::pair<int, int>> edges;

  // Node index of the Concern node for span s; aligned with the span list
  // the graph was built from.
  std::vector<int> concern_node_of_span;
  // The spans/relations the graph was built from.
  std::vector<ConcernSpan> spans;
  std::vector<RelationAnnotation> relations;
  // Relation node index per relation.
  std::vector<int> relation_node_of;

  int degree(int node) const;
};

// Index of the span's syntactic head token: the first token inside the span
// whose dep_head lies outside it, else the first token.
int span_head_token(const Tweet& tweet, const ConcernSpan& span);

// Builds the graph from an annotation set: one Concern node per span, two
// Attribute nodes per concern (type, score computed from sp/rt weighting with
// theta), one Relation node per relation. Throws ValidationError when a
// relation references a missing concern.
ConcernGraph build_concern_graph(const Tweet& tweet, const std::vector<ConcernSpan>& spans,
                                 const std::vector<RelationAnnotation>& relations,
                                 double normalized_retweet, double theta);

// Gold-annotation convenience.
ConcernGraph build_concern_graph(const Tweet& tweet, double normalized_retweet, double theta);

// Learned lookups behind the three-branch node embedding; every vector is
// dimension d, and w_cr has one row per node category.
struct CgEmbedderParams {
  Tensor dep_table;    // |dep vocab| x d, row 0 = UNK
  Tensor pos_table;    // |pos vocab| x d, row 0 = UNK
  Tensor type_table;   // 8 x d
  Tensor score_proj;   // d
  Tensor rel_table;    // 2 x d
  Tensor w_cr;         // 3 x d
};

struct CgVocabs {
  LabelVocab dep;
  LabelVocab pos;
};

// Three-branch node embedding:
//   Concern   -> (v_dep + v_pos) . w_cr[0]
//   Attribute -> (v_type + cs * score_proj) . w_cr[1]
//   Relation  -> v_rel . w_cr[2]
// where . is the elementwise product. Unknown dep/pos strings use the UNK row.
Tensor embed_cg_node(const CgNode& node, const CgEmbedderParams& params,
                     const CgVocabs& vocabs);

// Token-aligned n x d feature matrix: tokens inside span s receive s's
// Concern-node embedding plus the mean of s's Attribute-node embeddings; a
// relation's embedding is added to the head token of both participating
// spans; all other tokens are zero.
Tensor align_cg_to_tokens(const ConcernGraph& graph, const Tweet& tweet,
                          const CgEmbedderParams& params, const CgVocabs& vocabs);

}  // namespace cgcre
