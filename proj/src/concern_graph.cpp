#include "cgcre/concern_graph.hpp"

#include <string>

#include "cgcre/errors.hpp"

namespace cgcre {

int ConcernGraph::degree(int node) const {
  int d = 0;
  for (const auto& [from, to] : edges) {
    if (from == node || to == node) ++d;
  }
  return d;
}

int span_head_token(const Tweet& tweet, const ConcernSpan& span) {
  for (int i = span.start; i < span.end; ++i) {
    const int head = tweet.tokens[i].dep_head;
    if (head < span.start || head >= span.end) return i;
  }
  return span.start;
}

ConcernGraph build_concern_graph(const Tweet& tweet, const std::vector<ConcernSpan>& spans,
                                 const std::vector<RelationAnnotation>& relations,
                                 double normalized_retweet, double theta) {
  ConcernGraph g;
  g.spans = spans;
  g.relations = relations;
  const double cs = concern_score(tweet.sentiment_polarity, normalized_retweet, theta);

  // Step 1: one Concern node per detected span.
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const int head = span_head_token(tweet, spans[s]);
    CgNode node;
    node.kind = CgNode::Kind::Concern;
    node.span_index = static_cast<int>(s);
    node.head_dep = tweet.tokens[head].dep_label;
    node.head_pos = tweet.tokens[head].pos;
    g.concern_node_of_span.push_back(static_cast<int>(g.nodes.size()));
    g.nodes.push_back(node);
    g.spans[s].score = cs;
  }
  // Step 2: type and score attribute nodes, each tied to its concern by one
  // undirected edge.
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const int concern_node = g.concern_node_of_span[s];
    CgNode type_node;
    type_node.kind = CgNode::Kind::Attribute;
    type_node.attr_kind = CgNode::AttrKind::Type;
    type_node.attr_type = spans[s].ctype;
    type_node.attr_score = cs;
    type_node.owner_concern_node = concern_node;
    g.edges.emplace_back(concern_node, static_cast<int>(g.nodes.size()));
    g.nodes.push_back(type_node);

    CgNode score_node = type_node;
    score_node.attr_kind = CgNode::AttrKind::Score;
    g.edges.emplace_back(concern_node, static_cast<int>(g.nodes.size()));
    g.nodes.push_back(score_node);
  }
  // Step 3: relation nodes with directed subject->relation->object edges.
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const RelationAnnotation& rel = relations[r];
    const int c = static_cast<int>(spans.size());
    if (rel.subject < 0 || rel.subject >= c || rel.object < 0 || rel.object >= c) {
      throw ValidationError("tweet '" + tweet.id + "': relation references missing concern " +
                            std::to_string(rel.subject < 0 || rel.subject >= c ? rel.subject
                                                                               : rel.object));
    }
    CgNode node;
    node.kind = CgNode::Kind::Relation;
    node.rel_label = rel.label;
    node.rel_index = static_cast<int>(r);
    const int rel_node = static_cast<int>(g.nodes.size());
    g.relation_node_of.push_back(rel_node);
    g.nodes.push_back(node);
    g.edges.emplace_back(g.concern_node_of_span[rel.subject], rel_node);
    g.edges.emplace_back(rel_node, g.concern_node_of_span[rel.object]);
  }
  return g;
}

ConcernGraph build_concern_graph(const Tweet& tweet, double normalized_retweet, double theta) {
  return build_concern_graph(tweet, tweet.concerns, tweet.relations, normalized_retweet, theta);
}

Tensor embed_cg_node(const CgNode& node, const CgEmbedderParams& params,
                     const CgVocabs& vocabs) {
  switch (node.kind) {
    case CgNode::Kind::Concern: {
      Tensor dep = row(params.dep_table, vocabs.dep.id(node.head_dep));
      Tensor pos = row(params.pos_table, vocabs.pos.id(node.head_pos));
      return mul(add(dep, pos), row(params.w_cr, 0));
    }
    case CgNode::Kind::Attribute: {
      Tensor type_vec = row(params.type_table, static_cast<int>(node.attr_type));
      Tensor attr = add(type_vec, scale(params.score_proj, node.attr_score));
      return mul(attr, row(params.w_cr, 1));
    }
    case CgNode::Kind::Relation: {
      Tensor rel = row(params.rel_table, static_cast<int>(node.rel_label));
      return mul(rel, row(params.w_cr, 2));
    }
  }
  throw ValidationError("embed_cg_node: unknown node kind");
}

Tensor align_cg_to_tokens(const ConcernGraph& graph, const Tweet& tweet,
                          const CgEmbedderParams& params, const CgVocabs& vocabs) {
  const int n = tweet.length();
  const int d = params.w_cr.shape()[1];
  // Per-token contribution lists, combined at the end.
  std::vector<std::vector<Tensor>> contrib(static_cast<std::size_t>(n));

  for (std::size_t s = 0; s < graph.spans.size(); ++s) {
    const ConcernSpan& span = graph.spans[s];
    Tensor concern_emb = embed_cg_node(graph.nodes[graph.concern_node_of_span[s]], params, vocabs);
    // Both attribute nodes of a concern share the combined type+score vector,
    // so their mean equals one attribute embedding.
    CgNode attr_node;
    bool found = false;
    for (const CgNode& node : graph.nodes) {
      if (node.kind == CgNode::Kind::Attribute &&
          node.owner_concern_node == graph.concern_node_of_span[s]) {
        attr_node = node;
        found = true;
        break;
      }
    }
    Tensor span_feature = concern_emb;
    if (found) {
      span_feature = add(concern_emb, embed_cg_node(attr_node, params, vocabs));
    }
    for (int i = span.start; i < span.end; ++i) contrib[i].push_back(span_feature);
  }

  for (std::size_t r = 0; r < graph.relations.size(); ++r) {
    const RelationAnnotation& rel = graph.relations[r];
    Tensor rel_emb = embed_cg_node(graph.nodes[graph.relation_node_of[r]], params, vocabs);
    contrib[span_head_token(tweet, graph.spans[rel.subject])].push_back(rel_emb);
    contrib[span_head_token(tweet, graph.spans[rel.object])].push_back(rel_emb);
  }

  std::vector<Tensor> token_rows;
  token_rows.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (contrib[i].empty()) {
      token_rows.push_back(Tensor::zeros({d}));
      continue;
    }
    Tensor acc = contrib[i][0];
    for (std::size_t c = 1; c < contrib[i].size(); ++c) acc = add(acc, contrib[i][c]);
    token_rows.push_back(acc);
  }
  return stack_rows(token_rows);
}

}  // namespace cgcre
