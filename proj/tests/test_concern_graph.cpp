#include <doctest.h>

#include <cmath>

#include "cgcre/concern_graph.hpp"
#include "cgcre/errors.hpp"
#include "cgcre/rng.hpp"
#include "support/synth.hpp"

using namespace cgcre;

namespace {

Tweet two_concern_tweet() {
  Tweet t;
  t.id = "cg-fixture";
  t.tokens = {Token{"the", 0, "DET", 1, "det"}, Token{"cure", 1, "NOUN", 1, "root"},
              Token{"beats", 2, "VERB", 1, "acl"}, Token{"fear", 3, "NOUN", 2, "obj"},
              Token{"now", 4, "ADV", 2, "advmod"}};
  t.retweet_count = 10;
  t.sentiment_polarity = -0.8;
  t.concerns = {ConcernSpan{0, 2, ConcernType::MED, std::nullopt},
                ConcernSpan{3, 4, ConcernType::DIS, std::nullopt}};
  t.relations = {RelationAnnotation{0, 1, RelationLabel::CA_EFF}};
  validate_tweet(t);
  return t;
}

CgVocabs vocabs_for(const Tweet& t) {
  CgVocabs v;
  for (const Token& tok : t.tokens) {
    v.pos.add(tok.pos);
    v.dep.add(tok.dep_label);
  }
  return v;
}

CgEmbedderParams make_params(const CgVocabs& vocabs, int d, double fill) {
  CgEmbedderParams p;
  p.dep_table = Tensor::param({vocabs.dep.size(), d},
                              std::vector<double>(vocabs.dep.size() * d, fill));
  p.pos_table = Tensor::param({vocabs.pos.size(), d},
                              std::vector<double>(vocabs.pos.size() * d, fill));
  p.type_table = Tensor::param({kNumConcernTypes, d},
                               std::vector<double>(kNumConcernTypes * d, fill));
  p.score_proj = Tensor::param({d}, std::vector<double>(d, fill));
  p.rel_table = Tensor::param({2, d}, std::vector<double>(2 * d, fill));
  p.w_cr = Tensor::param({3, d}, std::vector<double>(3 * d, fill));
  return p;
}

}  // namespace

TEST_CASE("graph construction counts") {
  Tweet t = two_concern_tweet();

  SUBCASE("no annotations give an empty graph") {
    ConcernGraph g = build_concern_graph(t, {}, {}, 0.5, 0.5);
    CHECK(g.nodes.empty());
    CHECK(g.edges.empty());
  }

  SUBCASE("two concerns and one relation") {
    ConcernGraph g = build_concern_graph(t, 0.5, 0.5);
    CHECK(g.nodes.size() == 7);  // 2 concerns + 4 attributes + 1 relation
    CHECK(g.edges.size() == 6);  // 4 attribute edges + 2 relation edges
  }

  SUBCASE("three concerns, no relations") {
    std::vector<ConcernSpan> spans = {ConcernSpan{0, 1, ConcernType::FIN, std::nullopt},
                                      ConcernSpan{2, 3, ConcernType::GOV, std::nullopt},
                                      ConcernSpan{3, 4, ConcernType::DAT, std::nullopt}};
    ConcernGraph g = build_concern_graph(t, spans, {}, 0.5, 0.5);
    CHECK(g.nodes.size() == 9);
    CHECK(g.edges.size() == 6);
    for (const CgNode& node : g.nodes) CHECK(node.kind != CgNode::Kind::Relation);
  }

  SUBCASE("relation against a missing concern") {
    CHECK_THROWS_AS(build_concern_graph(t, t.concerns,
                                        {RelationAnnotation{0, 5, RelationLabel::CO_OCC}}, 0.5, 0.5),
                    ValidationError);
  }
}

TEST_CASE("graph structural properties over random annotation sets") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    Tweet t = synth::random_tweet(rng);
    ConcernGraph g = build_concern_graph(t, rng.next_double(), rng.next_double());
    const std::size_t c = t.concerns.size();
    const std::size_t r = t.relations.size();
    CHECK(g.nodes.size() == 3 * c + r);
    CHECK(g.edges.size() == 2 * c + 2 * r);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (g.nodes[i].kind == CgNode::Kind::Attribute) {
        CHECK(g.degree(static_cast<int>(i)) == 1);
      } else if (g.nodes[i].kind == CgNode::Kind::Relation) {
        CHECK(g.degree(static_cast<int>(i)) == 2);
      }
    }
    // Every concern's score attribute carries the tweet-level cs.
    for (const ConcernSpan& s : g.spans) CHECK(s.score.has_value());
  }
}

TEST_CASE("span head token rule") {
  Tweet t = two_concern_tweet();
  // Span [0,2): token 0 heads to 1 (inside), token 1 heads to itself (inside);
  // no token points outside, so the first token is the head.
  CHECK(span_head_token(t, t.concerns[0]) == 0);
  // Span [3,4): token 3 heads to 2, outside.
  CHECK(span_head_token(t, t.concerns[1]) == 3);
  // Span [2,4): token 2 heads to 1 (outside).
  CHECK(span_head_token(t, ConcernSpan{2, 4, ConcernType::FIN, std::nullopt}) == 2);
}

TEST_CASE("node embedding branches") {
  Tweet t = two_concern_tweet();
  CgVocabs vocabs = vocabs_for(t);
  const int d = 4;
  ConcernGraph g = build_concern_graph(t, 0.5, 0.5);

  SUBCASE("all-zero parameters annihilate every branch") {
    CgEmbedderParams zero = make_params(vocabs, d, 0.0);
    for (const CgNode& node : g.nodes) {
      Tensor e = embed_cg_node(node, zero, vocabs);
      for (double v : e.data()) CHECK(v == 0.0);
    }
  }

  SUBCASE("ones in w_cr[0] pass dep+pos through unchanged") {
    Rng rng(7);
    CgEmbedderParams p = make_params(vocabs, d, 0.0);
    p.dep_table = Tensor::param_uniform({vocabs.dep.size(), d}, d, rng);
    p.pos_table = Tensor::param_uniform({vocabs.pos.size(), d}, d, rng);
    std::vector<double> wcr(3 * d, 0.0);
    for (int j = 0; j < d; ++j) wcr[j] = 1.0;  // row 0 all ones
    p.w_cr = Tensor::param({3, d}, wcr);

    const CgNode& concern = g.nodes[g.concern_node_of_span[1]];
    Tensor e = embed_cg_node(concern, p, vocabs);
    const int dep_id = vocabs.dep.id("obj");
    const int pos_id = vocabs.pos.id("NOUN");
    for (int j = 0; j < d; ++j) {
      CHECK(e.at(j) == p.dep_table.at(dep_id, j) + p.pos_table.at(pos_id, j));
    }
  }

  SUBCASE("unknown labels fall back to the UNK row without error") {
    Rng rng(8);
    CgEmbedderParams p = make_params(vocabs, d, 0.0);
    p.dep_table = Tensor::param_uniform({vocabs.dep.size(), d}, d, rng);
    p.pos_table = Tensor::param_uniform({vocabs.pos.size(), d}, d, rng);
    std::vector<double> wcr(3 * d, 0.0);
    for (int j = 0; j < d; ++j) wcr[j] = 1.0;
    p.w_cr = Tensor::param({3, d}, wcr);

    CgNode strange;
    strange.kind = CgNode::Kind::Concern;
    strange.head_dep = "never-seen";
    strange.head_pos = "nor-this";
    Tensor e = embed_cg_node(strange, p, vocabs);
    for (int j = 0; j < d; ++j) {
      CHECK(e.at(j) == p.dep_table.at(0, j) + p.pos_table.at(0, j));
    }
  }

  SUBCASE("scaling a w_cr row by a power of two scales that branch exactly") {
    Rng rng(9);
    CgEmbedderParams p = make_params(vocabs, d, 0.0);
    p.rel_table = Tensor::param_uniform({2, d}, d, rng);
    p.w_cr = Tensor::param_uniform({3, d}, d, rng);
    const CgNode& rel_node = g.nodes[g.relation_node_of[0]];
    Tensor before = embed_cg_node(rel_node, p, vocabs);
    for (int j = 0; j < d; ++j) p.w_cr.data()[2 * d + j] *= 4.0;
    Tensor after = embed_cg_node(rel_node, p, vocabs);
    for (int j = 0; j < d; ++j) CHECK(after.at(j) == 4.0 * before.at(j));
  }
}

TEST_CASE("embedder gradients match finite differences") {
  Tweet t = two_concern_tweet();
  CgVocabs vocabs = vocabs_for(t);
  const int d = 3;
  Rng rng(55);
  CgEmbedderParams p;
  p.dep_table = Tensor::param_uniform({vocabs.dep.size(), d}, d, rng);
  p.pos_table = Tensor::param_uniform({vocabs.pos.size(), d}, d, rng);
  p.type_table = Tensor::param_uniform({kNumConcernTypes, d}, d, rng);
  p.score_proj = Tensor::param_uniform({d}, d, rng);
  p.rel_table = Tensor::param_uniform({2, d}, d, rng);
  p.w_cr = Tensor::param_uniform({3, d}, d, rng);
  double err = grad_check(
      [&] {
        ConcernGraph g = build_concern_graph(t, 0.3, 0.5);
        return sum(tanh(align_cg_to_tokens(g, t, p, vocabs)));
      },
      {p.dep_table, p.pos_table, p.type_table, p.score_proj, p.rel_table, p.w_cr}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("token alignment") {
  Tweet t = two_concern_tweet();
  CgVocabs vocabs = vocabs_for(t);
  const int d = 4;

  SUBCASE("empty graph aligns to all zeros") {
    ConcernGraph g = build_concern_graph(t, {}, {}, 0.5, 0.5);
    Rng rng(1);
    CgEmbedderParams p = make_params(vocabs, d, 0.5);
    Tensor aligned = align_cg_to_tokens(g, t, p, vocabs);
    CHECK(aligned.shape() == std::vector<int>{5, d});
    for (double v : aligned.data()) CHECK(v == 0.0);
  }

  SUBCASE("single one-token concern with zero attribute and relation params") {
    Rng rng(2);
    CgEmbedderParams p = make_params(vocabs, d, 0.0);
    p.dep_table = Tensor::param_uniform({vocabs.dep.size(), d}, d, rng);
    p.pos_table = Tensor::param_uniform({vocabs.pos.size(), d}, d, rng);
    std::vector<double> wcr(3 * d, 0.0);
    for (int j = 0; j < d; ++j) wcr[j] = rng.uniform(-1, 1);  // only row 0 nonzero
    p.w_cr = Tensor::param({3, d}, wcr);

    std::vector<ConcernSpan> spans = {ConcernSpan{3, 4, ConcernType::DIS, std::nullopt}};
    ConcernGraph g = build_concern_graph(t, spans, {}, 0.5, 0.5);
    Tensor aligned = align_cg_to_tokens(g, t, p, vocabs);
    Tensor concern_emb = embed_cg_node(g.nodes[g.concern_node_of_span[0]], p, vocabs);
    for (int j = 0; j < d; ++j) CHECK(aligned.at(3, j) == concern_emb.at(j));
    // Everything outside the span is zero.
    for (int i = 0; i < 5; ++i) {
      if (i == 3) continue;
      for (int j = 0; j < d; ++j) CHECK(aligned.at(i, j) == 0.0);
    }
  }

  SUBCASE("relation contributions land on exactly the two span head tokens") {
    Rng rng(3);
    CgEmbedderParams p = make_params(vocabs, d, 0.0);
    p.rel_table = Tensor::param_uniform({2, d}, d, rng);
    std::vector<double> wcr(3 * d, 0.0);
    for (int j = 0; j < d; ++j) wcr[2 * d + j] = rng.uniform(-1, 1);  // only row 2
    p.w_cr = Tensor::param({3, d}, wcr);

    ConcernGraph g = build_concern_graph(t, 0.5, 0.5);
    Tensor aligned = align_cg_to_tokens(g, t, p, vocabs);
    int nonzero_rows = 0;
    for (int i = 0; i < 5; ++i) {
      bool nonzero = false;
      for (int j = 0; j < d; ++j) nonzero = nonzero || aligned.at(i, j) != 0.0;
      if (nonzero) ++nonzero_rows;
    }
    CHECK(nonzero_rows == 2);
    // Head tokens of spans [0,2) and [3,4) are 0 and 3.
    CHECK(aligned.at(0, 0) != 0.0);
    CHECK(aligned.at(3, 0) != 0.0);
  }

  SUBCASE("alignment is zero outside spans on random tweets") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
      Tweet rt = synth::random_tweet(rng);
      CgVocabs rv;
      for (const Token& tok : rt.tokens) {
        rv.pos.add(tok.pos);
        rv.dep.add(tok.dep_label);
      }
      CgEmbedderParams p;
      Rng prng(trial);
      p.dep_table = Tensor::param_uniform({rv.dep.size(), d}, d, prng);
      p.pos_table = Tensor::param_uniform({rv.pos.size(), d}, d, prng);
      p.type_table = Tensor::param_uniform({kNumConcernTypes, d}, d, prng);
      p.score_proj = Tensor::param_uniform({d}, d, prng);
      p.rel_table = Tensor::param_uniform({2, d}, d, prng);
      p.w_cr = Tensor::param_uniform({3, d}, d, prng);
      ConcernGraph g = build_concern_graph(rt, 0.5, 0.5);
      Tensor aligned = align_cg_to_tokens(g, rt, p, rv);
      std::vector<bool> in_span(rt.length(), false);
      for (const ConcernSpan& s : rt.concerns) {
        for (int i = s.start; i < s.end; ++i) in_span[i] = true;
      }
      for (const RelationAnnotation& r : rt.relations) {
        in_span[span_head_token(rt, rt.concerns[r.subject])] = true;
        in_span[span_head_token(rt, rt.concerns[r.object])] = true;
      }
      for (int i = 0; i < rt.length(); ++i) {
        if (in_span[i]) continue;
        for (int j = 0; j < d; ++j) CHECK(aligned.at(i, j) == 0.0);
      }
    }
  }
}
