#include "cgcre/gradcheck.hpp"

#include <algorithm>

#include "cgcre/concern_graph.hpp"
#include "cgcre/crf.hpp"
#include "cgcre/encoder.hpp"
#include "cgcre/errors.hpp"
#include "cgcre/model.hpp"
#include "cgcre/relation_gcn.hpp"
#include "cgcre/rng.hpp"
#include "cgcre/tensor.hpp"
#include "cgcre/train.hpp"

namespace cgcre {

namespace {

// Identity forward, doubled backward: the injected-bug hook.
Tensor corrupt_gradient(const Tensor& x) {
  return record_op(x.shape(), x.data(), {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += 2.0 * self.grad[i];
  });
}

// Four tokens, two concerns, one relation; dependency tree rooted at token 1.
Tweet synthetic_tweet() {
  Tweet t;
  t.id = "gradcheck-0";
  t.tokens = {Token{"masks", 0, "NOUN", 1, "nsubj"}, Token{"cause", 1, "VERB", 1, "root"},
              Token{"panic", 2, "NOUN", 1, "obj"}, Token{"now", 3, "ADV", 1, "advmod"}};
  t.retweet_count = 3;
  t.sentiment_polarity = -0.5;
  t.concerns = {ConcernSpan{0, 1, ConcernType::MED, std::nullopt},
                ConcernSpan{2, 3, ConcernType::DIS, std::nullopt}};
  t.relations = {RelationAnnotation{0, 1, RelationLabel::CA_EFF}};
  return t;
}

CgVocabs synthetic_cg_vocabs() {
  CgVocabs v;
  for (const Token& tok : synthetic_tweet().tokens) {
    v.pos.add(tok.pos);
    v.dep.add(tok.dep_label);
  }
  return v;
}

struct Check {
  std::function<Tensor()> loss;
  std::vector<Tensor> params;
};

Check make_embedder_check() {
  const int d = 5;
  Rng rng(Rng::derive(7, rng_stream::kGradCheck));
  auto vocab_sizes = synthetic_cg_vocabs();
  CgEmbedderParams cg;
  cg.dep_table = Tensor::param_uniform({vocab_sizes.dep.size(), d}, d, rng);
  cg.pos_table = Tensor::param_uniform({vocab_sizes.pos.size(), d}, d, rng);
  cg.type_table = Tensor::param_uniform({kNumConcernTypes, d}, d, rng);
  cg.score_proj = Tensor::param_uniform({d}, d, rng);
  cg.rel_table = Tensor::param_uniform({2, d}, d, rng);
  cg.w_cr = Tensor::param_uniform({3, d}, d, rng);
  auto vocabs = std::make_shared<CgVocabs>(synthetic_cg_vocabs());
  auto tweet = std::make_shared<Tweet>(synthetic_tweet());
  Check check;
  check.params = {cg.dep_table, cg.pos_table, cg.type_table, cg.score_proj, cg.rel_table, cg.w_cr};
  check.loss = [cg, vocabs, tweet]() {
    ConcernGraph graph = build_concern_graph(*tweet, 0.4, 0.5);
    // A nonlinear readout so second-order terms exercise the backward rules.
    return sum(cgcre::tanh(align_cg_to_tokens(graph, *tweet, cg, *vocabs)));
  };
  return check;
}

Check make_bilstm_check() {
  const int d = 3, hidden = 4, n = 3;
  Rng rng(Rng::derive(11, rng_stream::kGradCheck));
  const int in = 2 * d;
  BiLstmParams p;
  auto dir = [&](LstmDirectionParams& lp) {
    lp.w_ex_i = Tensor::param_uniform({in, hidden}, in, rng);
    lp.w_ex_f = Tensor::param_uniform({in, hidden}, in, rng);
    lp.w_ex_o = Tensor::param_uniform({in, hidden}, in, rng);
    lp.w_ex_u = Tensor::param_uniform({in, hidden}, in, rng);
    lp.w_h_i = Tensor::param_uniform({hidden, hidden}, hidden, rng);
    lp.w_h_f = Tensor::param_uniform({hidden, hidden}, hidden, rng);
    lp.w_h_o = Tensor::param_uniform({hidden, hidden}, hidden, rng);
    lp.w_h_u = Tensor::param_uniform({hidden, hidden}, hidden, rng);
    lp.b_i = Tensor::param_uniform({hidden}, in, rng);
    lp.b_f = Tensor::param_uniform({hidden}, in, rng);
    lp.b_o = Tensor::param_uniform({hidden}, in, rng);
    lp.b_u = Tensor::param_uniform({hidden}, in, rng);
  };
  dir(p.fwd);
  dir(p.bwd);
  p.w_out = Tensor::param_uniform({2 * hidden, kNumTags}, 2 * hidden, rng);
  p.b_out = Tensor::param_uniform({kNumTags}, 2 * hidden, rng);
  p.hidden = hidden;
  Tensor word = Tensor::param_uniform({n, d}, d, rng);
  Tensor cg = Tensor::param_uniform({n, d}, d, rng);
  Check check;
  check.params = {p.fwd.w_ex_i, p.fwd.w_ex_f, p.fwd.w_ex_o, p.fwd.w_ex_u, p.fwd.w_h_i,
                  p.fwd.w_h_f,  p.fwd.w_h_o,  p.fwd.w_h_u,  p.fwd.b_i,   p.fwd.b_f,
                  p.fwd.b_o,    p.fwd.b_u,    p.bwd.w_ex_i, p.bwd.w_ex_f, p.bwd.w_ex_o,
                  p.bwd.w_ex_u, p.bwd.w_h_i,  p.bwd.w_h_f,  p.bwd.w_h_o, p.bwd.w_h_u,
                  p.bwd.b_i,    p.bwd.b_f,    p.bwd.b_o,    p.bwd.b_u,   p.w_out,
                  p.b_out,      word,         cg};
  check.loss = [p, word, cg]() {
    Rng unused(0);
    EncoderOutput out = encode(word, cg, p, 0.0, /*training=*/false, unused);
    return add(sum(cgcre::tanh(out.hidden_states)), sum(cgcre::tanh(out.emissions)));
  };
  return check;
}

Check make_crf_check() {
  const int n = 4, k = 5;
  Rng rng(Rng::derive(13, rng_stream::kGradCheck));
  Tensor emissions = Tensor::param_uniform({n, k}, k, rng);
  Tensor transitions = Tensor::param_uniform({k, k}, k, rng);
  TagSequence gold = {0, 2, 1, 4};
  Check check;
  check.params = {emissions, transitions};
  check.loss = [emissions, transitions, gold]() { return crf_nll(emissions, gold, transitions); };
  return check;
}

Check make_bigcn_check() {
  const int lstm_hidden = 2, gcn_hidden = 3, layers = 2;
  Rng rng(Rng::derive(17, rng_stream::kGradCheck));
  auto tweet = std::make_shared<Tweet>(synthetic_tweet());
  const int n = tweet->length();
  const int in = gcn_hidden + 2 * lstm_hidden;
  BiGcnParams p;
  p.hidden = gcn_hidden;
  Check check;
  for (int l = 0; l < layers; ++l) {
    GcnLayerParams lp;
    lp.w_fwd = Tensor::param_uniform({in, gcn_hidden}, in, rng);
    lp.b_fwd = Tensor::param_uniform({gcn_hidden}, in, rng);
    lp.w_bwd = Tensor::param_uniform({in, gcn_hidden}, in, rng);
    lp.b_bwd = Tensor::param_uniform({gcn_hidden}, in, rng);
    p.layers.push_back(lp);
    check.params.insert(check.params.end(), {lp.w_fwd, lp.b_fwd, lp.w_bwd, lp.b_bwd});
  }
  Tensor shared = Tensor::param_uniform({n, 2 * lstm_hidden}, 2 * lstm_hidden, rng);
  check.params.push_back(shared);
  check.loss = [tweet, shared, p]() {
    DependencyAdjacency adj = build_adjacency(*tweet);
    return sum(cgcre::tanh(bigcn_forward(adj, shared, p)));
  };
  return check;
}

Check make_relation_check() {
  const int gcn_hidden = 3, cls_hidden = 4;
  Rng rng(Rng::derive(19, rng_stream::kGradCheck));
  auto tweet = std::make_shared<Tweet>(synthetic_tweet());
  const int n = tweet->length();
  RelationHeadParams head;
  head.w_subject = Tensor::param_uniform({2 * gcn_hidden, cls_hidden}, 2 * gcn_hidden, rng);
  head.w_object = Tensor::param_uniform({2 * gcn_hidden, cls_hidden}, 2 * gcn_hidden, rng);
  head.bias = Tensor::param_uniform({cls_hidden}, 2 * gcn_hidden, rng);
  head.w_cls = Tensor::param_uniform({cls_hidden, kNumRelationClasses}, cls_hidden, rng);
  Tensor states = Tensor::param_uniform({n, 2 * gcn_hidden}, 2 * gcn_hidden, rng);
  Check check;
  check.params = {head.w_subject, head.w_object, head.bias, head.w_cls, states};
  check.loss = [tweet, states, head]() {
    return relation_loss(tweet->concerns, tweet->relations, states, head);
  };
  return check;
}

Check make_end_to_end_check() {
  ModelConfig config;
  config.embed_dim = 4;
  config.lstm_hidden = 3;
  config.gcn_hidden = 3;
  config.gcn_layers = 2;
  config.cls_hidden = 3;
  config.dropout_ratio = 0.2;  // identity outside training mode
  auto tweet = std::make_shared<Tweet>(synthetic_tweet());
  LabelVocab words;
  for (const Token& tok : tweet->tokens) words.add(tok.text);
  auto model = std::make_shared<CgCreModel>(config, words, synthetic_cg_vocabs(), 23);
  Check check;
  for (const auto& [name, t] : model->params().items()) check.params.push_back(t);
  check.loss = [model, tweet]() {
    Rng unused(0);
    TweetLosses losses = model->training_losses(*tweet, 0.3, /*training=*/false, unused);
    return add(losses.concern_nll, scale(losses.relation_ce, 1.0));
  };
  return check;
}

}  // namespace

std::vector<std::string> gradcheck_components() {
  return {"embedder", "bilstm", "crf", "bigcn", "relation", "end_to_end"};
}

std::vector<GradCheckResult> run_gradcheck(const std::vector<std::string>& components,
                                           double epsilon, const std::string& corrupt_component) {
  std::vector<std::string> wanted = components.empty() ? gradcheck_components() : components;
  std::vector<GradCheckResult> results;
  for (const std::string& name : wanted) {
    Check check;
    if (name == "embedder") {
      check = make_embedder_check();
    } else if (name == "bilstm") {
      check = make_bilstm_check();
    } else if (name == "crf") {
      check = make_crf_check();
    } else if (name == "bigcn") {
      check = make_bigcn_check();
    } else if (name == "relation") {
      check = make_relation_check();
    } else if (name == "end_to_end") {
      check = make_end_to_end_check();
    } else {
      throw ConfigError("unknown gradcheck component '" + name + "'");
    }
    std::function<Tensor()> f = check.loss;
    if (name == corrupt_component) {
      auto inner = check.loss;
      f = [inner]() { return corrupt_gradient(inner()); };
    }
    GradCheckResult r;
    r.component = name;
    r.max_rel_error = grad_check(f, check.params, epsilon);
    r.passed = r.max_rel_error < kGradCheckTolerance;
    results.push_back(r);
  }
  return results;
}

}  // namespace cgcre
