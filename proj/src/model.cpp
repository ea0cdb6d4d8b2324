#include "cgcre/model.hpp"

#include <algorithm>

#include "cgcre/errors.hpp"

namespace cgcre {

Tensor ParameterStore::add(const std::string& name, Tensor t) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name '" + name + "'");
  items_.emplace_back(name, t);
  return t;
}

const Tensor* ParameterStore::find(const std::string& name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return &t;
  }
  return nullptr;
}

void ParameterStore::zero_grads() {
  for (auto& [name, t] : items_) t.zero_grad();
}

CorpusVocabs collect_vocabs(const Corpus& corpus) {
  CorpusVocabs v;
  for (const Tweet& t : corpus.tweets) {
    for (const Token& tok : t.tokens) {
      v.words.add(tok.text);
      v.cg.pos.add(tok.pos);
      v.cg.dep.add(tok.dep_label);
    }
  }
  return v;
}

CgCreModel::CgCreModel(const ModelConfig& config, LabelVocab word_vocab, CgVocabs cg_vocabs,
                       std::uint64_t init_seed)
    : config_(config), cg_vocabs_(std::move(cg_vocabs)) {
  const int vocab_size = word_vocab.size();
  init_parameters(init_seed, /*trainable_words=*/true, vocab_size);
  word_embedding_ = WordEmbedding::lookup(std::move(word_vocab), *params_.find("word.table"));
}

CgCreModel::CgCreModel(const ModelConfig& config, WordEmbedding precomputed, CgVocabs cg_vocabs,
                       std::uint64_t init_seed)
    : config_(config), cg_vocabs_(std::move(cg_vocabs)) {
  if (precomputed.dim() != config.embed_dim) {
    throw ConfigError("precomputed embedding dimension does not match configured d");
  }
  init_parameters(init_seed, /*trainable_words=*/false, 0);
  word_embedding_ = std::move(precomputed);
}

void CgCreModel::init_parameters(std::uint64_t init_seed, bool trainable_words, int vocab_size) {
  Rng rng(Rng::derive(init_seed, rng_stream::kInit));
  const int d = config_.embed_dim;
  const int h = config_.lstm_hidden;
  const int g = config_.gcn_hidden;
  const int c = config_.cls_hidden;
  const int in = 2 * d;

  auto u = [&](const std::string& name, std::vector<int> shape, int fan_in) {
    return params_.add(name, Tensor::param_uniform(std::move(shape), fan_in, rng));
  };

  if (trainable_words) u("word.table", {vocab_size, d}, d);

  cg_params_.dep_table = u("cg.dep_table", {cg_vocabs_.dep.size(), d}, d);
  cg_params_.pos_table = u("cg.pos_table", {cg_vocabs_.pos.size(), d}, d);
  cg_params_.type_table = u("cg.type_table", {kNumConcernTypes, d}, d);
  cg_params_.score_proj = u("cg.score_proj", {d}, d);
  cg_params_.rel_table = u("cg.rel_table", {2, d}, d);
  cg_params_.w_cr = u("cg.w_cr", {3, d}, d);

  auto init_direction = [&](LstmDirectionParams& p, const std::string& prefix) {
    p.w_ex_i = u(prefix + ".w_ex_i", {in, h}, in);
    p.w_ex_f = u(prefix + ".w_ex_f", {in, h}, in);
    p.w_ex_o = u(prefix + ".w_ex_o", {in, h}, in);
    p.w_ex_u = u(prefix + ".w_ex_u", {in, h}, in);
    p.w_h_i = u(prefix + ".w_h_i", {h, h}, h);
    p.w_h_f = u(prefix + ".w_h_f", {h, h}, h);
    p.w_h_o = u(prefix + ".w_h_o", {h, h}, h);
    p.w_h_u = u(prefix + ".w_h_u", {h, h}, h);
    p.b_i = u(prefix + ".b_i", {h}, in);
    p.b_f = u(prefix + ".b_f", {h}, in);
    p.b_o = u(prefix + ".b_o", {h}, in);
    p.b_u = u(prefix + ".b_u", {h}, in);
  };
  init_direction(lstm_params_.fwd, "lstm.fwd");
  init_direction(lstm_params_.bwd, "lstm.bwd");
  lstm_params_.w_out = u("lstm.w_out", {2 * h, kNumTags}, 2 * h);
  lstm_params_.b_out = u("lstm.b_out", {kNumTags}, 2 * h);
  lstm_params_.hidden = h;
  lstm_params_.candidate = config_.candidate_activation;

  transitions_ = u("crf.transitions", {kNumTags, kNumTags}, kNumTags);
  bio_penalty_ = bio_transition_penalty(kNumTags);

  gcn_params_.hidden = g;
  const int gcn_in = g + 2 * h;
  for (int layer = 0; layer < config_.gcn_layers; ++layer) {
    const std::string prefix = "gcn." + std::to_string(layer);
    GcnLayerParams lp;
    lp.w_fwd = u(prefix + ".w_fwd", {gcn_in, g}, gcn_in);
    lp.b_fwd = u(prefix + ".b_fwd", {g}, gcn_in);
    lp.w_bwd = u(prefix + ".w_bwd", {gcn_in, g}, gcn_in);
    lp.b_bwd = u(prefix + ".b_bwd", {g}, gcn_in);
    gcn_params_.layers.push_back(lp);
  }

  relation_head_.w_subject = u("rel.w_subject", {2 * g, c}, 2 * g);
  relation_head_.w_object = u("rel.w_object", {2 * g, c}, 2 * g);
  relation_head_.bias = u("rel.bias", {c}, 2 * g);
  relation_head_.w_cls = u("rel.w_cls", {c, kNumRelationClasses}, c);
}

CgCreModel::PipelineOutput CgCreModel::run_pipeline(
    const Tweet& tweet, const std::vector<ConcernSpan>& cg_spans,
    const std::vector<RelationAnnotation>& cg_relations, double normalized_retweet, bool training,
    Rng& dropout_rng, bool zero_cg) const {
  const int n = tweet.length();
  Tensor word_emb = word_embedding_.embed(tweet);
  Tensor cg_emb;
  if (zero_cg || !config_.use_cg) {
    cg_emb = Tensor::zeros({n, config_.embed_dim});
  } else {
    ConcernGraph graph =
        build_concern_graph(tweet, cg_spans, cg_relations, normalized_retweet, config_.theta);
    cg_emb = align_cg_to_tokens(graph, tweet, cg_params_, cg_vocabs_);
  }
  EncoderOutput enc =
      encode(word_emb, cg_emb, lstm_params_, config_.dropout_ratio, training, dropout_rng);

  DependencyAdjacency adjacency = build_adjacency(tweet, config_.gcn_self_loops);
  Tensor shared = config_.use_shared_state ? enc.hidden_states
                                           : Tensor::zeros({n, 2 * config_.lstm_hidden});
  Tensor gcn_states = bigcn_forward(adjacency, shared, gcn_params_);
  return PipelineOutput{std::move(enc), std::move(gcn_states)};
}

TweetLosses CgCreModel::training_losses(const Tweet& tweet, double normalized_retweet,
                                        bool training, Rng& dropout_rng) const {
  PipelineOutput out = run_pipeline(tweet, tweet.concerns, tweet.relations, normalized_retweet,
                                    training, dropout_rng, /*zero_cg=*/false);
  TweetLosses losses;
  losses.concern_nll = crf_nll(out.encoder.emissions, spans_to_tags(tweet), transitions_);
  losses.relation_ce =
      relation_loss(tweet.concerns, tweet.relations, out.gcn_states, relation_head_);
  losses.pair_count = static_cast<int>(relation_candidates(tweet.concerns, tweet.relations).size());
  return losses;
}

namespace {

// Classify every unordered pair of spans and keep the non-NONE predictions.
std::vector<RelationAnnotation> classify_pairs(const std::vector<ConcernSpan>& spans,
                                               const Tensor& gcn_states,
                                               const RelationHeadParams& head) {
  std::vector<RelationAnnotation> result;
  const int c = static_cast<int>(spans.size());
  std::vector<Tensor> reprs;
  reprs.reserve(spans.size());
  for (const ConcernSpan& s : spans) reprs.push_back(span_repr(gcn_states, s));
  for (int i = 0; i < c; ++i) {
    for (int j = i + 1; j < c; ++j) {
      Tensor scores = relation_score(reprs[i], reprs[j], head);
      int best = 0;
      for (int k = 1; k < kNumRelationClasses; ++k) {
        if (scores.at(k) > scores.at(best)) best = k;
      }
      if (best != kRelationNone) {
        result.push_back(RelationAnnotation{i, j, static_cast<RelationLabel>(best)});
      }
    }
  }
  return result;
}

}  // namespace

Prediction CgCreModel::predict(const Tweet& tweet, double normalized_retweet) const {
  Rng unused_rng(0);  // dropout is identity outside training
  // Pass 1: no CG features.
  PipelineOutput first = run_pipeline(tweet, {}, {}, normalized_retweet, /*training=*/false,
                                      unused_rng, /*zero_cg=*/true);
  TagSequence tags = viterbi_decode(first.encoder.emissions, transitions_, &bio_penalty_);
  std::vector<ConcernSpan> spans = tags_to_spans(tags);
  std::vector<RelationAnnotation> relations =
      classify_pairs(spans, first.gcn_states, relation_head_);
  if (!config_.use_cg) return Prediction{std::move(spans), std::move(relations)};

  // Pass 2: rebuild the graph from the provisional prediction.
  PipelineOutput second = run_pipeline(tweet, spans, relations, normalized_retweet,
                                       /*training=*/false, unused_rng, /*zero_cg=*/false);
  TagSequence tags2 = viterbi_decode(second.encoder.emissions, transitions_, &bio_penalty_);
  std::vector<ConcernSpan> spans2 = tags_to_spans(tags2);
  std::vector<RelationAnnotation> relations2 =
      classify_pairs(spans2, second.gcn_states, relation_head_);
  return Prediction{std::move(spans2), std::move(relations2)};
}

}  // namespace cgcre
