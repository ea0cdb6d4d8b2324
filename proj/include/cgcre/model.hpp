#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgcre/concern_graph.hpp"
#include "cgcre/corpus.hpp"
#include "cgcre/crf.hpp"
#include "cgcre/encoder.hpp"
#include "cgcre/relation_gcn.hpp"
#include "cgcre/tensor.hpp"
#include "cgcre/vocab.hpp"

namespace cgcre {

struct ModelConfig {
  int embed_dim = 300;  // d, for word and CG node embeddings
  int lstm_hidden = 300;
  int gcn_hidden = 300;
  int gcn_layers = 2;
  int cls_hidden = 300;
  double dropout_ratio = 0.2;
  double theta = 0.5;
  CandidateActivation candidate_activation = CandidateActivation::sigmoid;
  bool use_cg = true;
  bool use_shared_state = true;
  bool gcn_self_loops = true;
};

// Ordered, named collection of trainable tensors; iteration order is
// registration order, which fixes the checkpoint layout and makes parameter
// initialization reproducible.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Tensor t);
  const Tensor* find(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::size_t count() const { return items_.size(); }
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

struct TweetLosses {
  Tensor concern_nll;
  Tensor relation_ce;  // mean over candidate pairs; scalar zero without pairs
  int pair_count = 0;
};

struct Prediction {
  std::vector<ConcernSpan> concerns;
  std::vector<RelationAnnotation> relations;
};

// The joint concern/relation extractor: CG embedder, BiLSTM encoder with
// output projection, CRF transitions, BiGCN and relation head, all owned by
// one parameter store.
class CgCreModel {
 public:
  // Lookup-table word embeddings built over the given vocabulary.
  CgCreModel(const ModelConfig& config, LabelVocab word_vocab, CgVocabs cg_vocabs,
             std::uint64_t init_seed);
  // Precomputed word embeddings from a vector file.
  CgCreModel(const ModelConfig& config, WordEmbedding precomputed, CgVocabs cg_vocabs,
             std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  // Eval-time ablation switches: zero the CG features / the shared state
  // without touching parameters.
  void set_ablation(bool use_cg, bool use_shared_state) {
    config_.use_cg = use_cg;
    config_.use_shared_state = use_shared_state;
  }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const CgVocabs& cg_vocabs() const { return cg_vocabs_; }
  const WordEmbedding& word_embedding() const { return word_embedding_; }
  const Tensor& transitions() const { return transitions_; }

  // Teacher-forced training losses for one tweet (gold spans, relations and
  // gold Concern Graph). Build under an active GradTape to collect gradients.
  TweetLosses training_losses(const Tweet& tweet, double normalized_retweet, bool training,
                              Rng& dropout_rng) const;

  // Two-pass prediction: a zero-CG pass yields provisional spans/relations,
  // the rebuilt graph feeds the second pass. With use_cg off the first pass
  // is the result.
  Prediction predict(const Tweet& tweet, double normalized_retweet) const;

  // Encoder/GCN forward shared by training and prediction.
  struct PipelineOutput {
    EncoderOutput encoder;
    Tensor gcn_states;
  };
  PipelineOutput run_pipeline(const Tweet& tweet, const std::vector<ConcernSpan>& cg_spans,
                              const std::vector<RelationAnnotation>& cg_relations,
                              double normalized_retweet, bool training, Rng& dropout_rng,
                              bool zero_cg) const;

 private:
  void init_parameters(std::uint64_t init_seed, bool trainable_words, int vocab_size);

  ModelConfig config_;
  ParameterStore params_;
  CgVocabs cg_vocabs_;
  WordEmbedding word_embedding_;
  CgEmbedderParams cg_params_;
  BiLstmParams lstm_params_;
  Tensor transitions_;
  BiGcnParams gcn_params_;
  RelationHeadParams relation_head_;
  std::vector<double> bio_penalty_;
};

// Vocabularies observed in a training corpus (words, POS tags, dep labels).
struct CorpusVocabs {
  LabelVocab words;
  CgVocabs cg;
};
CorpusVocabs collect_vocabs(const Corpus& corpus);

}  // namespace cgcre
