#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cgcre/corpus.hpp"
#include "cgcre/tensor.hpp"
#include "cgcre/vocab.hpp"

namespace cgcre {

// The candidate gate is squashed with sigmoid by default; tanh is available
// as a configuration toggle.
enum class CandidateActivation { sigmoid, tanh };
CandidateActivation candidate_activation_from_string(const std::string& s);

// One LSTM direction: per gate g in {i,f,o,u}, input weights (in x hidden),
// recurrent weights (hidden x hidden), bias (hidden).
struct LstmDirectionParams {
  Tensor w_ex_i, w_ex_f, w_ex_o, w_ex_u;
  Tensor w_h_i, w_h_f, w_h_o, w_h_u;
  Tensor b_i, b_f, b_o, b_u;
};

struct BiLstmParams {
  LstmDirectionParams fwd;
  LstmDirectionParams bwd;
  Tensor w_out;  // 2*hidden x k_out
  Tensor b_out;  // k_out
  int hidden = 0;
  CandidateActivation candidate = CandidateActivation::sigmoid;
};

struct EncoderOutput {
  Tensor hidden_states;  // n x 2*hidden, row t = [fwd_h_t ; bwd_h_t]
  Tensor emissions;      // n x k_out
};

// Single recurrence step; x_t is 1 x input_dim, states are 1 x hidden.
// Gates i,f,o are sigmoid; u uses the configured candidate activation;
// c_t = i.u + f.c_prev and h_t = o.tanh(c_t).
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmDirectionParams& params,
                                    CandidateActivation candidate);

// Full encoder: dropout on the concatenated [word ; cg] input in training
// mode, both recurrences from zero initial states, then the output
// projection. n = 0 yields empty tensors.
EncoderOutput encode(const Tensor& word_emb, const Tensor& cg_emb, const BiLstmParams& params,
                     double dropout_ratio, bool training, Rng& dropout_rng);

// Word vectors either from a trainable lookup table (OOV -> UNK row) or from
// a precomputed per-tweet vector file.
class WordEmbedding {
 public:
  WordEmbedding() = default;

  static WordEmbedding lookup(LabelVocab vocab, Tensor table);
  // File format: header line `d=<int>`, then per tweet a line `id <tweet-id>`
  // followed by one whitespace-separated row of floats per token.
  static WordEmbedding from_file(const std::string& path, int expected_dim);

  Tensor embed(const Tweet& tweet) const;
  bool trainable() const { return trainable_; }
  const LabelVocab& vocab() const { return vocab_; }
  const Tensor& table() const { return table_; }
  int dim() const { return dim_; }

 private:
  bool trainable_ = false;
  int dim_ = 0;
  LabelVocab vocab_;
  Tensor table_;
  std::unordered_map<std::string, std::vector<double>> file_vectors_;
};

}  // namespace cgcre
