#include "cgcre/encoder.hpp"

#include <fstream>
#include <sstream>

#include "cgcre/errors.hpp"

namespace cgcre {

CandidateActivation candidate_activation_from_string(const std::string& s) {
  if (s == "sigmoid") return CandidateActivation::sigmoid;
  if (s == "tanh") return CandidateActivation::tanh;
  throw ConfigError("candidate_activation must be 'sigmoid' or 'tanh', got '" + s + "'");
}

namespace {

// Core step shared by lstm_cell and the bulk path in encode: the four gate
// pre-activations already include the input and bias contributions.
std::pair<Tensor, Tensor> lstm_step(const Tensor& pre_i, const Tensor& pre_f, const Tensor& pre_o,
                                    const Tensor& pre_u, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmDirectionParams& p, CandidateActivation candidate) {
  Tensor gi = sigmoid(add(pre_i, matmul(h_prev, p.w_h_i)));
  Tensor gf = sigmoid(add(pre_f, matmul(h_prev, p.w_h_f)));
  Tensor go = sigmoid(add(pre_o, matmul(h_prev, p.w_h_o)));
  Tensor pre_cand = add(pre_u, matmul(h_prev, p.w_h_u));
  Tensor gu = candidate == CandidateActivation::sigmoid ? sigmoid(pre_cand) : cgcre::tanh(pre_cand);
  Tensor c = add(mul(gi, gu), mul(gf, c_prev));
  Tensor h = mul(go, cgcre::tanh(c));
  return {h, c};
}

}  // namespace

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmDirectionParams& params,
                                    CandidateActivation candidate) {
  Tensor pre_i = add_rowwise(matmul(x_t, params.w_ex_i), params.b_i);
  Tensor pre_f = add_rowwise(matmul(x_t, params.w_ex_f), params.b_f);
  Tensor pre_o = add_rowwise(matmul(x_t, params.w_ex_o), params.b_o);
  Tensor pre_u = add_rowwise(matmul(x_t, params.w_ex_u), params.b_u);
  return lstm_step(pre_i, pre_f, pre_o, pre_u, h_prev, c_prev, params, candidate);
}

EncoderOutput encode(const Tensor& word_emb, const Tensor& cg_emb, const BiLstmParams& params,
                     double dropout_ratio, bool training, Rng& dropout_rng) {
  if (word_emb.shape()[0] != cg_emb.shape()[0]) {
    throw DimensionError("encode: word rows " + shape_str(word_emb.shape()) +
                         " vs cg rows " + shape_str(cg_emb.shape()));
  }
  const int n = word_emb.shape()[0];
  const int hidden = params.hidden;
  const int k_out = params.b_out.size();
  if (n == 0) {
    return EncoderOutput{Tensor::zeros({0, 2 * hidden}), Tensor::zeros({0, k_out})};
  }

  Tensor x = concat(word_emb, cg_emb, 1);
  x = dropout(x, dropout_ratio, training, dropout_rng);

  // Input and bias contributions for all positions at once; the recurrence
  // only adds the hidden-state terms.
  auto run_direction = [&](const LstmDirectionParams& p, bool reverse) {
    Tensor gi = add_rowwise(matmul(x, p.w_ex_i), p.b_i);
    Tensor gf = add_rowwise(matmul(x, p.w_ex_f), p.b_f);
    Tensor go = add_rowwise(matmul(x, p.w_ex_o), p.b_o);
    Tensor gu = add_rowwise(matmul(x, p.w_ex_u), p.b_u);
    Tensor h = Tensor::zeros({1, hidden});
    Tensor c = Tensor::zeros({1, hidden});
    std::vector<Tensor> states(static_cast<std::size_t>(n));
    for (int step = 0; step < n; ++step) {
      const int t = reverse ? n - 1 - step : step;
      std::tie(h, c) = lstm_step(rows(gi, {t}), rows(gf, {t}), rows(go, {t}), rows(gu, {t}), h, c,
                                 p, params.candidate);
      states[t] = h;
    }
    return concat(states, 0);  // n x hidden, in original token order
  };

  Tensor fwd = run_direction(params.fwd, false);
  Tensor bwd = run_direction(params.bwd, true);
  Tensor hidden_states = concat(fwd, bwd, 1);
  Tensor emissions = add_rowwise(matmul(hidden_states, params.w_out), params.b_out);
  return EncoderOutput{hidden_states, emissions};
}

WordEmbedding WordEmbedding::lookup(LabelVocab vocab, Tensor table) {
  if (table.ndim() != 2 || table.shape()[0] != vocab.size()) {
    throw DimensionError("lookup table shape " + shape_str(table.shape()) +
                         " does not match vocab size " + std::to_string(vocab.size()));
  }
  WordEmbedding w;
  w.trainable_ = true;
  w.dim_ = table.shape()[1];
  w.vocab_ = std::move(vocab);
  w.table_ = std::move(table);
  return w;
}

WordEmbedding WordEmbedding::from_file(const std::string& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("d=", 0) != 0) {
    throw ParseError("embedding file '" + path + "' must start with a 'd=<int>' header");
  }
  int d = 0;
  try {
    d = std::stoi(line.substr(2));
  } catch (const std::exception&) {
    throw ParseError("embedding file '" + path + "' has a malformed dimension header");
  }
  if (d != expected_dim) {
    throw ConfigError("embedding file dimension " + std::to_string(d) +
                      " does not match configured dimension " + std::to_string(expected_dim));
  }
  WordEmbedding w;
  w.trainable_ = false;
  w.dim_ = d;
  std::string current_id;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("id ", 0) == 0) {
      current_id = line.substr(3);
      if (w.file_vectors_.count(current_id)) {
        throw ParseError("embedding file repeats tweet id '" + current_id + "'");
      }
      w.file_vectors_[current_id] = {};
      continue;
    }
    if (current_id.empty()) {
      throw ParseError("embedding file line " + std::to_string(line_no) +
                       " appears before any 'id' header");
    }
    std::istringstream row(line);
    std::vector<double>& dst = w.file_vectors_[current_id];
    double v;
    int count = 0;
    while (row >> v) {
      dst.push_back(v);
      ++count;
    }
    if (count != d) {
      throw ParseError("embedding file line " + std::to_string(line_no) + " has " +
                       std::to_string(count) + " values, expected " + std::to_string(d));
    }
  }
  return w;
}

Tensor WordEmbedding::embed(const Tweet& tweet) const {
  const int n = tweet.length();
  if (trainable_) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ids[i] = vocab_.id(tweet.tokens[i].text);
    return rows(table_, ids);
  }
  auto it = file_vectors_.find(tweet.id);
  if (it == file_vectors_.end()) {
    throw DataError("embedding file has no vectors for tweet id '" + tweet.id + "'");
  }
  if (static_cast<int>(it->second.size()) != n * dim_) {
    throw DataError("embedding rows for tweet id '" + tweet.id + "' cover " +
                    std::to_string(it->second.size() / dim_) + " tokens, expected " +
                    std::to_string(n));
  }
  return Tensor::from({n, dim_}, it->second);
}

}  // namespace cgcre
