#include "cgcre/crf.hpp"

#include <cmath>
#include <limits>

#include "cgcre/errors.hpp"

namespace cgcre {

namespace {

constexpr double kIllegalPenalty = -1e4;

void check_inputs(const Tensor& emissions, const Tensor& transitions) {
  if (emissions.ndim() != 2 || emissions.shape()[0] < 1) {
    throw DimensionError("CRF emissions must be n x k with n >= 1, got " +
                         shape_str(emissions.shape()));
  }
  const int k = emissions.shape()[1];
  if (transitions.ndim() != 2 || transitions.shape()[0] != k || transitions.shape()[1] != k) {
    throw DimensionError("CRF transitions must be " + std::to_string(k) + "x" + std::to_string(k) +
                         ", got " + shape_str(transitions.shape()));
  }
  for (double v : emissions.data()) {
    if (!std::isfinite(v)) throw NumericError("CRF emissions contain a non-finite value");
  }
  for (double v : transitions.data()) {
    if (!std::isfinite(v)) throw NumericError("CRF transitions contain a non-finite value");
  }
}

}  // namespace

Tensor sequence_score(const Tensor& emissions, const TagSequence& tags, const Tensor& transitions) {
  check_inputs(emissions, transitions);
  const int n = emissions.shape()[0];
  const int k = emissions.shape()[1];
  if (static_cast<int>(tags.size()) != n) {
    throw DimensionError("tag sequence length " + std::to_string(tags.size()) +
                         " does not match emissions rows " + std::to_string(n));
  }
  for (int t : tags) {
    if (t < 0 || t >= k) throw DimensionError("tag id " + std::to_string(t) + " out of range");
  }
  Tensor score = pick(emissions, 0, tags[0]);
  for (int i = 1; i < n; ++i) {
    score = add(score, pick(emissions, i, tags[i]));
    score = add(score, pick(transitions, tags[i - 1], tags[i]));
  }
  return score;
}

Tensor log_partition(const Tensor& emissions, const Tensor& transitions) {
  check_inputs(emissions, transitions);
  const int n = emissions.shape()[0];
  // alpha[j] = log sum of exp(score) over prefixes ending in tag j.
  Tensor alpha = row(emissions, 0);
  if (n > 1) {
    Tensor trans_t = transpose(transitions);  // trans_t[j][i] = T[i][j]
    for (int t = 1; t < n; ++t) {
      Tensor scores = add_rowwise(trans_t, alpha);      // [j][i] = T[i][j] + alpha[i]
      alpha = add(logsumexp_rows(scores), row(emissions, t));
    }
  }
  return logsumexp(alpha);
}

Tensor crf_nll(const Tensor& emissions, const TagSequence& gold, const Tensor& transitions) {
  return sub(log_partition(emissions, transitions), sequence_score(emissions, gold, transitions));
}

std::vector<double> bio_transition_penalty(int k) {
  if (k != kNumTags) {
    throw DimensionError("BIO penalty is defined for the " + std::to_string(kNumTags) +
                         "-tag set, got k=" + std::to_string(k));
  }
  std::vector<double> penalty(static_cast<std::size_t>(k) * k, 0.0);
  for (int from = 0; from < k; ++from) {
    for (int to = 0; to < k; ++to) {
      const bool to_inside = to != kTagOutside && ((to - 1) % 2) == 1;
      if (!to_inside) continue;
      const int to_type = (to - 1) / 2;
      const bool from_same_type = from != kTagOutside && (from - 1) / 2 == to_type;
      if (!from_same_type) penalty[static_cast<std::size_t>(from) * k + to] = kIllegalPenalty;
    }
  }
  return penalty;
}

TagSequence viterbi_decode(const Tensor& emissions, const Tensor& transitions,
                           const std::vector<double>* penalty) {
  check_inputs(emissions, transitions);
  const int n = emissions.shape()[0];
  const int k = emissions.shape()[1];
  if (penalty != nullptr && static_cast<int>(penalty->size()) != k * k) {
    throw DimensionError("penalty matrix size does not match k x k");
  }
  const double* O = emissions.data().data();
  std::vector<double> trans(transitions.data());
  if (penalty != nullptr) {
    for (std::size_t i = 0; i < trans.size(); ++i) trans[i] += (*penalty)[i];
  }

  std::vector<double> score(O, O + k);
  std::vector<double> next(static_cast<std::size_t>(k));
  std::vector<int> backptr(static_cast<std::size_t>(n) * k, 0);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int best_i = 0;
      for (int i = 0; i < k; ++i) {
        const double s = score[i] + trans[static_cast<std::size_t>(i) * k + j];
        if (s > best) {  // strict: ties keep the lower predecessor id
          best = s;
          best_i = i;
        }
      }
      next[j] = best + O[static_cast<std::size_t>(t) * k + j];
      backptr[static_cast<std::size_t>(t) * k + j] = best_i;
    }
    std::swap(score, next);
  }

  int best_tag = 0;
  double best_score = score[0];
  for (int j = 1; j < k; ++j) {
    if (score[j] > best_score) {
      best_score = score[j];
      best_tag = j;
    }
  }
  TagSequence tags(static_cast<std::size_t>(n));
  tags[n - 1] = best_tag;
  for (int t = n - 1; t > 0; --t) {
    tags[t - 1] = backptr[static_cast<std::size_t>(t) * k + tags[t]];
  }
  return tags;
}

}  // namespace cgcre
