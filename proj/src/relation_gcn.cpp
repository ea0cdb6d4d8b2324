#include "cgcre/relation_gcn.hpp"

#include <algorithm>

#include "cgcre/errors.hpp"

namespace cgcre {

DependencyAdjacency build_adjacency(const Tweet& tweet, bool self_loops) {
  const int n = tweet.length();
  DependencyAdjacency adj;
  adj.length = n;
  std::vector<double> fwd(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> bwd(static_cast<std::size_t>(n) * n, 0.0);
  for (int w = 0; w < n; ++w) {
    const int head = tweet.tokens[w].dep_head;
    if (head != w) {
      fwd[static_cast<std::size_t>(w) * n + head] = 1.0;  // message from the head
      bwd[static_cast<std::size_t>(head) * n + w] = 1.0;  // message from the dependent
    }
    if (self_loops) {
      fwd[static_cast<std::size_t>(w) * n + w] = 1.0;
      bwd[static_cast<std::size_t>(w) * n + w] = 1.0;
    }
  }
  adj.has_fwd_neighbor.resize(static_cast<std::size_t>(n));
  adj.has_bwd_neighbor.resize(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) {
    bool f = false, b = false;
    for (int v = 0; v < n; ++v) {
      f = f || fwd[static_cast<std::size_t>(w) * n + v] != 0.0;
      b = b || bwd[static_cast<std::size_t>(w) * n + v] != 0.0;
    }
    adj.has_fwd_neighbor[w] = f;
    adj.has_bwd_neighbor[w] = b;
  }
  adj.forward = Tensor::from({n, n}, std::move(fwd));
  adj.backward = Tensor::from({n, n}, std::move(bwd));
  return adj;
}

namespace {

Tensor gcn_direction_layer(const Tensor& adjacency, const Tensor& prev, const Tensor& shared,
                           const Tensor& weights, const Tensor& bias,
                           const std::vector<bool>& has_neighbor) {
  Tensor messages = concat(prev, shared, 1);
  Tensor aggregated = matmul(adjacency, messages);
  Tensor out = relu(add_rowwise(matmul(aggregated, weights), bias));
  // With self-loops every token has a neighbor; only the diagnostic
  // no-self-loop mode needs the bias suppressed on isolated rows.
  if (std::find(has_neighbor.begin(), has_neighbor.end(), false) != has_neighbor.end()) {
    const int n = out.shape()[0], h = out.shape()[1];
    std::vector<double> mask(static_cast<std::size_t>(n) * h, 1.0);
    for (int w = 0; w < n; ++w) {
      if (!has_neighbor[w]) {
        std::fill_n(mask.begin() + static_cast<std::size_t>(w) * h, h, 0.0);
      }
    }
    out = mul(out, Tensor::from({n, h}, std::move(mask)));
  }
  return out;
}

}  // namespace

Tensor bigcn_forward(const DependencyAdjacency& adjacency, const Tensor& shared_states,
                     const BiGcnParams& params) {
  if (params.layers.empty()) throw ConfigError("BiGCN needs at least one layer");
  const int n = adjacency.length;
  if (shared_states.ndim() != 2 || shared_states.shape()[0] != n) {
    throw DimensionError("shared state rows " + shape_str(shared_states.shape()) +
                         " do not match adjacency size " + std::to_string(n));
  }
  Tensor h_fwd = Tensor::zeros({n, params.hidden});
  Tensor h_bwd = Tensor::zeros({n, params.hidden});
  for (const GcnLayerParams& layer : params.layers) {
    Tensor next_fwd = gcn_direction_layer(adjacency.forward, h_fwd, shared_states, layer.w_fwd,
                                          layer.b_fwd, adjacency.has_fwd_neighbor);
    Tensor next_bwd = gcn_direction_layer(adjacency.backward, h_bwd, shared_states, layer.w_bwd,
                                          layer.b_bwd, adjacency.has_bwd_neighbor);
    h_fwd = next_fwd;
    h_bwd = next_bwd;
  }
  return concat(h_fwd, h_bwd, 1);
}

Tensor span_repr(const Tensor& gcn_states, const ConcernSpan& span) {
  if (!(0 <= span.start && span.start < span.end && span.end <= gcn_states.shape()[0])) {
    throw ValidationError("span_repr: span [" + std::to_string(span.start) + "," +
                          std::to_string(span.end) + ") invalid for " +
                          std::to_string(gcn_states.shape()[0]) + " tokens");
  }
  std::vector<int> indices;
  for (int i = span.start; i < span.end; ++i) indices.push_back(i);
  Tensor selected = rows(gcn_states, indices);
  const int len = span.end - span.start;
  Tensor mean_weights = Tensor::full({1, len}, 1.0 / static_cast<double>(len));
  return matmul(mean_weights, selected);  // 1 x 2*hidden
}

Tensor relation_score(const Tensor& subject_repr, const Tensor& object_repr,
                      const RelationHeadParams& head) {
  Tensor combined = add(matmul(subject_repr, head.w_subject), matmul(object_repr, head.w_object));
  Tensor hidden = relu(add_rowwise(combined, head.bias));
  return row(matmul(hidden, head.w_cls), 0);
}

Tensor relation_prob(const Tensor& scores) { return softmax(scores); }

std::vector<RelationCandidate> relation_candidates(
    const std::vector<ConcernSpan>& spans, const std::vector<RelationAnnotation>& relations) {
  // Spans arrive in canonical start order; candidates enumerate i<j.
  std::vector<RelationCandidate> candidates;
  const int c = static_cast<int>(spans.size());
  for (int i = 0; i < c; ++i) {
    for (int j = i + 1; j < c; ++j) {
      RelationCandidate cand;
      cand.subject = i;
      cand.object = j;
      for (const RelationAnnotation& r : relations) {
        if (std::min(r.subject, r.object) == i && std::max(r.subject, r.object) == j) {
          cand.target = relation_class(r.label);
          break;
        }
      }
      candidates.push_back(cand);
    }
  }
  return candidates;
}

Tensor relation_loss(const std::vector<ConcernSpan>& spans,
                     const std::vector<RelationAnnotation>& relations, const Tensor& gcn_states,
                     const RelationHeadParams& head) {
  auto candidates = relation_candidates(spans, relations);
  if (candidates.empty()) return Tensor::scalar(0.0);
  std::vector<Tensor> reprs;
  reprs.reserve(spans.size());
  for (const ConcernSpan& s : spans) reprs.push_back(span_repr(gcn_states, s));
  Tensor total = Tensor::scalar(0.0);
  for (const RelationCandidate& cand : candidates) {
    Tensor scores = relation_score(reprs[cand.subject], reprs[cand.object], head);
    Tensor ce = sub(logsumexp(scores), pick(scores, cand.target));
    total = add(total, ce);
  }
  return scale(total, 1.0 / static_cast<double>(candidates.size()));
}

}  // namespace cgcre
