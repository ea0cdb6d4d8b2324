#include "cgcre/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "cgcre/errors.hpp"

namespace cgcre {

namespace {

thread_local GradTape* g_active_tape = nullptr;

int checked_size(const std::vector<int>& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  long long n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("tensor axis must be non-negative, got " + shape_str(shape));
    n *= d;
  }
  return static_cast<int>(n);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::make(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  int n = checked_size(shape);
  if (static_cast<int>(values.size()) != n) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(std::vector<int> shape) {
  int n = checked_size(shape);
  return make(std::move(shape), std::vector<double>(n, 0.0), false);
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  int n = checked_size(shape);
  return make(std::move(shape), std::vector<double>(n, value), false);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  return make(std::move(shape), std::move(values), false);
}

Tensor Tensor::scalar(double value) { return make({1}, {value}, false); }

Tensor Tensor::param(std::vector<int> shape, std::vector<double> values) {
  return make(std::move(shape), std::move(values), true);
}

Tensor Tensor::param_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  int n = checked_size(shape);
  double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<double> values(n);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return make(std::move(shape), std::move(values), true);
}

std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::value() const {
  if (size() != 1) throw DimensionError("value() requires a scalar, shape is " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(int i) const { return node_->data[static_cast<std::size_t>(i)]; }

double Tensor::at(int i, int j) const {
  return node_->data[static_cast<std::size_t>(i) * node_->shape[1] + j];
}

// ---- tape ----

GradTape::GradTape() : prev_(g_active_tape) { g_active_tape = this; }

GradTape::~GradTape() { g_active_tape = prev_; }

GradTape* GradTape::active() { return g_active_tape; }

void GradTape::clear() { ops_.clear(); }

void GradTape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward requires a scalar loss, shape is " + shape_str(loss.shape()));
  }
  if (!std::isfinite(loss.value())) throw NumericError("backward on non-finite loss");
  TensorNode* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    TensorNode& n = **it;
    if (n.backward_fn && !n.grad.empty()) n.backward_fn(n);
  }
}

// Shared entry point for every op: computes the value, and when a tape is
// active and any parent is trainable, records the node with its backward rule.
Tensor record_op(std::vector<int> shape, std::vector<double> values, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backward_fn) {
  bool track = false;
  if (GradTape::active() != nullptr) {
    for (const Tensor& p : parents) track = track || p.requires_grad();
  }
  Tensor out = Tensor::make(std::move(shape), std::move(values), track);
  if (track) {
    auto node = out.node();
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
    GradTape::active()->record(node);
  }
  return out;
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw DimensionError("matmul requires 2-D operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (int i = 0; i < m; ++i) {
    const double* Ai = A + static_cast<std::size_t>(i) * k;
    double* Ci = out.data() + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = Ai[p];
      if (aip == 0.0) continue;
      const double* Bp = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) Ci[j] += aip * Bp[j];
    }
  }
  return record_op({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    const double* dC = self.grad.data();
    if (na.requires_grad) {
      na.ensure_grad();
      // dA += dC * B^T
      const double* B = nb.data.data();
      for (int i = 0; i < m; ++i) {
        const double* dCi = dC + static_cast<std::size_t>(i) * n;
        double* dAi = na.grad.data() + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
          const double* Bp = B + static_cast<std::size_t>(p) * n;
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += dCi[j] * Bp[j];
          dAi[p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      // dB += A^T * dC
      const double* A = na.data.data();
      for (int p = 0; p < k; ++p) {
        double* dBp = nb.grad.data() + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
          const double api = A[static_cast<std::size_t>(i) * k + p];
          if (api == 0.0) continue;
          const double* dCi = dC + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) dBp[j] += api * dCi[j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data());
  const std::vector<double>& bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return record_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    for (int side = 0; side < 2; ++side) {
      TensorNode& p = *self.parents[side];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data());
  const std::vector<double>& bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return record_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.data());
  const std::vector<double>& bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return record_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.data());
  for (double& v : out) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return record_op(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double s = self.data[i];
      p.grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.data());
  for (double& v : out) v = std::tanh(v);
  return record_op(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double t = self.data[i];
      p.grad[i] += self.grad[i] * (1.0 - t * t);
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return record_op(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (p.data[i] > 0.0) p.grad[i] += self.grad[i];
    }
  });
}

Tensor softmax(const Tensor& x) {
  if (x.ndim() != 1 || x.size() == 0) {
    throw DimensionError("softmax requires a non-empty 1-D tensor, got " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data());
  double mx = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : out) v /= total;
  return record_op(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    double dot = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * self.data[i];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.data[i] * (self.grad[i] - dot);
    }
  });
}

namespace {
double lse_of(const double* v, int n) {
  double mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += std::exp(v[i] - mx);
  return mx + std::log(total);
}
}  // namespace

Tensor logsumexp(const Tensor& x) {
  if (x.ndim() != 1 || x.size() == 0) {
    throw DimensionError("logsumexp requires a non-empty 1-D tensor, got " + shape_str(x.shape()));
  }
  double v = lse_of(x.data().data(), x.size());
  int n = x.size();
  return record_op({1}, {v}, {x}, [n](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    double s = self.data[0];
    for (int i = 0; i < n; ++i) p.grad[i] += self.grad[0] * std::exp(p.data[i] - s);
  });
}

Tensor logsumexp_rows(const Tensor& x) {
  if (x.ndim() != 2 || x.shape()[1] == 0) {
    throw DimensionError("logsumexp_rows requires a 2-D tensor with columns, got " +
                         shape_str(x.shape()));
  }
  const int r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(r);
  for (int i = 0; i < r; ++i) out[i] = lse_of(x.data().data() + static_cast<std::size_t>(i) * c, c);
  return record_op({r}, std::move(out), {x}, [r, c](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double s = self.data[i];
      const double g = self.grad[i];
      const double* xi = p.data.data() + static_cast<std::size_t>(i) * c;
      double* dxi = p.grad.data() + static_cast<std::size_t>(i) * c;
      for (int j = 0; j < c; ++j) dxi[j] += g * std::exp(xi[j] - s);
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw DimensionError("concat supports axis 0 or 1");
  const int nd = parts[0].ndim();
  if (axis >= nd) throw DimensionError("concat axis out of range for " + shape_str(parts[0].shape()));
  // Validate non-axis dims.
  for (const Tensor& p : parts) {
    if (p.ndim() != nd) throw DimensionError("concat rank mismatch");
    for (int d = 0; d < nd; ++d) {
      if (d != axis && p.shape()[d] != parts[0].shape()[d]) {
        throw DimensionError("concat: shapes " + shape_str(parts[0].shape()) + " and " +
                             shape_str(p.shape()) + " disagree off axis " + std::to_string(axis));
      }
    }
  }
  std::vector<int> shape = parts[0].shape();
  int total_axis = 0;
  for (const Tensor& p : parts) total_axis += p.shape()[axis];
  shape[axis] = total_axis;

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(checked_size(shape)));
  std::vector<int> widths;
  if (axis == 0 || nd == 1) {
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    for (const Tensor& p : parts) widths.push_back(p.size());
  } else {
    const int r = shape[0];
    for (const Tensor& p : parts) widths.push_back(p.shape()[1]);
    out.resize(static_cast<std::size_t>(r) * shape[1]);
    for (int i = 0; i < r; ++i) {
      double* dst = out.data() + static_cast<std::size_t>(i) * shape[1];
      for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const int w = widths[pi];
        const double* src = parts[pi].data().data() + static_cast<std::size_t>(i) * w;
        std::copy(src, src + w, dst);
        dst += w;
      }
    }
  }
  const int out_cols = (nd == 2) ? shape[1] : 0;
  const int out_rows = shape[0];
  const bool row_mode = (axis == 0 || nd == 1);
  return record_op(shape, std::move(out), parts,
                   [widths, out_cols, out_rows, row_mode](TensorNode& self) {
                     if (row_mode) {
                       std::size_t offset = 0;
                       for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                         TensorNode& p = *self.parents[pi];
                         const int w = widths[pi];
                         if (p.requires_grad) {
                           p.ensure_grad();
                           for (int i = 0; i < w; ++i) p.grad[i] += self.grad[offset + i];
                         }
                         offset += w;
                       }
                     } else {
                       int col0 = 0;
                       for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                         TensorNode& p = *self.parents[pi];
                         const int w = widths[pi];
                         if (p.requires_grad) {
                           p.ensure_grad();
                           for (int i = 0; i < out_rows; ++i) {
                             const double* g =
                                 self.grad.data() + static_cast<std::size_t>(i) * out_cols + col0;
                             double* dp = p.grad.data() + static_cast<std::size_t>(i) * w;
                             for (int j = 0; j < w; ++j) dp[j] += g[j];
                           }
                         }
                         col0 += w;
                       }
                     }
                   });
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) { return concat(std::vector<Tensor>{a, b}, axis); }

Tensor stack_rows(const std::vector<Tensor>& rows_1d) {
  if (rows_1d.empty()) throw DimensionError("stack_rows of zero vectors");
  const int d = rows_1d[0].size();
  for (const Tensor& r : rows_1d) {
    if (r.ndim() != 1 || r.size() != d) {
      throw DimensionError("stack_rows requires equal-length 1-D vectors");
    }
  }
  const int n = static_cast<int>(rows_1d.size());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n) * d);
  for (const Tensor& r : rows_1d) out.insert(out.end(), r.data().begin(), r.data().end());
  return record_op({n, d}, std::move(out), rows_1d, [d](TensorNode& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      TensorNode& p = *self.parents[i];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      const double* g = self.grad.data() + i * d;
      for (int j = 0; j < d; ++j) p.grad[j] += g[j];
    }
  });
}

Tensor dropout(const Tensor& x, double ratio, bool training, Rng& rng) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ConfigError("dropout ratio must be in [0,1), got " + std::to_string(ratio));
  }
  if (!training || ratio == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - ratio);
  auto mask = std::make_shared<std::vector<double>>(x.data().size());
  std::vector<double> out(x.data());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double m = rng.next_double() < ratio ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out[i] *= m;
  }
  return record_op(x.shape(), std::move(out), {x}, [mask](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * (*mask)[i];
  });
}

Tensor add_rowwise(const Tensor& x, const Tensor& bias) {
  if (x.ndim() != 2 || bias.ndim() != 1 || bias.size() != x.shape()[1]) {
    throw DimensionError("add_rowwise: " + shape_str(x.shape()) + " with bias " +
                         shape_str(bias.shape()));
  }
  const int r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(x.data());
  const double* b = bias.data().data();
  for (int i = 0; i < r; ++i) {
    double* oi = out.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) oi[j] += b[j];
  }
  return record_op(x.shape(), std::move(out), {x, bias}, [r, c](TensorNode& self) {
    TensorNode& px = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int i = 0; i < r; ++i) {
        const double* g = self.grad.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) pb.grad[j] += g[j];
      }
    }
  });
}

Tensor transpose(const Tensor& x) {
  if (x.ndim() != 2) throw DimensionError("transpose requires 2-D, got " + shape_str(x.shape()));
  const int r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(r) * c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      out[static_cast<std::size_t>(j) * r + i] = x.data()[static_cast<std::size_t>(i) * c + j];
    }
  }
  return record_op({c, r}, std::move(out), {x}, [r, c](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        p.grad[static_cast<std::size_t>(i) * c + j] += self.grad[static_cast<std::size_t>(j) * r + i];
      }
    }
  });
}

Tensor rows(const Tensor& x, const std::vector<int>& indices) {
  if (x.ndim() != 2) throw DimensionError("rows requires 2-D source, got " + shape_str(x.shape()));
  const int r = x.shape()[0], c = x.shape()[1];
  for (int idx : indices) {
    if (idx < 0 || idx >= r) {
      throw DimensionError("row index " + std::to_string(idx) + " out of range for " +
                           shape_str(x.shape()));
    }
  }
  std::vector<double> out;
  out.reserve(indices.size() * static_cast<std::size_t>(c));
  for (int idx : indices) {
    const double* src = x.data().data() + static_cast<std::size_t>(idx) * c;
    out.insert(out.end(), src, src + c);
  }
  auto idx_copy = indices;
  return record_op({static_cast<int>(indices.size()), c}, std::move(out), {x},
                   [idx_copy, c](TensorNode& self) {
                     TensorNode& p = *self.parents[0];
                     if (!p.requires_grad) return;
                     p.ensure_grad();
                     for (std::size_t i = 0; i < idx_copy.size(); ++i) {
                       const double* g = self.grad.data() + i * c;
                       double* dst = p.grad.data() + static_cast<std::size_t>(idx_copy[i]) * c;
                       for (int j = 0; j < c; ++j) dst[j] += g[j];
                     }
                   });
}

Tensor row(const Tensor& x, int i) {
  if (x.ndim() != 2) throw DimensionError("row requires 2-D source, got " + shape_str(x.shape()));
  const int r = x.shape()[0], c = x.shape()[1];
  if (i < 0 || i >= r) {
    throw DimensionError("row index " + std::to_string(i) + " out of range for " +
                         shape_str(x.shape()));
  }
  const double* src = x.data().data() + static_cast<std::size_t>(i) * c;
  return record_op({c}, std::vector<double>(src, src + c), {x}, [i, c](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    double* dst = p.grad.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) dst[j] += self.grad[j];
  });
}

Tensor pick(const Tensor& x, int i) {
  if (x.ndim() != 1) throw DimensionError("pick(i) requires 1-D, got " + shape_str(x.shape()));
  if (i < 0 || i >= x.size()) throw DimensionError("pick index out of range");
  return record_op({1}, {x.data()[static_cast<std::size_t>(i)]}, {x}, [i](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    p.grad[static_cast<std::size_t>(i)] += self.grad[0];
  });
}

Tensor pick(const Tensor& x, int i, int j) {
  if (x.ndim() != 2) throw DimensionError("pick(i,j) requires 2-D, got " + shape_str(x.shape()));
  const int r = x.shape()[0], c = x.shape()[1];
  if (i < 0 || i >= r || j < 0 || j >= c) throw DimensionError("pick index out of range");
  const std::size_t flat = static_cast<std::size_t>(i) * c + j;
  return record_op({1}, {x.data()[flat]}, {x}, [flat](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    p.grad[flat] += self.grad[0];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return record_op({1}, {total}, {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (double& g : p.grad) g += self.grad[0];
  });
}

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.data());
  for (double& v : out) v *= c;
  return record_op(x.shape(), std::move(out), {x}, [c](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += c * self.grad[i];
  });
}

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw ConfigError("grad_check epsilon must lie in [1e-6, 1e-3]");
  }
  // Analytic pass.
  std::vector<std::vector<double>> analytic;
  {
    for (Tensor& p : params) p.zero_grad();
    GradTape tape;
    Tensor loss = f();
    if (!std::isfinite(loss.value())) throw NumericError("grad_check: non-finite loss");
    tape.backward(loss);
    for (Tensor& p : params) analytic.push_back(p.grad());
  }
  // Central differences, one parameter entry at a time.
  double max_rel_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    for (std::size_t i = 0; i < p.data().size(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + epsilon;
      const double up = f().value();
      p.data()[i] = saved - epsilon;
      const double down = f().value();
      p.data()[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite loss during perturbation");
      }
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel_err = std::max(max_rel_err, rel);
    }
  }
  return max_rel_err;
}

}  // namespace cgcre
