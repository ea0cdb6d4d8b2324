#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgcre/rng.hpp"

namespace cgcre {

class GradTape;

// Dense 1-D/2-D tensor of doubles with reverse-mode autodiff. Nodes form a
// DAG through parent links; the active GradTape records every produced node
// in forward order, which is already a topological order, so the backward
// pass is a reverse sweep over the tape.
struct TensorNode {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  int size() const {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;

  // Constant (non-trainable) tensors.
  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value);

  // Trainable leaf.
  static Tensor param(std::vector<int> shape, std::vector<double> values);
  static Tensor param_uniform(std::vector<int> shape, int fan_in, Rng& rng);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

  // Scalar readout; requires size() == 1.
  double value() const;
  double at(int i) const;
  double at(int i, int j) const;

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  friend class GradTape;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  static Tensor make(std::vector<int> shape, std::vector<double> values, bool requires_grad);
  friend Tensor record_op(std::vector<int> shape, std::vector<double> values,
                          std::vector<Tensor> parents,
                          std::function<void(TensorNode&)> backward_fn);

  std::shared_ptr<TensorNode> node_;
};

// Records primitive ops in execution order. Constructing a tape activates it
// for the current thread; destruction restores the previously active tape.
// Without an active tape, ops compute values only (inference mode).
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  // Reverse sweep from a scalar loss; accumulates grads into every reachable
  // requires_grad tensor.
  void backward(const Tensor& loss);
  // Drops all recorded nodes (frees intermediate buffers).
  void clear();
  std::size_t size() const { return ops_.size(); }

  static GradTape* active();

 private:
  friend Tensor record_op(std::vector<int> shape, std::vector<double> values,
                          std::vector<Tensor> parents,
                          std::function<void(TensorNode&)> backward_fn);
  void record(const std::shared_ptr<TensorNode>& node) { ops_.push_back(node); }

  std::vector<std::shared_ptr<TensorNode>> ops_;
  GradTape* prev_ = nullptr;
};

// ---- primitive operations ----

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

// 1-D softmax / logsumexp, computed with max-subtraction.
Tensor softmax(const Tensor& x);
Tensor logsumexp(const Tensor& x);
// Row-wise logsumexp of a 2-D tensor -> 1-D.
Tensor logsumexp_rows(const Tensor& x);

// n-ary concatenation along axis 0 or 1; the binary form is a convenience.
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor concat(const Tensor& a, const Tensor& b, int axis);
// Stack 1-D vectors of equal length into a 2-D matrix (one per row).
Tensor stack_rows(const std::vector<Tensor>& rows_1d);

// Inverted dropout: zero with probability ratio and scale survivors by
// 1/(1-ratio) in training mode; identity in inference mode.
Tensor dropout(const Tensor& x, double ratio, bool training, Rng& rng);

// Y[i][j] = X[i][j] + b[j]  (the only broadcasting form supported).
Tensor add_rowwise(const Tensor& x, const Tensor& bias);
Tensor transpose(const Tensor& x);

// Row gather from a 2-D tensor; backward scatter-adds into the source rows.
Tensor rows(const Tensor& x, const std::vector<int>& indices);
// Single row as a 1-D vector.
Tensor row(const Tensor& x, int i);

// Scalar element picks.
Tensor pick(const Tensor& x, int i);
Tensor pick(const Tensor& x, int i, int j);

Tensor sum(const Tensor& x);
Tensor scale(const Tensor& x, double c);

// Max over parameters of |analytic - central difference| / max(|a|,|n|,1e-8).
// f must rebuild the loss from the params' current data on every call.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double epsilon);

// Extension point for custom primitives: computes nothing itself, but wires
// the produced node (value + parents + backward rule) onto the active tape.
Tensor record_op(std::vector<int> shape, std::vector<double> values, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backward_fn);

std::string shape_str(const std::vector<int>& shape);

}  // namespace cgcre
