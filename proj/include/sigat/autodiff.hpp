#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every operation in execution order, so recording order is a
// topological order and backward() is a single reverse sweep. Values are
// checked for NaN/Inf as they are produced.
//
// Tensors are at most rank 2. Rank-1 tensors of extent n behave as n x 1
// columns; a tensor with one element behaves as a scalar.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sigat::ad {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> extents, double fill = 0.0);
  Tensor(std::vector<std::size_t> extents, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor scalar(double v) { return matrix(1, 1, {v}); }

  std::size_t size() const { return values.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  bool operator==(const Tensor&) const = default;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Handle to a tape entry.
struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Trainable leaf; gradients are returned for these in registration order.
  Var parameter(Tensor value);
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return params_.size(); }

  // Returns d(loss)/d(p) for every registered parameter. Adjoints of
  // intermediate entries are released during the sweep.
  std::vector<Tensor> backward(Var loss);

  void reset();

  // a (r x k) * b (k x c), or a * b^T when transpose_b is set.
  Var matmul(Var a, Var b, bool transpose_b = false);
  // Elementwise sum; b may also be a 1 x c row broadcast over the rows of a.
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scalar_mul(Var a, double s);
  // Row-wise concatenation: row r of the result is row r of each part, joined
  // left to right. All parts need the same row count.
  Var concat_rows(std::span<const Var> parts);
  Var concat_rows(std::initializer_list<Var> parts) {
    return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
  }
  Var leaky_relu(Var a, double slope);
  Var elu(Var a);
  Var exp(Var a);
  // Softmax restricted to `subset`; the result has the logits' shape and is
  // exactly zero outside the subset.
  Var softmax_over_index_set(Var logits, std::span<const std::size_t> subset);
  // Batched form: segment s covers entries [offsets[s], offsets[s+1]) of a
  // column of logits and is normalized independently.
  Var segment_softmax(Var logits, std::span<const std::size_t> offsets);
  // out[s] = sum over e in segment s of weights[e] * values[e, :].
  Var segment_weighted_sum(Var weights, Var values, std::span<const std::size_t> offsets);
  // Fused attention scoring: out[e] = a[:F]^T z[sources[e]] + a[F:]^T z[targets[e]]
  // for z of shape M x F and a of length 2F. Equal to gathering both rows,
  // concatenating them and multiplying by a, without the E x 2F temporary.
  Var edge_pair_logits(Var z, Var a, std::span<const std::size_t> sources,
                       std::span<const std::size_t> targets);
  // out[s] = sum over e in segment s of weights[e] * z[targets[e], :].
  Var neighbor_weighted_sum(Var weights, Var z, std::span<const std::size_t> offsets,
                            std::span<const std::size_t> targets);
  Var mean_over_rows(Var a);
  Var gather_rows(Var a, std::span<const std::size_t> indices);
  Var sum(Var a);
  Var softmax_rows(Var a);
  // -log(max(probs[0, label], floor)); the floor keeps the loss finite.
  Var neg_log_prob(Var probs, std::size_t label, double floor = 1e-12);

 private:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Entry {
    Tensor value;
    Tensor grad;  // empty until some consumer contributes
    BackwardFn backward;
    bool is_parameter = false;
    bool requires_grad = false;
  };

  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward, const char* op);
  bool wants(std::size_t id) const { return nodes_[id].requires_grad; }
  Tensor& grad_of(std::size_t id);
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }

  std::vector<Entry> nodes_;
  std::vector<std::size_t> params_;
};

// Builds a scalar loss on `tape` from parameters registered in order.
using LossBuilder = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates checked per parameter tensor; 0 checks all of them.
  std::size_t sample_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Central-difference check of the tape gradients. The relative error per
// coordinate is |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
GradCheckResult grad_check(const LossBuilder& build, const std::vector<Tensor>& params,
                           const GradCheckOptions& options = {});

}  // namespace sigat::ad
