#include "sigat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "sigat/error.hpp"
#include "sigat/rng.hpp"

namespace sigat::ad {

namespace {

using Lane4 = double __attribute__((vector_size(32)));
constexpr std::size_t kTileRows = 6;
constexpr std::size_t kTileLanes = 2;
constexpr std::size_t kTileCols = 4 * kTileLanes;

// Full 6x8 tiles of c += a * b with b row-major and contiguous. Lanes are
// moved one vector at a time so the accumulators stay in registers.
void gemm_tiles(const double* __restrict av, std::size_t a_i, std::size_t a_k,
                const double* __restrict bv, double* __restrict cv, std::size_t rows,
                std::size_t cols, std::size_t inner, std::size_t p) {
  for (std::size_t i0 = 0; i0 < rows; i0 += kTileRows) {
    for (std::size_t j0 = 0; j0 < cols; j0 += kTileCols) {
      Lane4 acc[kTileRows][kTileLanes] = {};
      for (std::size_t k = 0; k < inner; ++k) {
        Lane4 bk[kTileLanes];
        for (std::size_t v = 0; v < kTileLanes; ++v) std::memcpy(&bk[v], bv + k * p + j0 + 4 * v, sizeof(Lane4));
        for (std::size_t r = 0; r < kTileRows; ++r) {
          const double x = av[(i0 + r) * a_i + k * a_k];
          for (std::size_t v = 0; v < kTileLanes; ++v) acc[r][v] += x * bk[v];
        }
      }
      for (std::size_t r = 0; r < kTileRows; ++r) {
        for (std::size_t v = 0; v < kTileLanes; ++v) {
          double* dst = cv + (i0 + r) * p + j0 + 4 * v;
          Lane4 out;
          std::memcpy(&out, dst, sizeof out);
          out += acc[r][v];
          std::memcpy(dst, &out, sizeof out);
        }
      }
    }
  }
}

// c += op(a) * op(b). Every output element sums its products from zero in
// ascending k and then adds the total to c. Tiles and edges do the same
// arithmetic, so the result does not depend on blocking or alignment.
void gemm_acc(Tensor& c, const Tensor& a, bool trans_a, const Tensor& b, bool trans_b) {
  const std::size_t m = c.rows(), p = c.cols();
  const std::size_t inner = trans_a ? a.rows() : a.cols();
  const std::size_t a_i = trans_a ? 1 : a.cols(), a_k = trans_a ? a.cols() : 1;
  std::vector<double> bt;
  const double* bv = b.values.data();
  if (trans_b) {
    bt.resize(inner * p);
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < inner; ++k) bt[k * p + j] = bv[j * inner + k];
    }
    bv = bt.data();
  }
  const double* av = a.values.data();
  double* cv = c.values.data();
  const std::size_t full_i = m - m % kTileRows, full_j = p - p % kTileCols;
  gemm_tiles(av, a_i, a_k, bv, cv, full_i, full_j, inner, p);

  std::vector<double> acc;
  const auto edge = [&](std::size_t i_begin, std::size_t i_end, std::size_t j_begin) {
    if (j_begin >= p) return;
    acc.resize(p - j_begin);
    for (std::size_t i = i_begin; i < i_end; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < inner; ++k) {
        const double x = av[i * a_i + k * a_k];
        const double* bk = bv + k * p + j_begin;
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += x * bk[j];
      }
      for (std::size_t j = 0; j < acc.size(); ++j) cv[i * p + j_begin + j] += acc[j];
    }
  };
  edge(0, full_i, full_j);
  edge(full_i, m, 0);
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  fail(ErrorCode::kShape, std::string(op) + ": incompatible shapes " + shape_string(a.shape) +
                              " and " + shape_string(b.shape));
}

void check_segments(const char* op, std::span<const std::size_t> offsets, std::size_t length) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != length ||
      !std::is_sorted(offsets.begin(), offsets.end())) {
    fail(ErrorCode::kShape, std::string(op) + ": offsets do not partition " +
                                std::to_string(length) + " entries");
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> extents, double fill)
    : shape(std::move(extents)), values(product(shape), fill) {
  if (shape.size() > 2) fail(ErrorCode::kShape, "tensors are limited to rank 2");
}

Tensor::Tensor(std::vector<std::size_t> extents, std::vector<double> data)
    : shape(std::move(extents)), values(std::move(data)) {
  if (shape.size() > 2) fail(ErrorCode::kShape, "tensors are limited to rank 2");
  if (product(shape) != values.size()) {
    fail(ErrorCode::kShape, "tensor of shape " + shape_string(shape) + " given " +
                                std::to_string(values.size()) + " values");
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const { return shape.empty() ? 1 : shape[0]; }
std::size_t Tensor::cols() const { return shape.size() < 2 ? 1 : shape[1]; }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

Var Tape::parameter(Tensor value) {
  Var v = push(std::move(value), {}, nullptr, "parameter");
  nodes_[v.id].is_parameter = true;
  nodes_[v.id].requires_grad = true;
  params_.push_back(v.id);
  return v;
}

Var Tape::constant(Tensor value) { return push(std::move(value), {}, nullptr, "constant"); }

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward, const char* op) {
  for (double x : value.values) {
    if (!std::isfinite(x)) {
      fail(ErrorCode::kNumeric, std::string("non-finite value produced by ") + op);
    }
  }
  Entry entry;
  entry.value = std::move(value);
  for (Var in : inputs) entry.requires_grad = entry.requires_grad || nodes_[in.id].requires_grad;
  if (entry.requires_grad) entry.backward = std::move(backward);
  nodes_.push_back(std::move(entry));
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad_of(std::size_t id) {
  Entry& e = nodes_[id];
  if (e.grad.values.empty()) e.grad = Tensor(e.value.shape, 0.0);
  return e.grad;
}

void Tape::reset() {
  nodes_.clear();
  params_.clear();
}

std::vector<Tensor> Tape::backward(Var loss) {
  if (loss.id >= nodes_.size()) fail(ErrorCode::kContract, "backward: unknown loss entry");
  if (nodes_[loss.id].value.size() != 1) {
    fail(ErrorCode::kContract, "backward: loss must be a scalar, got shape " +
                                   shape_string(nodes_[loss.id].value.shape));
  }
  for (Entry& e : nodes_) e.grad = Tensor();
  if (nodes_[loss.id].requires_grad) {
    grad_of(loss.id).values[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Entry& e = nodes_[id];
      if (e.grad.values.empty() || !e.backward) continue;
      e.backward(*this, id);
      if (!e.is_parameter) e.grad = Tensor();
    }
  }
  std::vector<Tensor> grads;
  grads.reserve(params_.size());
  for (std::size_t id : params_) {
    Entry& e = nodes_[id];
    grads.push_back(e.grad.values.empty() ? Tensor(e.value.shape, 0.0) : std::move(e.grad));
    e.grad = Tensor();
  }
  return grads;
}

Var Tape::matmul(Var a, Var b, bool transpose_b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const std::size_t inner = transpose_b ? tb.cols() : tb.rows();
  if (ta.cols() != inner) shape_error("matmul", ta, tb);
  const std::size_t out_cols = transpose_b ? tb.rows() : tb.cols();
  Tensor out({ta.rows(), out_cols});
  gemm_acc(out, ta, false, tb, transpose_b);
  return push(std::move(out), {a, b},
              [a, b, transpose_b](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                if (t.wants(a.id)) gemm_acc(t.grad_of(a.id), g, false, t.value(b), !transpose_b);
                if (t.wants(b.id)) {
                  if (transpose_b) {
                    gemm_acc(t.grad_of(b.id), g, true, t.value(a), false);
                  } else {
                    gemm_acc(t.grad_of(b.id), t.value(a), true, g, false);
                  }
                }
              },
              "matmul");
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const bool same = ta.rows() == tb.rows() && ta.cols() == tb.cols();
  const bool bias = !same && tb.rows() == 1 && tb.cols() == ta.cols();
  if (!same && !bias) shape_error("add", ta, tb);
  Tensor out = ta;
  const std::size_t cols = ta.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += tb.values[same ? i : i % cols];
  return push(std::move(out), {a, b},
              [a, b, same, cols](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                if (t.wants(a.id)) {
                  Tensor& ga = t.grad_of(a.id);
                  for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g.values[i];
                }
                if (t.wants(b.id)) {
                  Tensor& gb = t.grad_of(b.id);
                  for (std::size_t i = 0; i < g.size(); ++i) gb.values[same ? i : i % cols] += g.values[i];
                }
              },
              "add");
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rows() != tb.rows() || ta.cols() != tb.cols()) shape_error("mul", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= tb.values[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                if (t.wants(a.id)) {
                  Tensor& ga = t.grad_of(a.id);
                  const Tensor& vb = t.value(b);
                  for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g.values[i] * vb.values[i];
                }
                if (t.wants(b.id)) {
                  Tensor& gb = t.grad_of(b.id);
                  const Tensor& va = t.value(a);
                  for (std::size_t i = 0; i < g.size(); ++i) gb.values[i] += g.values[i] * va.values[i];
                }
              },
              "mul");
}

Var Tape::scalar_mul(Var a, double s) {
  Tensor out = value(a);
  for (double& x : out.values) x *= s;
  return push(std::move(out), {a},
              [a, s](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_of(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += s * g.values[i];
              },
              "scalar_mul");
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::kShape, "concat_rows: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) shape_error("concat_rows", value(parts[0]), value(p));
    total += value(p).cols();
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(tp.values.begin() + static_cast<std::ptrdiff_t>(r * tp.cols()), tp.cols(),
                  out.values.begin() + static_cast<std::ptrdiff_t>(r * total + offset));
    }
    offset += tp.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Var result = push(std::move(out), {}, nullptr, "concat_rows");
  Entry& entry = nodes_[result.id];
  for (Var in : inputs) entry.requires_grad = entry.requires_grad || nodes_[in.id].requires_grad;
  if (entry.requires_grad) {
    entry.backward = [inputs](Tape& t, std::size_t self) {
      const Tensor& g = t.grad(self);
      const std::size_t total = g.cols();
      std::size_t offset = 0;
      for (Var in : inputs) {
        const std::size_t cols = t.value(in).cols();
        if (t.wants(in.id)) {
          Tensor& gi = t.grad_of(in.id);
          for (std::size_t r = 0; r < gi.rows(); ++r) {
            for (std::size_t c = 0; c < cols; ++c) gi.values[r * cols + c] += g.values[r * total + offset + c];
          }
        }
        offset += cols;
      }
    };
  }
  return result;
}

Var Tape::leaky_relu(Var a, double slope) {
  Tensor out = value(a);
  for (double& x : out.values) x = x > 0.0 ? x : slope * x;
  return push(std::move(out), {a},
              [a, slope](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                const Tensor& x = t.value(a);
                Tensor& ga = t.grad_of(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  ga.values[i] += x.values[i] > 0.0 ? g.values[i] : slope * g.values[i];
                }
              },
              "leaky_relu");
}

Var Tape::elu(Var a) {
  Tensor out = value(a);
  for (double& x : out.values) x = x > 0.0 ? x : std::expm1(x);
  return push(std::move(out), {a},
              [a](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                const Tensor& x = t.value(a);
                Tensor& ga = t.grad_of(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  ga.values[i] += x.values[i] > 0.0 ? g.values[i] : g.values[i] * std::exp(x.values[i]);
                }
              },
              "elu");
}

Var Tape::exp(Var a) {
  Tensor out = value(a);
  for (double& x : out.values) x = std::exp(x);
  return push(std::move(out), {a},
              [a](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                const Tensor& y = t.value(Var{self});
                Tensor& ga = t.grad_of(a.id);
                for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g.values[i] * y.values[i];
              },
              "exp");
}

Var Tape::softmax_over_index_set(Var logits, std::span<const std::size_t> subset) {
  const Tensor& z = value(logits);
  if (subset.empty()) fail(ErrorCode::kShape, "softmax_over_index_set: empty index set");
  for (std::size_t j : subset) {
    if (j >= z.size()) fail(ErrorCode::kShape, "softmax_over_index_set: index out of range");
  }
  Tensor out(z.shape, 0.0);
  double max_logit = z.values[subset[0]];
  for (std::size_t j : subset) max_logit = std::max(max_logit, z.values[j]);
  double denom = 0.0;
  for (std::size_t j : subset) {
    out.values[j] = std::exp(z.values[j] - max_logit);
    denom += out.values[j];
  }
  for (std::size_t j : subset) out.values[j] /= denom;
  std::vector<std::size_t> index(subset.begin(), subset.end());
  return push(std::move(out), {logits},
              [logits, index](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                const Tensor& y = t.value(Var{self});
                Tensor& gz = t.grad_of(logits.id);
                double dot = 0.0;
                for (std::size_t j : index) dot += y.values[j] * g.values[j];
                for (std::size_t j : index) gz.values[j] += y.values[j] * (g.values[j] - dot);
              },
              "softmax_over_index_set");
}

Var Tape::segment_softmax(Var logits, std::span<const std::size_t> offsets) {
  const Tensor& z = value(logits);
  check_segments("segment_softmax", offsets, z.size());
  Tensor out(z.shape, 0.0);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s];
    const std::size_t hi = offsets[s + 1];
    if (lo == hi) continue;
    double max_logit = z.values[lo];
    for (std::size_t e = lo; e < hi; ++e) max_logit = std::max(max_logit, z.values[e]);
    double denom = 0.0;
    for (std::size_t e = lo; e < hi; ++e) {
      out.values[e] = std::exp(z.values[e] - max_logit);
      denom += out.values[e];
    }
    for (std::size_t e = lo; e < hi; ++e) out.values[e] /= denom;
  }
  std::vector<std::size_t> seg(offsets.begin(), offsets.end());
  return push(std::move(out), {logits},
              [logits, seg](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                const Tensor& y = t.value(Var{self});
                Tensor& gz = t.grad_of(logits.id);
                for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
                  double dot = 0.0;
                  for (std::size_t e = seg[s]; e < seg[s + 1]; ++e) dot += y.values[e] * g.values[e];
                  for (std::size_t e = seg[s]; e < seg[s + 1]; ++e) {
                    gz.values[e] += y.values[e] * (g.values[e] - dot);
                  }
                }
              },
              "segment_softmax");
}

Var Tape::segment_weighted_sum(Var weights, Var values, std::span<const std::size_t> offsets) {
  const Tensor& w = value(weights);
  const Tensor& v = value(values);
  if (w.size() != v.rows()) shape_error("segment_weighted_sum", w, v);
  check_segments("segment_weighted_sum", offsets, v.rows());
  const std::size_t segments = offsets.size() - 1;
  const std::size_t cols = v.cols();
  Tensor out({segments, cols});
  for (std::size_t s = 0; s < segments; ++s) {
    double* dst = out.values.data() + s * cols;
    for (std::size_t e = offsets[s]; e < offsets[s + 1]; ++e) {
      const double we = w.values[e];
      const double* src = v.values.data() + e * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += we * src[c];
    }
  }
  std::vector<std::size_t> seg(offsets.begin(), offsets.end());
  return push(std::move(out), {weights, values},
              [weights, values, seg, cols](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                const bool want_w = t.wants(weights.id);
                const bool want_v = t.wants(values.id);
                const Tensor& w = t.value(weights);
                const Tensor& v = t.value(values);
                Tensor* gw = want_w ? &t.grad_of(weights.id) : nullptr;
                Tensor* gv = want_v ? &t.grad_of(values.id) : nullptr;
                for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
                  const double* gs = g.values.data() + s * cols;
                  for (std::size_t e = seg[s]; e < seg[s + 1]; ++e) {
                    if (gw) {
                      const double* src = v.values.data() + e * cols;
                      double dot = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) dot += gs[c] * src[c];
                      gw->values[e] += dot;
                    }
                    if (gv) {
                      double* dst = gv->values.data() + e * cols;
                      const double we = w.values[e];
                      for (std::size_t c = 0; c < cols; ++c) dst[c] += we * gs[c];
                    }
                  }
                }
              },
              "segment_weighted_sum");
}

Var Tape::edge_pair_logits(Var z, Var a, std::span<const std::size_t> sources,
                           std::span<const std::size_t> targets) {
  const Tensor& tz = value(z);
  const Tensor& ta = value(a);
  const std::size_t m = tz.rows();
  const std::size_t f = tz.cols();
  if (ta.size() != 2 * f) shape_error("edge_pair_logits", tz, ta);
  if (sources.size() != targets.size()) fail(ErrorCode::kShape, "edge_pair_logits: edge arrays differ in length");
  for (std::size_t e = 0; e < sources.size(); ++e) {
    if (sources[e] >= m || targets[e] >= m) fail(ErrorCode::kShape, "edge_pair_logits: node index out of range");
  }
  // Per-node halves of the score, then one addition per edge.
  std::vector<double> left(m, 0.0);
  std::vector<double> right(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = tz.values.data() + i * f;
    double l = 0.0;
    double r = 0.0;
    for (std::size_t c = 0; c < f; ++c) {
      l += ta.values[c] * row[c];
      r += ta.values[f + c] * row[c];
    }
    left[i] = l;
    right[i] = r;
  }
  Tensor out({sources.size(), 1});
  for (std::size_t e = 0; e < sources.size(); ++e) out.values[e] = left[sources[e]] + right[targets[e]];
  std::vector<std::size_t> src(sources.begin(), sources.end());
  std::vector<std::size_t> dst(targets.begin(), targets.end());
  return push(std::move(out), {z, a},
              [z, a, src, dst, m, f](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                std::vector<double> gl(m, 0.0);
                std::vector<double> gr(m, 0.0);
                for (std::size_t e = 0; e < src.size(); ++e) {
                  gl[src[e]] += g.values[e];
                  gr[dst[e]] += g.values[e];
                }
                const Tensor& tz = t.value(z);
                const Tensor& ta = t.value(a);
                if (t.wants(z.id)) {
                  Tensor& gz = t.grad_of(z.id);
                  for (std::size_t i = 0; i < m; ++i) {
                    double* row = gz.values.data() + i * f;
                    for (std::size_t c = 0; c < f; ++c) row[c] += gl[i] * ta.values[c] + gr[i] * ta.values[f + c];
                  }
                }
                if (t.wants(a.id)) {
                  Tensor& ga = t.grad_of(a.id);
                  for (std::size_t i = 0; i < m; ++i) {
                    const double* row = tz.values.data() + i * f;
                    for (std::size_t c = 0; c < f; ++c) {
                      ga.values[c] += gl[i] * row[c];
                      ga.values[f + c] += gr[i] * row[c];
                    }
                  }
                }
              },
              "edge_pair_logits");
}

Var Tape::neighbor_weighted_sum(Var weights, Var z, std::span<const std::size_t> offsets,
                                std::span<const std::size_t> targets) {
  const Tensor& w = value(weights);
  const Tensor& tz = value(z);
  if (w.size() != targets.size()) shape_error("neighbor_weighted_sum", w, tz);
  check_segments("neighbor_weighted_sum", offsets, targets.size());
  for (std::size_t j : targets) {
    if (j >= tz.rows()) fail(ErrorCode::kShape, "neighbor_weighted_sum: node index out of range");
  }
  const std::size_t segments = offsets.size() - 1;
  const std::size_t cols = tz.cols();
  Tensor out({segments, cols});
  for (std::size_t s = 0; s < segments; ++s) {
    double* dst = out.values.data() + s * cols;
    for (std::size_t e = offsets[s]; e < offsets[s + 1]; ++e) {
      const double we = w.values[e];
      const double* src = tz.values.data() + targets[e] * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += we * src[c];
    }
  }
  std::vector<std::size_t> seg(offsets.begin(), offsets.end());
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return push(std::move(out), {weights, z},
              [weights, z, seg, tgt, cols](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                const Tensor& w = t.value(weights);
                const Tensor& tz = t.value(z);
                Tensor* gw = t.wants(weights.id) ? &t.grad_of(weights.id) : nullptr;
                Tensor* gz = t.wants(z.id) ? &t.grad_of(z.id) : nullptr;
                for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
                  const double* gs = g.values.data() + s * cols;
                  for (std::size_t e = seg[s]; e < seg[s + 1]; ++e) {
                    if (gw) {
                      const double* src = tz.values.data() + tgt[e] * cols;
                      double dot = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) dot += gs[c] * src[c];
                      gw->values[e] += dot;
                    }
                    if (gz) {
                      double* dst = gz->values.data() + tgt[e] * cols;
                      const double we = w.values[e];
                      for (std::size_t c = 0; c < cols; ++c) dst[c] += we * gs[c];
                    }
                  }
                }
              },
              "neighbor_weighted_sum");
}

Var Tape::mean_over_rows(Var a) {
  const Tensor& x = value(a);
  if (x.rows() == 0) fail(ErrorCode::kShape, "mean_over_rows: no rows");
  Tensor out({1, x.cols()});
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.values[c] += x.values[r * cols + c];
  }
  for (double& v : out.values) v /= static_cast<double>(x.rows());
  return push(std::move(out), {a},
              [a](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_of(a.id);
                const std::size_t width = ga.cols();
                const double scale = 1.0 / static_cast<double>(ga.rows());
                for (std::size_t r = 0; r < ga.rows(); ++r) {
                  for (std::size_t c = 0; c < width; ++c) ga.values[r * width + c] += g.values[c] * scale;
                }
              },
              "mean_over_rows");
}

Var Tape::gather_rows(Var a, std::span<const std::size_t> indices) {
  const Tensor& x = value(a);
  const std::size_t cols = x.cols();
  Tensor out({indices.size(), cols});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= x.rows()) fail(ErrorCode::kShape, "gather_rows: row index out of range");
    std::copy_n(x.values.begin() + static_cast<std::ptrdiff_t>(indices[r] * cols), cols,
                out.values.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  std::vector<std::size_t> index(indices.begin(), indices.end());
  return push(std::move(out), {a},
              [a, index, cols](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_of(a.id);
                for (std::size_t r = 0; r < index.size(); ++r) {
                  const double* src = g.values.data() + r * cols;
                  double* dst = ga.values.data() + index[r] * cols;
                  for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                }
              },
              "gather_rows");
}

Var Tape::sum(Var a) {
  const Tensor& x = value(a);
  double total = 0.0;
  for (double v : x.values) total += v;
  return push(Tensor::scalar(total), {a},
              [a](Tape& t, std::size_t self) {
                const double g = t.grad(self).values[0];
                for (double& v : t.grad_of(a.id).values) v += g;
              },
              "sum");
}

Var Tape::softmax_rows(Var a) {
  const Tensor& x = value(a);
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  Tensor out(x.shape, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = x.values.data() + r * cols;
    double* dst = out.values.data() + r * cols;
    const double max_logit = *std::max_element(src, src + cols);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] = std::exp(src[c] - max_logit);
      denom += dst[c];
    }
    for (std::size_t c = 0; c < cols; ++c) dst[c] /= denom;
  }
  return push(std::move(out), {a},
              [a, rows, cols](Tape& t, std::size_t self) {
                const Tensor& g = t.grad(self);
                const Tensor& y = t.value(Var{self});
                Tensor& ga = t.grad_of(a.id);
                for (std::size_t r = 0; r < rows; ++r) {
                  double dot = 0.0;
                  for (std::size_t c = 0; c < cols; ++c) dot += y.values[r * cols + c] * g.values[r * cols + c];
                  for (std::size_t c = 0; c < cols; ++c) {
                    ga.values[r * cols + c] += y.values[r * cols + c] * (g.values[r * cols + c] - dot);
                  }
                }
              },
              "softmax_rows");
}

Var Tape::neg_log_prob(Var probs, std::size_t label, double floor) {
  const Tensor& p = value(probs);
  if (label >= p.size()) fail(ErrorCode::kShape, "neg_log_prob: label out of range");
  const double q = p.values[label];
  const bool clamped = !(q > floor);
  return push(Tensor::scalar(-std::log(clamped ? floor : q)), {probs},
              [probs, label, clamped](Tape& t, std::size_t self) {
                if (clamped) return;
                const double g = t.grad(self).values[0];
                Tensor& gp = t.grad_of(probs.id);
                gp.values[label] += -g / t.value(probs).values[label];
              },
              "neg_log_prob");
}

GradCheckResult grad_check(const LossBuilder& build, const std::vector<Tensor>& params,
                           const GradCheckOptions& options) {
  if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-4)) {
    fail(ErrorCode::kInvalidConfig, "grad_check: epsilon must lie in [1e-7, 1e-4]");
  }
  auto evaluate = [&](const std::vector<Tensor>& p) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(p.size());
    for (const Tensor& t : p) vars.push_back(tape.constant(t));
    const Var loss = build(tape, vars);
    if (tape.value(loss).size() != 1) fail(ErrorCode::kContract, "grad_check: loss must be scalar");
    return tape.value(loss).values[0];
  };

  std::vector<Tensor> analytic;
  double base = 0.0;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : params) vars.push_back(tape.parameter(t));
    const Var loss = build(tape, vars);
    base = tape.value(loss).values[0];
    analytic = tape.backward(loss);
  }
  const double again = evaluate(params);
  if (again != base || evaluate(params) != base) {
    fail(ErrorCode::kDeterminism, "grad_check: loss closure is not deterministic");
  }

  GradCheckResult result;
  SplitMix64 rng(options.seed);
  std::vector<Tensor> probe = params;
  const double eps = options.epsilon;
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<std::size_t> coords(params[p].size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.sample_per_param > 0 && options.sample_per_param < coords.size()) {
      for (std::size_t i = 0; i < options.sample_per_param; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(coords.size() - i));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(options.sample_per_param);
    }
    for (std::size_t c : coords) {
      const double original = probe[p].values[c];
      probe[p].values[c] = original + eps;
      const double up = evaluate(probe);
      probe[p].values[c] = original - eps;
      const double down = evaluate(probe);
      probe[p].values[c] = original;
      const double fd = (up - down) / (2.0 * eps);
      const double ad = analytic[p].values[c];
      const double rel = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      if (result.coordinates == 0 || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_param = p;
        result.worst_index = c;
      }
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace sigat::ad
