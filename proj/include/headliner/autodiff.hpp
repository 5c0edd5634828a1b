#pragma once

// Reverse-mode automatic differentiation on a tape of tensor nodes.
//
// A Tape owns the nodes of one computation graph; Values are cheap handles
// into it. Construction order is a topological order, so backward() walks
// node indices in reverse from the root, each node accumulating into its
// parents' gradients. Tapes are single-use: build, backward once, discard.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "headliner/common.hpp"
#include "headliner/tensor.hpp"

namespace headliner::ad {

class Tape;

class Value {
 public:
  Value() = default;
  Value(Tape* tape, std::size_t idx) : tape_(tape), idx_(idx) {}

  const Tensor& val() const;
  const Tensor& grad() const;
  std::size_t index() const { return idx_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t idx_ = 0;
};

class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    std::function<void(Tape&, std::size_t)> backward;  // self index passed in
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value leaf(Tensor v) {
    nodes_.push_back({std::move(v), Tensor{}, {}, nullptr});
    nodes_.back().grad = Tensor(nodes_.back().value.shape, 0.0);
    return Value(this, nodes_.size() - 1);
  }

  Value push(Tensor v, std::vector<std::size_t> parents,
             std::function<void(Tape&, std::size_t)> back) {
    nodes_.push_back({std::move(v), Tensor{}, std::move(parents), std::move(back)});
    nodes_.back().grad = Tensor(nodes_.back().value.shape, 0.0);
    return Value(this, nodes_.size() - 1);
  }

  Node& node(std::size_t i) { return nodes_[i]; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and propagates to every reachable node.
  // The root must be scalar, and a tape runs backward only once.
  void backward(Value root) {
    if (root.tape() != this) fail("backward: value from a different tape");
    if (ran_backward_) fail("backward: tape already ran backward");
    ran_backward_ = true;
    if (nodes_[root.index()].value.numel() != 1)
      fail("backward: root must be scalar, got shape %s",
           shape_str(nodes_[root.index()].value).c_str());

    std::vector<char> reachable(nodes_.size(), 0);
    std::vector<std::size_t> stack = {root.index()};
    reachable[root.index()] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t p : nodes_[i].parents)
        if (!reachable[p]) {
          reachable[p] = 1;
          stack.push_back(p);
        }
    }

    nodes_[root.index()].grad.data[0] = 1.0;
    for (std::size_t i = root.index() + 1; i-- > 0;) {
      if (!reachable[i] || !nodes_[i].backward) continue;
      nodes_[i].backward(*this, i);
    }
  }

  // count of probabilities that hit the log floor in neg_log_pick
  long long log_floor_hits = 0;

 private:
  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

inline const Tensor& Value::val() const { return tape_->node(idx_).value; }
inline const Tensor& Value::grad() const { return tape_->node(idx_).grad; }

namespace detail {

inline Tape& same_tape(const Value& a, const Value& b, const char* op) {
  if (!a.valid() || !b.valid()) fail("%s: uninitialized value", op);
  if (a.tape() != b.tape()) fail("%s: values from different tapes", op);
  return *a.tape();
}

inline void want_rank(const Value& v, std::size_t r, const char* op) {
  if (v.val().rank() != r)
    fail("%s: expected rank-%zu, got shape %s", op, r, shape_str(v.val()).c_str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and arithmetic primitives
// ---------------------------------------------------------------------------

inline Value add(Value a, Value b) {
  Tape& t = detail::same_tape(a, b, "add");
  if (!a.val().same_shape(b.val()))
    fail("add: shape mismatch %s vs %s", shape_str(a.val()).c_str(),
         shape_str(b.val()).c_str());
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b.val().data[i];
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      tp.node(ia).grad.data[i] += g.data[i];
      tp.node(ib).grad.data[i] += g.data[i];
    }
  });
}

inline Value sub(Value a, Value b) {
  Tape& t = detail::same_tape(a, b, "sub");
  if (!a.val().same_shape(b.val()))
    fail("sub: shape mismatch %s vs %s", shape_str(a.val()).c_str(),
         shape_str(b.val()).c_str());
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= b.val().data[i];
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      tp.node(ia).grad.data[i] += g.data[i];
      tp.node(ib).grad.data[i] -= g.data[i];
    }
  });
}

inline Value mul(Value a, Value b) {
  Tape& t = detail::same_tape(a, b, "mul");
  if (!a.val().same_shape(b.val()))
    fail("mul: shape mismatch %s vs %s", shape_str(a.val()).c_str(),
         shape_str(b.val()).c_str());
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.val().data[i];
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& av = tp.node(ia).value;
    const Tensor& bv = tp.node(ib).value;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      tp.node(ia).grad.data[i] += g.data[i] * bv.data[i];
      tp.node(ib).grad.data[i] += g.data[i] * av.data[i];
    }
  });
}

// multiply by a compile-time-known constant
inline Value scale(Value a, double s) {
  if (!a.valid()) fail("scale: uninitialized value");
  Tape& t = *a.tape();
  Tensor out = a.val();
  for (double& v : out.data) v *= s;
  const std::size_t ia = a.index();
  return t.push(std::move(out), {ia}, [ia, s](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    for (std::size_t i = 0; i < g.numel(); ++i) tp.node(ia).grad.data[i] += s * g.data[i];
  });
}

// scalar node times arbitrary tensor node
inline Value smul(Value s, Value x) {
  Tape& t = detail::same_tape(s, x, "smul");
  if (s.val().numel() != 1) fail("smul: first argument must be scalar");
  Tensor out = x.val();
  const double sv = s.val().data[0];
  for (double& v : out.data) v *= sv;
  const std::size_t is = s.index(), ix = x.index();
  return t.push(std::move(out), {is, ix}, [is, ix](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& xv = tp.node(ix).value;
    const double sval = tp.node(is).value.data[0];
    double ds = 0.0;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      ds += g.data[i] * xv.data[i];
      tp.node(ix).grad.data[i] += sval * g.data[i];
    }
    tp.node(is).grad.data[0] += ds;
  });
}

inline Value tanh_v(Value a) {
  if (!a.valid()) fail("tanh: uninitialized value");
  Tape& t = *a.tape();
  Tensor out = a.val();
  for (double& v : out.data) v = std::tanh(v);
  const std::size_t ia = a.index();
  return t.push(std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& y = tp.node(self).value;
    for (std::size_t i = 0; i < g.numel(); ++i)
      tp.node(ia).grad.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
  });
}

inline Value sigmoid_v(Value a) {
  if (!a.valid()) fail("sigmoid: uninitialized value");
  Tape& t = *a.tape();
  Tensor out = a.val();
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  const std::size_t ia = a.index();
  return t.push(std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& y = tp.node(self).value;
    for (std::size_t i = 0; i < g.numel(); ++i)
      tp.node(ia).grad.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
  });
}

// natural log; strictly positive inputs only (losses go through neg_log_pick)
inline Value log_v(Value a) {
  if (!a.valid()) fail("log: uninitialized value");
  Tape& t = *a.tape();
  Tensor out = a.val();
  for (double& v : out.data) {
    if (v <= 0.0) fail("log: non-positive input %g", v);
    v = std::log(v);
  }
  const std::size_t ia = a.index();
  return t.push(std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& x = tp.node(ia).value;
    for (std::size_t i = 0; i < g.numel(); ++i)
      tp.node(ia).grad.data[i] += g.data[i] / x.data[i];
  });
}

// elementwise log with a 1e-12 floor: entries below the floor contribute
// log(1e-12) with zero gradient, and each hit bumps the tape counter
inline Value log_floor(Value a) {
  if (!a.valid()) fail("log_floor: uninitialized value");
  constexpr double kFloor = 1e-12;
  Tape& t = *a.tape();
  Tensor out = a.val();
  std::vector<bool> floored(out.numel(), false);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (out.data[i] < kFloor) {
      floored[i] = true;
      ++t.log_floor_hits;
      out.data[i] = std::log(kFloor);
    } else {
      out.data[i] = std::log(out.data[i]);
    }
  }
  const std::size_t ia = a.index();
  return t.push(std::move(out), {ia}, [ia, floored](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& x = tp.node(ia).value;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (floored[i]) continue;
      tp.node(ia).grad.data[i] += g.data[i] / x.data[i];
    }
  });
}

// softmax over the last axis (rank 1: whole vector; rank 2: each row)
inline Value softmax(Value a) {
  if (!a.valid()) fail("softmax: uninitialized value");
  Tape& t = *a.tape();
  const Tensor& x = a.val();
  if (x.rank() != 1 && x.rank() != 2)
    fail("softmax: expected rank 1 or 2, got %s", shape_str(x).c_str());
  const std::size_t cols = x.shape.back();
  const std::size_t rows = x.numel() / cols;
  if (cols == 0) fail("softmax: empty axis");
  Tensor out = x;
  for (std::size_t r = 0; r < rows; ++r) {
    double* p = out.data.data() + r * cols;
    double mx = p[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, p[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      p[c] = std::exp(p[c] - mx);
      z += p[c];
    }
    for (std::size_t c = 0; c < cols; ++c) p[c] /= z;
  }
  const std::size_t ia = a.index();
  return t.push(std::move(out), {ia}, [ia, rows, cols](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& y = tp.node(self).value;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gp = g.data.data() + r * cols;
      const double* yp = y.data.data() + r * cols;
      double gy = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gy += gp[c] * yp[c];
      for (std::size_t c = 0; c < cols; ++c)
        tp.node(ia).grad.data[r * cols + c] += yp[c] * (gp[c] - gy);
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Value matmul(Value a, Value b) {
  Tape& t = detail::same_tape(a, b, "matmul");
  detail::want_rank(a, 2, "matmul");
  detail::want_rank(b, 2, "matmul");
  const std::size_t m = a.val().shape[0], k = a.val().shape[1];
  const std::size_t k2 = b.val().shape[0], n = b.val().shape[1];
  if (k != k2)
    fail("matmul: inner dims differ, %s x %s", shape_str(a.val()).c_str(),
         shape_str(b.val()).c_str());
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.val().at(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * b.val().at(p, j);
    }
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& av = tp.node(ia).value;
    const Tensor& bv = tp.node(ib).value;
    Tensor& ga = tp.node(ia).grad;
    Tensor& gb = tp.node(ib).grad;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double gv = g.at(i, j);
        if (gv == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) {
          ga.at(i, p) += gv * bv.at(p, j);
          gb.at(p, j) += av.at(i, p) * gv;
        }
      }
  });
}

// row vector times matrix: v[k] . M[k,n] -> [n]
inline Value vecmat(Value v, Value m) {
  Tape& t = detail::same_tape(v, m, "vecmat");
  detail::want_rank(v, 1, "vecmat");
  detail::want_rank(m, 2, "vecmat");
  const std::size_t k = v.val().shape[0];
  if (m.val().shape[0] != k)
    fail("vecmat: inner dims differ, %s x %s", shape_str(v.val()).c_str(),
         shape_str(m.val()).c_str());
  const std::size_t n = m.val().shape[1];
  Tensor out({n});
  for (std::size_t p = 0; p < k; ++p) {
    const double vv = v.val().data[p];
    if (vv == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out.data[j] += vv * m.val().at(p, j);
  }
  const std::size_t iv = v.index(), im = m.index();
  return t.push(std::move(out), {iv, im}, [iv, im, k, n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    const Tensor& vv = tp.node(iv).value;
    const Tensor& mv = tp.node(im).value;
    for (std::size_t p = 0; p < k; ++p) {
      double dv = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        dv += g.data[j] * mv.at(p, j);
        tp.node(im).grad.at(p, j) += vv.data[p] * g.data[j];
      }
      tp.node(iv).grad.data[p] += dv;
    }
  });
}

// M[m,n] + v[n] broadcast over rows
inline Value add_rowwise(Value m, Value v) {
  Tape& t = detail::same_tape(m, v, "add_rowwise");
  detail::want_rank(m, 2, "add_rowwise");
  detail::want_rank(v, 1, "add_rowwise");
  const std::size_t rows = m.val().shape[0], cols = m.val().shape[1];
  if (v.val().shape[0] != cols)
    fail("add_rowwise: %s + %s", shape_str(m.val()).c_str(), shape_str(v.val()).c_str());
  Tensor out = m.val();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += v.val().data[c];
  const std::size_t im = m.index(), iv = v.index();
  return t.push(std::move(out), {im, iv}, [im, iv, rows, cols](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        tp.node(im).grad.at(r, c) += g.at(r, c);
        tp.node(iv).grad.data[c] += g.at(r, c);
      }
  });
}

inline Value dot(Value a, Value b) {
  Tape& t = detail::same_tape(a, b, "dot");
  detail::want_rank(a, 1, "dot");
  detail::want_rank(b, 1, "dot");
  if (a.val().shape[0] != b.val().shape[0])
    fail("dot: length mismatch %s vs %s", shape_str(a.val()).c_str(),
         shape_str(b.val()).c_str());
  double s = 0.0;
  for (std::size_t i = 0; i < a.val().numel(); ++i) s += a.val().data[i] * b.val().data[i];
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(Tensor::scalar(s), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const double g = tp.node(self).grad.data[0];
    const Tensor& av = tp.node(ia).value;
    const Tensor& bv = tp.node(ib).value;
    for (std::size_t i = 0; i < av.numel(); ++i) {
      tp.node(ia).grad.data[i] += g * bv.data[i];
      tp.node(ib).grad.data[i] += g * av.data[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

// concatenate rank-1 values into one vector
inline Value concat(const std::vector<Value>& parts) {
  if (parts.empty()) fail("concat: no inputs");
  Tape& t = *parts[0].tape();
  std::vector<std::size_t> idxs;
  std::vector<double> data;
  for (const Value& p : parts) {
    detail::same_tape(parts[0], p, "concat");
    detail::want_rank(p, 1, "concat");
    idxs.push_back(p.index());
    data.insert(data.end(), p.val().data.begin(), p.val().data.end());
  }
  return t.push(Tensor::vector(std::move(data)), idxs,
                [idxs](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.node(self).grad;
                  std::size_t off = 0;
                  for (std::size_t idx : idxs) {
                    Tensor& pg = tp.node(idx).grad;
                    for (std::size_t i = 0; i < pg.numel(); ++i)
                      pg.data[i] += g.data[off + i];
                    off += pg.numel();
                  }
                });
}

// stack rank-0 values into a vector [n]
inline Value stack_scalars(const std::vector<Value>& parts) {
  if (parts.empty()) fail("stack_scalars: no inputs");
  Tape& t = *parts[0].tape();
  std::vector<std::size_t> idxs;
  std::vector<double> data;
  for (const Value& p : parts) {
    detail::same_tape(parts[0], p, "stack_scalars");
    if (p.val().numel() != 1) fail("stack_scalars: non-scalar input");
    idxs.push_back(p.index());
    data.push_back(p.val().data[0]);
  }
  return t.push(Tensor::vector(std::move(data)), idxs,
                [idxs](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.node(self).grad;
                  for (std::size_t i = 0; i < idxs.size(); ++i)
                    tp.node(idxs[i]).grad.data[0] += g.data[i];
                });
}

// stack equal-length rank-1 values into a matrix [n, len]
inline Value stack_rows(const std::vector<Value>& parts) {
  if (parts.empty()) fail("stack_rows: no inputs");
  Tape& t = *parts[0].tape();
  const std::size_t len = parts[0].val().numel();
  std::vector<std::size_t> idxs;
  std::vector<double> data;
  for (const Value& p : parts) {
    detail::same_tape(parts[0], p, "stack_rows");
    detail::want_rank(p, 1, "stack_rows");
    if (p.val().numel() != len) fail("stack_rows: ragged rows");
    idxs.push_back(p.index());
    data.insert(data.end(), p.val().data.begin(), p.val().data.end());
  }
  return t.push(Tensor::matrix(parts.size(), len, std::move(data)), idxs,
                [idxs, len](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.node(self).grad;
                  for (std::size_t r = 0; r < idxs.size(); ++r)
                    for (std::size_t c = 0; c < len; ++c)
                      tp.node(idxs[r]).grad.data[c] += g.at(r, c);
                });
}

// contiguous range [lo, hi) of a rank-1 value
inline Value slice(Value a, std::size_t lo, std::size_t hi) {
  if (!a.valid()) fail("slice: uninitialized value");
  detail::want_rank(a, 1, "slice");
  if (lo >= hi || hi > a.val().shape[0])
    fail("slice: range [%zu,%zu) of length-%zu vector", lo, hi, a.val().shape[0]);
  Tape& t = *a.tape();
  Tensor out({hi - lo});
  for (std::size_t i = lo; i < hi; ++i) out.data[i - lo] = a.val().data[i];
  const std::size_t ia = a.index();
  return t.push(std::move(out), {ia}, [ia, lo, hi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    for (std::size_t i = lo; i < hi; ++i)
      tp.node(ia).grad.data[i] += g.data[i - lo];
  });
}

// one row of a rank-2 value, as a vector
inline Value row(Value m, std::size_t r) {
  if (!m.valid()) fail("row: uninitialized value");
  detail::want_rank(m, 2, "row");
  const std::size_t rows = m.val().shape[0], cols = m.val().shape[1];
  if (r >= rows) fail("row: index %zu of %zu rows", r, rows);
  Tape& t = *m.tape();
  Tensor out({cols});
  for (std::size_t c = 0; c < cols; ++c) out.data[c] = m.val().at(r, c);
  const std::size_t im = m.index();
  return t.push(std::move(out), {im}, [im, r, cols](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    for (std::size_t c = 0; c < cols; ++c) tp.node(im).grad.at(r, c) += g.data[c];
  });
}

// single element of a rank-1 value, as a scalar
inline Value pick(Value a, std::size_t i) {
  if (!a.valid()) fail("pick: uninitialized value");
  detail::want_rank(a, 1, "pick");
  if (i >= a.val().shape[0]) fail("pick: index %zu of length %zu", i, a.val().shape[0]);
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  return t.push(Tensor::scalar(a.val().data[i]), {ia},
                [ia, i](Tape& tp, std::size_t self) {
                  tp.node(ia).grad.data[i] += tp.node(self).grad.data[0];
                });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Value sum(Value a) {
  if (!a.valid()) fail("sum: uninitialized value");
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.val().data) s += v;
  const std::size_t ia = a.index();
  return t.push(Tensor::scalar(s), {ia}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.node(self).grad.data[0];
    for (double& d : tp.node(ia).grad.data) d += g;
  });
}

inline Value mean(Value a) {
  if (!a.valid()) fail("mean: uninitialized value");
  if (a.val().numel() == 0) fail("mean: empty input");
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.val().data) s += v;
  const double n = static_cast<double>(a.val().numel());
  const std::size_t ia = a.index();
  return t.push(Tensor::scalar(s / n), {ia}, [ia, n](Tape& tp, std::size_t self) {
    const double g = tp.node(self).grad.data[0] / n;
    for (double& d : tp.node(ia).grad.data) d += g;
  });
}

// ---------------------------------------------------------------------------
// Network-specific primitives
// ---------------------------------------------------------------------------

// rows of `table` [V,E] gathered by id -> [T,E]
inline Value embedding(Value table, const std::vector<int>& ids) {
  if (!table.valid()) fail("embedding: uninitialized value");
  detail::want_rank(table, 2, "embedding");
  if (ids.empty()) fail("embedding: no ids");
  const std::size_t v = table.val().shape[0], e = table.val().shape[1];
  Tensor out({ids.size(), e});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
      fail("embedding: id %d out of range [0,%zu)", ids[i], v);
    for (std::size_t c = 0; c < e; ++c)
      out.at(i, c) = table.val().at(static_cast<std::size_t>(ids[i]), c);
  }
  Tape& t = *table.tape();
  const std::size_t it = table.index();
  return t.push(std::move(out), {it}, [it, ids, e](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t c = 0; c < e; ++c)
        tp.node(it).grad.at(static_cast<std::size_t>(ids[i]), c) += g.at(i, c);
  });
}

// 1-D convolution over positions with right zero-padding: the output keeps
// T positions even when T < width. x: [T,E]; w: [width*E, C] with kernel
// offset d occupying rows [d*E, (d+1)*E).
inline Value conv1d(Value x, Value w, std::size_t width) {
  Tape& t = detail::same_tape(x, w, "conv1d");
  detail::want_rank(x, 2, "conv1d");
  detail::want_rank(w, 2, "conv1d");
  if (width == 0) fail("conv1d: zero width");
  const std::size_t tlen = x.val().shape[0], e = x.val().shape[1];
  if (w.val().shape[0] != width * e)
    fail("conv1d: weight %s does not match width %zu x embed %zu",
         shape_str(w.val()).c_str(), width, e);
  const std::size_t c = w.val().shape[1];
  Tensor out({tlen, c});
  for (std::size_t p = 0; p < tlen; ++p)
    for (std::size_t d = 0; d < width && p + d < tlen; ++d)
      for (std::size_t i = 0; i < e; ++i) {
        const double xv = x.val().at(p + d, i);
        if (xv == 0.0) continue;
        for (std::size_t j = 0; j < c; ++j) out.at(p, j) += xv * w.val().at(d * e + i, j);
      }
  const std::size_t ix = x.index(), iw = w.index();
  return t.push(std::move(out), {ix, iw},
                [ix, iw, width, tlen, e, c](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.node(self).grad;
                  const Tensor& xv = tp.node(ix).value;
                  const Tensor& wv = tp.node(iw).value;
                  for (std::size_t p = 0; p < tlen; ++p)
                    for (std::size_t d = 0; d < width && p + d < tlen; ++d)
                      for (std::size_t i = 0; i < e; ++i)
                        for (std::size_t j = 0; j < c; ++j) {
                          const double gv = g.at(p, j);
                          tp.node(ix).grad.at(p + d, i) += gv * wv.at(d * e + i, j);
                          tp.node(iw).grad.at(d * e + i, j) += xv.at(p + d, i) * gv;
                        }
                });
}

// column-wise max over positions: [T,C] -> [C]; first max wins ties
inline Value max_over_time(Value x) {
  if (!x.valid()) fail("max_over_time: uninitialized value");
  detail::want_rank(x, 2, "max_over_time");
  const std::size_t tlen = x.val().shape[0], c = x.val().shape[1];
  if (tlen == 0) fail("max_over_time: no positions");
  Tensor out({c});
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    double best = x.val().at(0, j);
    for (std::size_t p = 1; p < tlen; ++p)
      if (x.val().at(p, j) > best) {
        best = x.val().at(p, j);
        arg[j] = p;
      }
    out.data[j] = best;
  }
  Tape& t = *x.tape();
  const std::size_t ix = x.index();
  return t.push(std::move(out), {ix}, [ix, arg](Tape& tp, std::size_t self) {
    const Tensor& g = tp.node(self).grad;
    for (std::size_t j = 0; j < arg.size(); ++j)
      tp.node(ix).grad.at(arg[j], j) += g.data[j];
  });
}

// -log p[idx] with a 1e-12 floor; floor hits are counted on the tape rather
// than silently producing infinities
inline Value neg_log_pick(Value p, std::size_t idx) {
  if (!p.valid()) fail("neg_log_pick: uninitialized value");
  detail::want_rank(p, 1, "neg_log_pick");
  if (idx >= p.val().shape[0])
    fail("neg_log_pick: index %zu of length %zu", idx, p.val().shape[0]);
  constexpr double kFloor = 1e-12;
  Tape& t = *p.tape();
  const double pv = p.val().data[idx];
  const bool floored = pv < kFloor;
  if (floored) ++t.log_floor_hits;
  const std::size_t ip = p.index();
  return t.push(Tensor::scalar(-std::log(floored ? kFloor : pv)), {ip},
                [ip, idx, floored](Tape& tp, std::size_t self) {
                  if (floored) return;  // constant below the floor
                  const double g = tp.node(self).grad.data[0];
                  tp.node(ip).grad.data[idx] += -g / tp.node(ip).value.data[idx];
                });
}

// fused cell: gates [i f g o] from x[I], h[H], c[H]; returns [h' ; c'] (2H)
inline Value lstm_cell(Value x, Value h, Value c, Value wx, Value wh, Value b) {
  detail::same_tape(x, h, "lstm_cell");
  detail::want_rank(h, 1, "lstm_cell");
  const std::size_t hd = h.val().shape[0];
  if (c.val().rank() != 1 || c.val().shape[0] != hd)
    fail("lstm_cell: cell state shape %s, want [%zu]", shape_str(c.val()).c_str(), hd);
  if (wx.val().rank() != 2 || wx.val().shape[1] != 4 * hd ||
      wh.val().rank() != 2 || wh.val().shape[0] != hd || wh.val().shape[1] != 4 * hd ||
      b.val().rank() != 1 || b.val().shape[0] != 4 * hd)
    fail("lstm_cell: weight shapes %s %s %s do not match hidden %zu",
         shape_str(wx.val()).c_str(), shape_str(wh.val()).c_str(),
         shape_str(b.val()).c_str(), hd);

  Value gates = add(add(vecmat(x, wx), vecmat(h, wh)), b);
  Value gi = sigmoid_v(slice(gates, 0, hd));
  Value gf = sigmoid_v(slice(gates, hd, 2 * hd));
  Value gg = tanh_v(slice(gates, 2 * hd, 3 * hd));
  Value go = sigmoid_v(slice(gates, 3 * hd, 4 * hd));
  Value c_new = add(mul(gf, c), mul(gi, gg));
  Value h_new = mul(go, tanh_v(c_new));
  return concat({h_new, c_new});
}

// fresh leaf sharing the value but cut off from the graph
inline Value detach(Tape& t, Value v) { return t.leaf(v.val()); }

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of a scalar-valued builder against central
// differences on every element of every input. `build` receives a tape and
// one leaf per input tensor and returns the scalar root.
template <typename F>
FdReport fd_check(F&& build, const std::vector<Tensor>& inputs, double eps = 1e-5) {
  auto eval = [&](const std::vector<Tensor>& ins) {
    Tape tape;
    std::vector<Value> leaves;
    leaves.reserve(ins.size());
    for (const Tensor& t : ins) leaves.push_back(tape.leaf(t));
    Value root = build(tape, leaves);
    if (root.val().numel() != 1) fail("fd_check: builder must return a scalar");
    return root.val().data[0];
  };

  Tape tape;
  std::vector<Value> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Value root = build(tape, leaves);
  tape.backward(root);

  FdReport rep;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
      std::vector<Tensor> plus = inputs, minus = inputs;
      plus[i].data[e] += eps;
      minus[i].data[e] -= eps;
      const double numeric = (eval(plus) - eval(minus)) / (2.0 * eps);
      const double analytic = leaves[i].grad().data[e];
      const double rel = std::fabs(analytic - numeric) /
                         std::max({std::fabs(analytic), std::fabs(numeric), 1.0});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_input = i;
        rep.worst_element = e;
        rep.analytic = analytic;
        rep.numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace headliner::ad
