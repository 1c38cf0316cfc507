// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mavis {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

MapConst cmap(const Tensor& t, int64_t rows, int64_t cols) {
  return MapConst(t.data.data(), rows, cols);
}
MapMat mmap(Tensor& t, int64_t rows, int64_t cols) {
  return MapMat(t.data.data(), rows, cols);
}

void check(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.vptr = &n.value;
  n.requires_grad = requires_grad;
  if (requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  Node& stored = nodes_.back();
  stored.vptr = &stored.value;  // re-point after move
  return static_cast<Var>(nodes_.size() - 1);
}

Var Tape::leaf(const Tensor* value, Tensor* grad, bool requires_grad) {
  Node n;
  n.vptr = value;
  n.gptr = grad;
  n.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::input(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad && grad_enabled_, nullptr);
}

const Tensor& Tape::val(Var v) const { return *node(v).vptr; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

bool Tape::has_grad(Var v) const { return node(v).grad_live; }

Tensor& Tape::grad_buf(Var v) {
  Node& n = node(v);
  if (n.gptr != nullptr) {
    if (n.gptr->data.empty()) *n.gptr = Tensor(n.vptr->shape);
    n.grad_live = true;
    return *n.gptr;
  }
  if (!n.grad_live) {
    n.grad = Tensor(n.vptr->shape);
    n.grad_live = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  check(val(loss).numel() == 1, "backward: loss must be scalar");
  grad_buf(loss).data[0] = 1.0;
  for (Var i = loss; i >= 0; --i) {
    Node& n = node(i);
    if (n.requires_grad && n.grad_live && n.back) n.back(*this);
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var Tape::add(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  check(A.same_shape(B), "add: shape mismatch");
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
  bool rq = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, b, y](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      if (t.requires_grad(a)) add_scaled_inplace(t.grad_buf(a), gy, 1.0);
      if (t.requires_grad(b)) add_scaled_inplace(t.grad_buf(b), gy, 1.0);
    };
  }
  return y;
}

Var Tape::sub(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  check(A.same_shape(B), "sub: shape mismatch");
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
  bool rq = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, b, y](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      if (t.requires_grad(a)) add_scaled_inplace(t.grad_buf(a), gy, 1.0);
      if (t.requires_grad(b)) add_scaled_inplace(t.grad_buf(b), gy, -1.0);
    };
  }
  return y;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  check(A.same_shape(B), "mul: shape mismatch");
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
  bool rq = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, b, y](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& A2 = t.val(a);
      const Tensor& B2 = t.val(b);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += gy.data[i] * B2.data[i];
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += gy.data[i] * A2.data[i];
      }
    };
  }
  return y;
}

Var Tape::div(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  check(A.same_shape(B), "div: shape mismatch");
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] /= B.data[i];
  bool rq = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, b, y](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& A2 = t.val(a);
      const Tensor& B2 = t.val(b);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += gy.data[i] / B2.data[i];
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (size_t i = 0; i < gb.data.size(); ++i)
          gb.data[i] -= gy.data[i] * A2.data[i] / (B2.data[i] * B2.data[i]);
      }
    };
  }
  return y;
}

Var Tape::scale(Var a, double c) {
  Tensor out = val(a);
  for (auto& x : out.data) x *= c;
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, c](Tape& t) {
      add_scaled_inplace(t.grad_buf(a), t.grad_buf(y), c);
    };
  }
  return y;
}

Var Tape::add_const_tensor(Var a, Tensor c) {
  const Tensor& A = val(a);
  check(A.same_shape(c), "add_const_tensor: shape mismatch");
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += c.data[i];
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y](Tape& t) {
      add_scaled_inplace(t.grad_buf(a), t.grad_buf(y), 1.0);
    };
  }
  return y;
}

Var Tape::relu(Var a) {
  Tensor out = val(a);
  for (auto& x : out.data) x = x > 0.0 ? x : 0.0;
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& A2 = t.val(a);
      Tensor& ga = t.grad_buf(a);
      for (size_t i = 0; i < ga.data.size(); ++i)
        if (A2.data[i] > 0.0) ga.data[i] += gy.data[i];
    };
  }
  return y;
}

Var Tape::sqrt_eps(Var a, double eps) {
  Tensor out = val(a);
  for (auto& x : out.data) x = std::sqrt(x + eps);
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& Y = t.val(y);
      Tensor& ga = t.grad_buf(a);
      for (size_t i = 0; i < ga.data.size(); ++i)
        ga.data[i] += gy.data[i] * 0.5 / Y.data[i];
    };
  }
  return y;
}

Var Tape::logaddexp(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  check(A.same_shape(B), "logaddexp: shape mismatch");
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) {
    double x = A.data[i], z = B.data[i];
    double m = std::max(x, z);
    out.data[i] = m + std::log(std::exp(x - m) + std::exp(z - m));
  }
  bool rq = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, b, y](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& A2 = t.val(a);
      const Tensor& B2 = t.val(b);
      const Tensor& Y = t.val(y);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        for (size_t i = 0; i < ga.data.size(); ++i)
          ga.data[i] += gy.data[i] * std::exp(A2.data[i] - Y.data[i]);
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (size_t i = 0; i < gb.data.size(); ++i)
          gb.data[i] += gy.data[i] * std::exp(B2.data[i] - Y.data[i]);
      }
    };
  }
  return y;
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double x : val(a).data) s += x;
  bool rq = requires_grad(a);
  Var y = push(Tensor::scalar(s), rq, nullptr);
  if (rq) {
    node(y).back = [a, y](Tape& t) {
      double g = t.grad_buf(y).data[0];
      Tensor& ga = t.grad_buf(a);
      for (auto& x : ga.data) x += g;
    };
  }
  return y;
}

Var Tape::mean(Var a) {
  int64_t n = val(a).numel();
  double s = 0.0;
  for (double x : val(a).data) s += x;
  bool rq = requires_grad(a);
  Var y = push(Tensor::scalar(s / double(n)), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, n](Tape& t) {
      double g = t.grad_buf(y).data[0] / double(n);
      Tensor& ga = t.grad_buf(a);
      for (auto& x : ga.data) x += g;
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// shape / indexing
// ---------------------------------------------------------------------------

Var Tape::reshape(Var a, std::vector<int64_t> shape) {
  Tensor out = val(a).reshaped(shape);
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y](Tape& t) {
      add_scaled_inplace(t.grad_buf(a), t.grad_buf(y), 1.0);
    };
  }
  return y;
}

Var Tape::transpose2d(Var a) {
  const Tensor& A = val(a);
  check(A.ndim() == 2, "transpose2d: need 2-D");
  int64_t r = A.dim(0), c = A.dim(1);
  Tensor out({c, r});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out.at2(j, i) = A.at2(i, j);
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, r, c](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) ga.at2(i, j) += gy.at2(j, i);
    };
  }
  return y;
}

Var Tape::slice_row(Var a, int64_t r) { return reshape(slice_rows(a, r, r + 1), {val(a).dim(1)}); }

Var Tape::slice_rows(Var a, int64_t r0, int64_t r1) {
  const Tensor& A = val(a);
  check(A.ndim() == 2 && r0 >= 0 && r1 <= A.dim(0) && r0 < r1, "slice_rows: bad range");
  int64_t c = A.dim(1);
  Tensor out({r1 - r0, c});
  std::copy(A.data.begin() + r0 * c, A.data.begin() + r1 * c, out.data.begin());
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, r0, c](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      Tensor& ga = t.grad_buf(a);
      for (size_t i = 0; i < gy.data.size(); ++i)
        ga.data[static_cast<size_t>(r0 * c) + i] += gy.data[i];
    };
  }
  return y;
}

Var Tape::slice_cols(Var a, int64_t c0, int64_t c1) {
  const Tensor& A = val(a);
  check(A.ndim() == 2 && c0 >= 0 && c1 <= A.dim(1) && c0 < c1, "slice_cols: bad range");
  int64_t r = A.dim(0), c = A.dim(1), w = c1 - c0;
  Tensor out({r, w});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < w; ++j) out.at2(i, j) = A.at2(i, c0 + j);
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, r, c0, w, c](Tape& t) {
      (void)c;
      const Tensor& gy = t.grad_buf(y);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < w; ++j) ga.at2(i, c0 + j) += gy.at2(i, j);
    };
  }
  return y;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols: empty");
  int64_t r = val(parts[0]).dim(0);
  int64_t total = 0;
  bool rq = false;
  for (Var p : parts) {
    check(val(p).ndim() == 2 && val(p).dim(0) == r, "concat_cols: row mismatch");
    total += val(p).dim(1);
    rq = rq || requires_grad(p);
  }
  Tensor out({r, total});
  int64_t off = 0;
  for (Var p : parts) {
    const Tensor& P = val(p);
    int64_t w = P.dim(1);
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < w; ++j) out.at2(i, off + j) = P.at2(i, j);
    off += w;
  }
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    std::vector<Var> ps = parts;
    node(y).back = [ps, y, r](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      int64_t off = 0;
      for (Var p : ps) {
        int64_t w = t.val(p).dim(1);
        if (t.requires_grad(p)) {
          Tensor& gp = t.grad_buf(p);
          for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < w; ++j) gp.at2(i, j) += gy.at2(i, off + j);
        }
        off += w;
      }
    };
  }
  return y;
}

Var Tape::gather(Var v, std::vector<int64_t> idx) {
  const Tensor& V = val(v);
  check(V.ndim() == 1, "gather: need 1-D source");
  Tensor out({static_cast<int64_t>(idx.size())});
  for (size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < V.dim(0), "gather: index out of range");
    out.data[i] = V.data[static_cast<size_t>(idx[i])];
  }
  bool rq = requires_grad(v);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [v, y, idx = std::move(idx)](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      Tensor& gv = t.grad_buf(v);
      for (size_t i = 0; i < idx.size(); ++i)
        gv.data[static_cast<size_t>(idx[i])] += gy.data[i];
    };
  }
  return y;
}

Var Tape::shift_right(Var a, int64_t k, double fill) {
  const Tensor& A = val(a);
  check(A.ndim() == 1, "shift_right: need 1-D");
  int64_t n = A.dim(0);
  Tensor out({n});
  for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] = i >= k ? A.at(i - k) : fill;
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, k, n](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = k; i < n; ++i) ga.at(i - k) += gy.at(i);
    };
  }
  return y;
}

Var Tape::rows_gather(Var table, std::vector<int64_t> ids) {
  const Tensor& T0 = val(table);
  check(T0.ndim() == 2, "rows_gather: need 2-D table");
  int64_t d = T0.dim(1);
  int64_t n = static_cast<int64_t>(ids.size());
  Tensor out({n, d});
  for (int64_t i = 0; i < n; ++i) {
    check(ids[static_cast<size_t>(i)] >= 0 && ids[static_cast<size_t>(i)] < T0.dim(0),
          "rows_gather: id out of range");
    for (int64_t j = 0; j < d; ++j) out.at2(i, j) = T0.at2(ids[static_cast<size_t>(i)], j);
  }
  bool rq = requires_grad(table);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [table, y, ids = std::move(ids), d](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      Tensor& gt = t.grad_buf(table);
      for (size_t i = 0; i < ids.size(); ++i)
        for (int64_t j = 0; j < d; ++j)
          gt.at2(ids[i], j) += gy.at2(static_cast<int64_t>(i), j);
    };
  }
  return y;
}

Var Tape::pick_rows(Var a, std::vector<int64_t> idx) {
  const Tensor& A = val(a);
  check(A.ndim() == 2 && static_cast<int64_t>(idx.size()) == A.dim(0), "pick_rows: bad index");
  int64_t r = A.dim(0);
  Tensor out({r});
  for (int64_t i = 0; i < r; ++i) {
    check(idx[static_cast<size_t>(i)] >= 0 && idx[static_cast<size_t>(i)] < A.dim(1),
          "pick_rows: col out of range");
    out.at(i) = A.at2(i, idx[static_cast<size_t>(i)]);
  }
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, idx = std::move(idx)](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      Tensor& ga = t.grad_buf(a);
      for (size_t i = 0; i < idx.size(); ++i)
        ga.at2(static_cast<int64_t>(i), idx[i]) += gy.at(static_cast<int64_t>(i));
    };
  }
  return y;
}

Var Tape::mask_rows_replace(Var x, std::vector<int64_t> indices, Var m) {
  const Tensor& X = val(x);
  const Tensor& M = val(m);
  check(X.ndim() == 2 && M.ndim() == 1 && M.dim(0) == X.dim(1), "mask_rows_replace: shapes");
  Tensor out = X;
  int64_t d = X.dim(1);
  for (int64_t r : indices) {
    check(r >= 0 && r < X.dim(0), "mask_rows_replace: row out of range");
    for (int64_t j = 0; j < d; ++j) out.at2(r, j) = M.at(j);
  }
  bool rq = requires_grad(x) || requires_grad(m);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [x, m, y, indices = std::move(indices), d](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      std::vector<bool> masked(static_cast<size_t>(t.val(x).dim(0)), false);
      for (int64_t r : indices) masked[static_cast<size_t>(r)] = true;
      if (t.requires_grad(x)) {
        Tensor& gx = t.grad_buf(x);
        for (int64_t r = 0; r < t.val(x).dim(0); ++r)
          if (!masked[static_cast<size_t>(r)])
            for (int64_t j = 0; j < d; ++j) gx.at2(r, j) += gy.at2(r, j);
      }
      if (t.requires_grad(m)) {
        Tensor& gm = t.grad_buf(m);
        for (int64_t r : indices)
          for (int64_t j = 0; j < d; ++j) gm.at(j) += gy.at2(r, j);
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  check(A.ndim() == 2 && B.ndim() == 2 && A.dim(1) == B.dim(0), "matmul: shape mismatch");
  int64_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out({m, n});
  mmap(out, m, n).noalias() = cmap(A, m, k) * cmap(B, k, n);
  bool rq = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, b, y, m, k, n](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        mmap(ga, m, k).noalias() += cmap(gy, m, n) * cmap(t.val(b), k, n).transpose();
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        mmap(gb, k, n).noalias() += cmap(t.val(a), m, k).transpose() * cmap(gy, m, n);
      }
    };
  }
  return y;
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  check(A.ndim() == 2 && B.ndim() == 2 && A.dim(1) == B.dim(1), "matmul_nt: shape mismatch");
  int64_t m = A.dim(0), k = A.dim(1), n = B.dim(0);
  Tensor out({m, n});
  mmap(out, m, n).noalias() = cmap(A, m, k) * cmap(B, n, k).transpose();
  bool rq = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, b, y, m, k, n](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        mmap(ga, m, k).noalias() += cmap(gy, m, n) * cmap(t.val(b), n, k);
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        mmap(gb, n, k).noalias() += cmap(gy, m, n).transpose() * cmap(t.val(a), m, k);
      }
    };
  }
  return y;
}

Var Tape::add_bias_rows(Var x, Var b) {
  const Tensor& X = val(x);
  const Tensor& B = val(b);
  check(X.ndim() == 2 && B.ndim() == 1 && B.dim(0) == X.dim(1), "add_bias_rows: shapes");
  int64_t r = X.dim(0), c = X.dim(1);
  Tensor out = X;
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out.at2(i, j) += B.at(j);
  bool rq = requires_grad(x) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [x, b, y, r, c](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      if (t.requires_grad(x)) add_scaled_inplace(t.grad_buf(x), gy, 1.0);
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < c; ++j) gb.at(j) += gy.at2(i, j);
      }
    };
  }
  return y;
}

Var Tape::linear(Var x, Var w, Var b) {
  Var y = matmul(x, w);
  if (b != kNoVar) y = add_bias_rows(y, b);
  return y;
}

Var Tape::rowwise_dot(Var a, Var b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  check(A.same_shape(B) && A.ndim() == 2, "rowwise_dot: shapes");
  int64_t r = A.dim(0), c = A.dim(1);
  Tensor out({r});
  for (int64_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < c; ++j) s += A.at2(i, j) * B.at2(i, j);
    out.at(i) = s;
  }
  bool rq = requires_grad(a) || requires_grad(b);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, b, y, r, c](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& A2 = t.val(a);
      const Tensor& B2 = t.val(b);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < c; ++j) ga.at2(i, j) += gy.at(i) * B2.at2(i, j);
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < c; ++j) gb.at2(i, j) += gy.at(i) * A2.at2(i, j);
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// row-wise softmax
// ---------------------------------------------------------------------------

Var Tape::softmax_rows(Var a) {
  const Tensor& A = val(a);
  check(A.ndim() == 2, "softmax_rows: need 2-D");
  int64_t r = A.dim(0), c = A.dim(1);
  Tensor out({r, c});
  for (int64_t i = 0; i < r; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < c; ++j) m = std::max(m, A.at2(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += std::exp(A.at2(i, j) - m);
    for (int64_t j = 0; j < c; ++j) out.at2(i, j) = std::exp(A.at2(i, j) - m) / z;
  }
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, r, c](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& Y = t.val(y);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < c; ++j) dot += gy.at2(i, j) * Y.at2(i, j);
        for (int64_t j = 0; j < c; ++j)
          ga.at2(i, j) += Y.at2(i, j) * (gy.at2(i, j) - dot);
      }
    };
  }
  return y;
}

Var Tape::log_softmax_rows(Var a) {
  const Tensor& A = val(a);
  check(A.ndim() == 2, "log_softmax_rows: need 2-D");
  int64_t r = A.dim(0), c = A.dim(1);
  Tensor out({r, c});
  for (int64_t i = 0; i < r; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < c; ++j) m = std::max(m, A.at2(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += std::exp(A.at2(i, j) - m);
    double lse = m + std::log(z);
    for (int64_t j = 0; j < c; ++j) out.at2(i, j) = A.at2(i, j) - lse;
  }
  bool rq = requires_grad(a);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [a, y, r, c](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& Y = t.val(y);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < r; ++i) {
        double gsum = 0.0;
        for (int64_t j = 0; j < c; ++j) gsum += gy.at2(i, j);
        for (int64_t j = 0; j < c; ++j)
          ga.at2(i, j) += gy.at2(i, j) - std::exp(Y.at2(i, j)) * gsum;
      }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

namespace {

// Shared kernel: normalizes `group` contiguous elements starting at base,
// with an affine parameter indexed by an element->channel function.
struct NormStats {
  double mu, sigma;
};

NormStats norm_group_stats(const double* x, int64_t n, double eps) {
  double mu = 0.0;
  for (int64_t i = 0; i < n; ++i) mu += x[i];
  mu /= double(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = x[i] - mu;
    var += d * d;
  }
  var /= double(n);
  return {mu, std::sqrt(var + eps)};
}

}  // namespace

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& X = val(x);
  check(X.ndim() == 2, "layer_norm: need 2-D");
  int64_t r = X.dim(0), d = X.dim(1);
  check(val(gamma).numel() == d && val(beta).numel() == d, "layer_norm: affine dims");
  Tensor out({r, d});
  std::vector<double> sig(static_cast<size_t>(r));
  const Tensor& G = val(gamma);
  const Tensor& B = val(beta);
  for (int64_t i = 0; i < r; ++i) {
    NormStats st = norm_group_stats(&X.data[static_cast<size_t>(i * d)], d, eps);
    sig[static_cast<size_t>(i)] = st.sigma;
    for (int64_t j = 0; j < d; ++j) {
      double xh = (X.at2(i, j) - st.mu) / st.sigma;
      out.at2(i, j) = xh * G.at(j) + B.at(j);
    }
  }
  bool rq = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [x, gamma, beta, y, r, d, sig = std::move(sig)](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& X2 = t.val(x);
      const Tensor& G2 = t.val(gamma);
      for (int64_t i = 0; i < r; ++i) {
        double s = sig[static_cast<size_t>(i)];
        // Reconstruct xhat from output: xhat = (y - beta)/gamma is unstable if
        // gamma ~ 0, so recompute from x.
        double mu = 0.0;
        for (int64_t j = 0; j < d; ++j) mu += X2.at2(i, j);
        mu /= double(d);
        double gdot = 0.0, gxdot = 0.0;
        for (int64_t j = 0; j < d; ++j) {
          double xh = (X2.at2(i, j) - mu) / s;
          double g = gy.at2(i, j) * G2.at(j);
          gdot += g;
          gxdot += g * xh;
        }
        if (t.requires_grad(x)) {
          Tensor& gx = t.grad_buf(x);
          for (int64_t j = 0; j < d; ++j) {
            double xh = (X2.at2(i, j) - mu) / s;
            double g = gy.at2(i, j) * G2.at(j);
            gx.at2(i, j) += (g - gdot / double(d) - xh * gxdot / double(d)) / s;
          }
        }
        if (t.requires_grad(gamma)) {
          Tensor& gg = t.grad_buf(gamma);
          for (int64_t j = 0; j < d; ++j) {
            double xh = (X2.at2(i, j) - mu) / s;
            gg.at(j) += gy.at2(i, j) * xh;
          }
        }
        if (t.requires_grad(beta)) {
          Tensor& gb = t.grad_buf(beta);
          for (int64_t j = 0; j < d; ++j) gb.at(j) += gy.at2(i, j);
        }
      }
    };
  }
  return y;
}

namespace {

// Group-norm core over arbitrary (frame count, channels, spatial) layout.
// frames index the leading dim; each frame is normalized over C*S elements.
void group_norm_forward(const Tensor& X, const Tensor& G, const Tensor& B, int64_t frames,
                        int64_t C, int64_t S, double eps, Tensor& out,
                        std::vector<double>& sig, std::vector<double>& mus) {
  int64_t n = C * S;
  for (int64_t f = 0; f < frames; ++f) {
    const double* xp = &X.data[static_cast<size_t>(f * n)];
    NormStats st = norm_group_stats(xp, n, eps);
    sig[static_cast<size_t>(f)] = st.sigma;
    mus[static_cast<size_t>(f)] = st.mu;
    double* op = &out.data[static_cast<size_t>(f * n)];
    for (int64_t c = 0; c < C; ++c) {
      double g = G.at(c), b = B.at(c);
      for (int64_t s = 0; s < S; ++s) {
        int64_t i = c * S + s;
        op[i] = (xp[i] - st.mu) / st.sigma * g + b;
      }
    }
  }
}

}  // namespace

static Var group_norm_impl(Tape& t, Var x, Var gamma, Var beta, double eps, int64_t frames,
                           int64_t C, int64_t S);

Var Tape::group_norm_frames(Var x, Var gamma, Var beta, double eps) {
  const Tensor& X = val(x);
  check(X.ndim() == 4, "group_norm_frames: need [T,C,H,W]");
  return group_norm_impl(*this, x, gamma, beta, eps, X.dim(0), X.dim(1), X.dim(2) * X.dim(3));
}

Var Tape::group_norm_seq(Var x, Var gamma, Var beta, double eps) {
  const Tensor& X = val(x);
  check(X.ndim() == 2, "group_norm_seq: need [C,L]");
  return group_norm_impl(*this, x, gamma, beta, eps, 1, X.dim(0), X.dim(1));
}

static Var group_norm_impl(Tape& t, Var x, Var gamma, Var beta, double eps, int64_t frames,
                           int64_t C, int64_t S) {
  const Tensor& X = t.val(x);
  const Tensor& G = t.val(gamma);
  const Tensor& B = t.val(beta);
  Tensor out(X.shape);
  std::vector<double> sig(static_cast<size_t>(frames)), mus(static_cast<size_t>(frames));
  group_norm_forward(X, G, B, frames, C, S, eps, out, sig, mus);

  struct Closure {
    Var x, gamma, beta, y;
    int64_t frames, C, S;
    std::vector<double> sig, mus;
    void operator()(Tape& t) const {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& X2 = t.val(x);
      const Tensor& G2 = t.val(gamma);
      int64_t n = C * S;
      for (int64_t f = 0; f < frames; ++f) {
        double s = sig[static_cast<size_t>(f)];
        double mu = mus[static_cast<size_t>(f)];
        const double* xp = &X2.data[static_cast<size_t>(f * n)];
        const double* gp = &gy.data[static_cast<size_t>(f * n)];
        double gdot = 0.0, gxdot = 0.0;
        for (int64_t c = 0; c < C; ++c) {
          double gain = G2.at(c);
          for (int64_t sp = 0; sp < S; ++sp) {
            int64_t i = c * S + sp;
            double xh = (xp[i] - mu) / s;
            double g = gp[i] * gain;
            gdot += g;
            gxdot += g * xh;
          }
        }
        if (t.requires_grad(x)) {
          Tensor& gx = t.grad_buf(x);
          double* gxp = &gx.data[static_cast<size_t>(f * n)];
          for (int64_t c = 0; c < C; ++c) {
            double gain = G2.at(c);
            for (int64_t sp = 0; sp < S; ++sp) {
              int64_t i = c * S + sp;
              double xh = (xp[i] - mu) / s;
              double g = gp[i] * gain;
              gxp[i] += (g - gdot / double(n) - xh * gxdot / double(n)) / s;
            }
          }
        }
        if (t.requires_grad(gamma)) {
          Tensor& gg = t.grad_buf(gamma);
          for (int64_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int64_t sp = 0; sp < S; ++sp) {
              int64_t i = c * S + sp;
              acc += gp[i] * (xp[i] - mu) / s;
            }
            gg.at(c) += acc;
          }
        }
        if (t.requires_grad(beta)) {
          Tensor& gb = t.grad_buf(beta);
          for (int64_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int64_t sp = 0; sp < S; ++sp) acc += gp[c * S + sp];
            gb.at(c) += acc;
          }
        }
      }
    }
  };

  bool rq = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
  Var y = t.input(std::move(out), rq);
  if (rq) {
    t.set_back_(y, Closure{x, gamma, beta, y, frames, C, S, std::move(sig), std::move(mus)});
  }
  return y;
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

namespace {

// im2col for one output frame of a (possibly temporal) convolution.
// dst has rows Ho*Wo and cols Cin*kt*kh*kw.
void im2col_frame(const Tensor& X, int64_t t_out, int64_t Cin, int64_t H, int64_t W, int64_t kt,
                  int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t pad_t, int64_t Ho,
                  int64_t Wo, double* dst) {
  int64_t T = X.dim(0);
  int64_t K = Cin * kt * kh * kw;
  for (int64_t oy = 0; oy < Ho; ++oy) {
    for (int64_t ox = 0; ox < Wo; ++ox) {
      double* row = dst + (oy * Wo + ox) * K;
      int64_t col = 0;
      for (int64_t c = 0; c < Cin; ++c) {
        for (int64_t dt = 0; dt < kt; ++dt) {
          int64_t tf = t_out + dt - pad_t;
          bool tok = tf >= 0 && tf < T;
          for (int64_t dy = 0; dy < kh; ++dy) {
            int64_t sy = oy * stride + dy - pad;
            bool yok = sy >= 0 && sy < H;
            for (int64_t dx = 0; dx < kw; ++dx) {
              int64_t sx = ox * stride + dx - pad;
              if (tok && yok && sx >= 0 && sx < W) {
                row[col] = X.data[static_cast<size_t>(((tf * Cin + c) * H + sy) * W + sx)];
              } else {
                row[col] = 0.0;
              }
              ++col;
            }
          }
        }
      }
    }
  }
}

// Scatter-add of column gradients back into the input gradient.
void col2im_frame(Tensor& gx, int64_t t_out, int64_t Cin, int64_t H, int64_t W, int64_t kt,
                  int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t pad_t, int64_t Ho,
                  int64_t Wo, const double* cols) {
  int64_t T = gx.dim(0);
  int64_t K = Cin * kt * kh * kw;
  for (int64_t oy = 0; oy < Ho; ++oy) {
    for (int64_t ox = 0; ox < Wo; ++ox) {
      const double* row = cols + (oy * Wo + ox) * K;
      int64_t col = 0;
      for (int64_t c = 0; c < Cin; ++c) {
        for (int64_t dt = 0; dt < kt; ++dt) {
          int64_t tf = t_out + dt - pad_t;
          bool tok = tf >= 0 && tf < T;
          for (int64_t dy = 0; dy < kh; ++dy) {
            int64_t sy = oy * stride + dy - pad;
            bool yok = sy >= 0 && sy < H;
            for (int64_t dx = 0; dx < kw; ++dx) {
              int64_t sx = ox * stride + dx - pad;
              if (tok && yok && sx >= 0 && sx < W) {
                gx.data[static_cast<size_t>(((tf * Cin + c) * H + sy) * W + sx)] += row[col];
              }
              ++col;
            }
          }
        }
      }
    }
  }
}

}  // namespace

// Generic conv core shared by the 3-D stem and per-frame 2-D convolutions.
// w: [Cout, Cin, kt, kh, kw] flattened as [Cout, K].
static Var conv_impl(Tape& t, Var x, Var w, Var b, int64_t kt, int64_t stride, int64_t pad,
                     int64_t pad_t) {
  const Tensor& X = t.val(x);
  const Tensor& W0 = t.val(w);
  int64_t T = X.dim(0), Cin = X.dim(1), H = X.dim(2), Wd = X.dim(3);
  int64_t Cout = W0.dim(0);
  int64_t kh = W0.dim(W0.ndim() - 2), kw = W0.dim(W0.ndim() - 1);
  int64_t K = Cin * kt * kh * kw;
  check(Tensor::numel_of(W0.shape) == Cout * K, "conv: weight shape mismatch");
  int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  int64_t Wo = (Wd + 2 * pad - kw) / stride + 1;
  check(Ho >= 1 && Wo >= 1, "conv: output would be empty");

  Tensor out({T, Cout, Ho, Wo});
  std::vector<double> patches(static_cast<size_t>(Ho * Wo * K));
  for (int64_t f = 0; f < T; ++f) {
    im2col_frame(X, f, Cin, H, Wd, kt, kh, kw, stride, pad, pad_t, Ho, Wo, patches.data());
    MapConst pm(patches.data(), Ho * Wo, K);
    MapConst wm(W0.data.data(), Cout, K);
    MapMat om(&out.data[static_cast<size_t>(f * Cout * Ho * Wo)], Cout, Ho * Wo);
    om.noalias() = wm * pm.transpose();
  }
  if (b != kNoVar) {
    const Tensor& B = t.val(b);
    for (int64_t f = 0; f < T; ++f)
      for (int64_t c = 0; c < Cout; ++c) {
        double bv = B.at(c);
        double* base = &out.data[static_cast<size_t>(((f * Cout) + c) * Ho * Wo)];
        for (int64_t i = 0; i < Ho * Wo; ++i) base[i] += bv;
      }
  }

  bool rq = t.requires_grad(x) || t.requires_grad(w) || (b != kNoVar && t.requires_grad(b));
  Var y = t.input(std::move(out), rq);
  if (rq) {
    struct Closure {
      Var x, w, b, y;
      int64_t kt, stride, pad, pad_t;
      void operator()(Tape& t) const {
        const Tensor& gy = t.grad_buf(y);
        const Tensor& X2 = t.val(x);
        const Tensor& W2 = t.val(w);
        int64_t T = X2.dim(0), Cin = X2.dim(1), H = X2.dim(2), Wd = X2.dim(3);
        int64_t Cout = W2.dim(0);
        int64_t kh = W2.dim(W2.ndim() - 2), kw = W2.dim(W2.ndim() - 1);
        int64_t K = Cin * kt * kh * kw;
        int64_t Ho = gy.dim(2), Wo = gy.dim(3);
        std::vector<double> patches(static_cast<size_t>(Ho * Wo * K));
        std::vector<double> dcols(static_cast<size_t>(Ho * Wo * K));
        bool need_w = t.requires_grad(w);
        bool need_x = t.requires_grad(x);
        bool need_b = b != kNoVar && t.requires_grad(b);
        for (int64_t f = 0; f < T; ++f) {
          MapConst gym(&gy.data[static_cast<size_t>(f * Cout * Ho * Wo)], Cout, Ho * Wo);
          if (need_w) {
            im2col_frame(X2, f, Cin, H, Wd, kt, kh, kw, stride, pad, pad_t, Ho, Wo,
                         patches.data());
            MapConst pm(patches.data(), Ho * Wo, K);
            Tensor& gw = t.grad_buf(w);
            MapMat gwm(gw.data.data(), Cout, K);
            gwm.noalias() += gym * pm;
          }
          if (need_x) {
            MapConst wm(W2.data.data(), Cout, K);
            MapMat dcm(dcols.data(), Ho * Wo, K);
            dcm.noalias() = gym.transpose() * wm;
            col2im_frame(t.grad_buf(x), f, Cin, H, Wd, kt, kh, kw, stride, pad, pad_t, Ho, Wo,
                         dcols.data());
          }
          if (need_b) {
            Tensor& gb = t.grad_buf(b);
            for (int64_t c = 0; c < Cout; ++c) {
              const double* base = &gy.data[static_cast<size_t>(((f * Cout) + c) * Ho * Wo)];
              double acc = 0.0;
              for (int64_t i = 0; i < Ho * Wo; ++i) acc += base[i];
              gb.at(c) += acc;
            }
          }
        }
      }
    };
    t.set_back_(y, Closure{x, w, b, y, kt, stride, pad, pad_t});
  }
  return y;
}

Var Tape::conv3d_stem(Var x, Var w, Var b, int64_t stride_hw, int64_t pad_hw) {
  const Tensor& W0 = val(w);
  check(W0.ndim() == 5, "conv3d_stem: weight must be 5-D");
  int64_t kt = W0.dim(2);
  return conv_impl(*this, x, w, b, kt, stride_hw, pad_hw, kt / 2);
}

Var Tape::conv2d_frames(Var x, Var w, Var b, int64_t stride, int64_t pad) {
  const Tensor& W0 = val(w);
  check(W0.ndim() == 4, "conv2d_frames: weight must be 4-D");
  return conv_impl(*this, x, w, b, 1, stride, pad, 0);
}

Var Tape::conv1d(Var x, Var w, Var b, int64_t stride, int64_t pad) {
  const Tensor& X = val(x);
  const Tensor& W0 = val(w);
  check(X.ndim() == 2 && W0.ndim() == 3, "conv1d: shapes");
  int64_t Cin = X.dim(0), L = X.dim(1);
  int64_t Cout = W0.dim(0), k = W0.dim(2);
  int64_t Lo = (L + 2 * pad - k) / stride + 1;
  check(Lo >= 1, "conv1d: output would be empty");
  int64_t K = Cin * k;
  Tensor out({Cout, Lo});
  std::vector<double> patches(static_cast<size_t>(Lo * K));
  for (int64_t o = 0; o < Lo; ++o) {
    double* row = &patches[static_cast<size_t>(o * K)];
    int64_t col = 0;
    for (int64_t c = 0; c < Cin; ++c)
      for (int64_t dk = 0; dk < k; ++dk) {
        int64_t s = o * stride + dk - pad;
        row[col++] = (s >= 0 && s < L) ? X.at2(c, s) : 0.0;
      }
  }
  {
    MapConst pm(patches.data(), Lo, K);
    MapConst wm(W0.data.data(), Cout, K);
    mmap(out, Cout, Lo).noalias() = wm * pm.transpose();
  }
  if (b != kNoVar) {
    const Tensor& B = val(b);
    for (int64_t c = 0; c < Cout; ++c)
      for (int64_t o = 0; o < Lo; ++o) out.at2(c, o) += B.at(c);
  }
  bool rq = requires_grad(x) || requires_grad(w) || (b != kNoVar && requires_grad(b));
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [x, w, b, y, Cin, L, Cout, k, stride, pad, Lo, K](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      const Tensor& X2 = t.val(x);
      const Tensor& W2 = t.val(w);
      if (t.requires_grad(w)) {
        std::vector<double> patches(static_cast<size_t>(Lo * K));
        for (int64_t o = 0; o < Lo; ++o) {
          double* row = &patches[static_cast<size_t>(o * K)];
          int64_t col = 0;
          for (int64_t c = 0; c < Cin; ++c)
            for (int64_t dk = 0; dk < k; ++dk) {
              int64_t s = o * stride + dk - pad;
              row[col++] = (s >= 0 && s < L) ? X2.at2(c, s) : 0.0;
            }
        }
        Tensor& gw = t.grad_buf(w);
        MapConst pm(patches.data(), Lo, K);
        MapConst gym(gy.data.data(), Cout, Lo);
        MapMat gwm(gw.data.data(), Cout, K);
        gwm.noalias() += gym * pm;
      }
      if (t.requires_grad(x)) {
        std::vector<double> dcols(static_cast<size_t>(Lo * K));
        MapConst wm(W2.data.data(), Cout, K);
        MapConst gym(gy.data.data(), Cout, Lo);
        MapMat dcm(dcols.data(), Lo, K);
        dcm.noalias() = gym.transpose() * wm;
        Tensor& gx = t.grad_buf(x);
        for (int64_t o = 0; o < Lo; ++o) {
          const double* row = &dcols[static_cast<size_t>(o * K)];
          int64_t col = 0;
          for (int64_t c = 0; c < Cin; ++c)
            for (int64_t dk = 0; dk < k; ++dk) {
              int64_t s = o * stride + dk - pad;
              if (s >= 0 && s < L) gx.at2(c, s) += row[col];
              ++col;
            }
        }
      }
      if (b != kNoVar && t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (int64_t c = 0; c < Cout; ++c) {
          double acc = 0.0;
          for (int64_t o = 0; o < Lo; ++o) acc += gy.at2(c, o);
          gb.at(c) += acc;
        }
      }
    };
  }
  return y;
}

Var Tape::maxpool2d_frames(Var x, int64_t k, int64_t stride, int64_t pad) {
  const Tensor& X = val(x);
  check(X.ndim() == 4, "maxpool2d_frames: need [T,C,H,W]");
  int64_t T = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  int64_t Ho = (H + 2 * pad - k) / stride + 1;
  int64_t Wo = (W + 2 * pad - k) / stride + 1;
  Tensor out({T, C, Ho, Wo});
  std::vector<int64_t> arg(static_cast<size_t>(T * C * Ho * Wo));
  int64_t oi = 0;
  for (int64_t f = 0; f < T; ++f)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t bi = -1;
          for (int64_t dy = 0; dy < k; ++dy)
            for (int64_t dx = 0; dx < k; ++dx) {
              int64_t sy = oy * stride + dy - pad;
              int64_t sx = ox * stride + dx - pad;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              int64_t idx = ((f * C + c) * H + sy) * W + sx;
              double v = X.data[static_cast<size_t>(idx)];
              if (v > best) {
                best = v;
                bi = idx;
              }
            }
          out.data[static_cast<size_t>(oi)] = best;
          arg[static_cast<size_t>(oi)] = bi;
          ++oi;
        }
  bool rq = requires_grad(x);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [x, y, arg = std::move(arg)](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      Tensor& gx = t.grad_buf(x);
      for (size_t i = 0; i < arg.size(); ++i)
        if (arg[i] >= 0) gx.data[static_cast<size_t>(arg[i])] += gy.data[i];
    };
  }
  return y;
}

Var Tape::global_avgpool(Var x) {
  const Tensor& X = val(x);
  check(X.ndim() == 4, "global_avgpool: need [T,C,H,W]");
  int64_t T = X.dim(0), C = X.dim(1), S = X.dim(2) * X.dim(3);
  Tensor out({T, C});
  for (int64_t f = 0; f < T; ++f)
    for (int64_t c = 0; c < C; ++c) {
      const double* base = &X.data[static_cast<size_t>((f * C + c) * S)];
      double acc = 0.0;
      for (int64_t i = 0; i < S; ++i) acc += base[i];
      out.at2(f, c) = acc / double(S);
    }
  bool rq = requires_grad(x);
  Var y = push(std::move(out), rq, nullptr);
  if (rq) {
    node(y).back = [x, y, T, C, S](Tape& t) {
      const Tensor& gy = t.grad_buf(y);
      Tensor& gx = t.grad_buf(x);
      for (int64_t f = 0; f < T; ++f)
        for (int64_t c = 0; c < C; ++c) {
          double g = gy.at2(f, c) / double(S);
          double* base = &gx.data[static_cast<size_t>((f * C + c) * S)];
          for (int64_t i = 0; i < S; ++i) base[i] += g;
        }
    };
  }
  return y;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

GradCheckResult grad_check(const std::function<double()>& loss_fn,
                           const std::vector<Tensor*>& params,
                           const std::vector<const Tensor*>& analytic_grads, double rel_tol,
                           double fd_eps) {
  GradCheckResult res;
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p];
    const Tensor& ag = *analytic_grads[p];
    for (size_t i = 0; i < theta.data.size(); ++i) {
      double old = theta.data[i];
      double eps = fd_eps * std::max(1.0, std::fabs(old));
      theta.data[i] = old + eps;
      double fp = loss_fn();
      theta.data[i] = old - eps;
      double fm = loss_fn();
      theta.data[i] = old;
      double fd = (fp - fm) / (2.0 * eps);
      double a = ag.data[i];
      double rel = std::fabs(a - fd) / std::max(1e-8, std::fabs(a) + std::fabs(fd));
      res.total += 1;
      if (rel <= rel_tol) res.within += 1;
      res.worst = std::max(res.worst, rel);
    }
  }
  return res;
}

}  // namespace mavis
