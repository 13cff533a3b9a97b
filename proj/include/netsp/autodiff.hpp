#pragma once

// Minimal tape-based reverse-mode differentiation over dense row-major
// matrices. Only the operations the pointer model needs are provided; each
// records a closure that propagates the output gradient to its inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "netsp/error.hpp"

namespace netsp::ad {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Var {
  int id = -1;
};

template <typename T>
class Tape {
 public:
  /// With `record` false no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const Mat<T>& value(Var v) const { return nodes_[v.id].value; }
  const Mat<T>& grad(Var v) const { return nodes_[v.id].grad; }
  bool recording() const { return record_; }

  Var constant(Mat<T> value) { return push(std::move(value), false); }

  /// Differentiable leaf; its gradient is read back with grad().
  Var leaf(Mat<T> value) { return push(std::move(value), record_); }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and runs the closures in
  /// reverse creation order.
  void backward(Var root) {
    if (!record_) fail(ErrorKind::state, "backward on a non-recording tape");
    Node& r = nodes_[root.id];
    if (r.value.rows() != 1 || r.value.cols() != 1) {
      fail(ErrorKind::shape, "backward root must be a scalar");
    }
    for (auto& n : nodes_) {
      if (n.needs_grad) n.grad.setZero(n.value.rows(), n.value.cols());
    }
    r.grad.setOnes(1, 1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].needs_grad && nodes_[i].backward) nodes_[i].backward();
    }
  }

  // A * W^T for A (m x k), W (n x k).
  Var matmul_nt(Var a, Var w) {
    check(value(a).cols() == value(w).cols(), "matmul_nt inner dimension");
    Var out = push(value(a) * value(w).transpose(), any_grad({a, w}));
    on_backward(out, [this, a, w, out] {
      const Mat<T>& g = grad(out);
      if (needs(a)) gref(a).noalias() += g * value(w);
      if (needs(w)) gref(w).noalias() += g.transpose() * value(a);
    });
    return out;
  }

  Var add(Var a, Var b) {
    check(same_shape(a, b), "add shape");
    Var out = push(value(a) + value(b), any_grad({a, b}));
    on_backward(out, [this, a, b, out] {
      if (needs(a)) gref(a) += grad(out);
      if (needs(b)) gref(b) += grad(out);
    });
    return out;
  }

  // a (m x n) + row (1 x n) broadcast over rows.
  Var add_row(Var a, Var row) {
    check(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row shape");
    Var out = push(value(a).rowwise() + value(row).row(0), any_grad({a, row}));
    on_backward(out, [this, a, row, out] {
      if (needs(a)) gref(a) += grad(out);
      if (needs(row)) gref(row) += grad(out).colwise().sum();
    });
    return out;
  }

  Var mul(Var a, Var b) {
    check(same_shape(a, b), "mul shape");
    Var out = push(value(a).cwiseProduct(value(b)), any_grad({a, b}));
    on_backward(out, [this, a, b, out] {
      if (needs(a)) gref(a) += grad(out).cwiseProduct(value(b));
      if (needs(b)) gref(b) += grad(out).cwiseProduct(value(a));
    });
    return out;
  }

  Var sigmoid(Var a) {
    Mat<T> y = value(a).unaryExpr([](T x) { return T(1) / (T(1) + std::exp(-x)); });
    Var out = push(std::move(y), needs(a));
    on_backward(out, [this, a, out] {
      const Mat<T>& y = value(out);
      gref(a) += grad(out).cwiseProduct(y.cwiseProduct((T(1) - y.array()).matrix()));
    });
    return out;
  }

  Var tanh(Var a) {
    Mat<T> y = value(a).array().tanh().matrix();
    Var out = push(std::move(y), needs(a));
    on_backward(out, [this, a, out] {
      const Mat<T>& y = value(out);
      gref(a) += grad(out).cwiseProduct((T(1) - y.array().square()).matrix());
    });
    return out;
  }

  // exp with exp(-inf) = 0 and a zero gradient there.
  Var exp(Var a) {
    Mat<T> y = value(a).array().exp().matrix();
    Var out = push(std::move(y), needs(a));
    on_backward(out, [this, a, out] {
      gref(a) += grad(out).cwiseProduct(value(out));
    });
    return out;
  }

  Var scale(Var a, T s) {
    Var out = push(value(a) * s, needs(a));
    on_backward(out, [this, a, out, s] { gref(a) += grad(out) * s; });
    return out;
  }

  Var slice_cols(Var a, Eigen::Index start, Eigen::Index width) {
    check(start >= 0 && start + width <= value(a).cols(), "slice_cols range");
    Var out = push(value(a).middleCols(start, width), needs(a));
    on_backward(out, [this, a, out, start, width] {
      gref(a).middleCols(start, width) += grad(out);
    });
    return out;
  }

  // Row r of the result is row rows[r] of a.
  Var gather_rows(Var a, std::vector<int> rows) {
    Mat<T> y(static_cast<Eigen::Index>(rows.size()), value(a).cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      check(rows[r] >= 0 && rows[r] < value(a).rows(), "gather_rows index");
      y.row(static_cast<Eigen::Index>(r)) = value(a).row(rows[r]);
    }
    Var out = push(std::move(y), needs(a));
    on_backward(out, [this, a, out, rows = std::move(rows)] {
      Mat<T>& ga = gref(a);
      const Mat<T>& g = grad(out);
      for (std::size_t r = 0; r < rows.size(); ++r) ga.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    });
    return out;
  }

  // (b x d) -> (b*times x d), row b*times + i = row b.
  Var repeat_rows(Var a, Eigen::Index times) {
    const Mat<T>& x = value(a);
    Mat<T> y(x.rows() * times, x.cols());
    for (Eigen::Index b = 0; b < x.rows(); ++b) {
      y.middleRows(b * times, times).rowwise() = x.row(b);
    }
    Var out = push(std::move(y), needs(a));
    on_backward(out, [this, a, out, times] {
      Mat<T>& ga = gref(a);
      const Mat<T>& g = grad(out);
      for (Eigen::Index b = 0; b < ga.rows(); ++b) {
        ga.row(b) += g.middleRows(b * times, times).colwise().sum();
      }
    });
    return out;
  }

  // steps[t] is (b x d); row b*steps + t of the result is steps[t].row(b).
  Var interleave(const std::vector<Var>& steps) {
    check(!steps.empty(), "interleave of nothing");
    const Eigen::Index count = static_cast<Eigen::Index>(steps.size());
    const Eigen::Index b = value(steps[0]).rows();
    const Eigen::Index d = value(steps[0]).cols();
    Mat<T> y(b * count, d);
    bool g = false;
    for (Eigen::Index t = 0; t < count; ++t) {
      check(value(steps[t]).rows() == b && value(steps[t]).cols() == d, "interleave shape");
      for (Eigen::Index r = 0; r < b; ++r) y.row(r * count + t) = value(steps[t]).row(r);
      g = g || needs(steps[t]);
    }
    Var out = push(std::move(y), g);
    on_backward(out, [this, steps, out, b, count] {
      const Mat<T>& go = grad(out);
      for (Eigen::Index t = 0; t < count; ++t) {
        if (!needs(steps[t])) continue;
        Mat<T>& gs = gref(steps[t]);
        for (Eigen::Index r = 0; r < b; ++r) gs.row(r) += go.row(r * count + t);
      }
    });
    return out;
  }

  // a (m x d) times v (1 x d) -> (m x 1).
  Var row_dot(Var a, Var v) {
    check(value(v).rows() == 1 && value(v).cols() == value(a).cols(), "row_dot shape");
    Var out = push(value(a) * value(v).transpose(), any_grad({a, v}));
    on_backward(out, [this, a, v, out] {
      const Mat<T>& g = grad(out);
      if (needs(a)) gref(a).noalias() += g * value(v);
      if (needs(v)) gref(v).noalias() += g.transpose() * value(a);
    });
    return out;
  }

  Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
    check(rows * cols == value(a).size(), "reshape size");
    Mat<T> y = Eigen::Map<const Mat<T>>(value(a).data(), rows, cols);
    Var out = push(std::move(y), needs(a));
    on_backward(out, [this, a, out] {
      Mat<T>& ga = gref(a);
      ga += Eigen::Map<const Mat<T>>(grad(out).data(), ga.rows(), ga.cols());
    });
    return out;
  }

  /// Row-wise log-softmax of `logits` (b x n) over entries where
  /// `visited` is 0; visited entries become -inf and receive no gradient.
  Var masked_log_softmax(Var logits, const std::vector<char>& visited) {
    const Mat<T>& u = value(logits);
    check(static_cast<Eigen::Index>(visited.size()) == u.size(), "mask size");
    constexpr T ninf = -std::numeric_limits<T>::infinity();
    Mat<T> y(u.rows(), u.cols());
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      T hi = ninf;
      for (Eigen::Index c = 0; c < u.cols(); ++c) {
        if (!visited[r * u.cols() + c]) hi = std::max(hi, u(r, c));
      }
      if (hi == ninf) fail(ErrorKind::state, "every city is masked");
      T sum = 0;
      for (Eigen::Index c = 0; c < u.cols(); ++c) {
        if (!visited[r * u.cols() + c]) sum += std::exp(u(r, c) - hi);
      }
      const T lse = hi + std::log(sum);
      for (Eigen::Index c = 0; c < u.cols(); ++c) {
        y(r, c) = visited[r * u.cols() + c] ? ninf : u(r, c) - lse;
      }
    }
    Var out = push(std::move(y), needs(logits));
    on_backward(out, [this, logits, out, visited] {
      const Mat<T>& y = value(out);
      const Mat<T>& g = grad(out);
      Mat<T>& gu = gref(logits);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        T gsum = 0;
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
          if (!visited[r * y.cols() + c]) gsum += g(r, c);
        }
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
          if (!visited[r * y.cols() + c]) gu(r, c) += g(r, c) - std::exp(y(r, c)) * gsum;
        }
      }
    });
    return out;
  }

  // p (b x n), refs (b*n x d) -> (b x d), row b = sum_i p(b,i) refs(b*n+i).
  Var weighted_sum(Var p, Var refs) {
    const Mat<T>& w = value(p);
    const Mat<T>& r = value(refs);
    const Eigen::Index n = w.cols();
    check(r.rows() == w.rows() * n, "weighted_sum shape");
    Mat<T> y(w.rows(), r.cols());
    for (Eigen::Index b = 0; b < w.rows(); ++b) {
      y.row(b) = w.row(b) * r.middleRows(b * n, n);
    }
    Var out = push(std::move(y), any_grad({p, refs}));
    on_backward(out, [this, p, refs, out, n] {
      const Mat<T>& g = grad(out);
      for (Eigen::Index b = 0; b < g.rows(); ++b) {
        if (needs(p)) gref(p).row(b).noalias() += g.row(b) * value(refs).middleRows(b * n, n).transpose();
        if (needs(refs)) gref(refs).middleRows(b * n, n).noalias() += value(p).row(b).transpose() * g.row(b);
      }
    });
    return out;
  }

  /// Sum over rows of a(b, cols[b]); a 1x1 result.
  Var pick_sum(Var a, std::vector<int> cols) {
    const Mat<T>& x = value(a);
    check(static_cast<Eigen::Index>(cols.size()) == x.rows(), "pick_sum rows");
    Mat<T> y(1, 1);
    y(0, 0) = 0;
    for (std::size_t b = 0; b < cols.size(); ++b) y(0, 0) += x(static_cast<Eigen::Index>(b), cols[b]);
    Var out = push(std::move(y), needs(a));
    on_backward(out, [this, a, out, cols = std::move(cols)] {
      const T g = grad(out)(0, 0);
      for (std::size_t b = 0; b < cols.size(); ++b) gref(a)(static_cast<Eigen::Index>(b), cols[b]) += g;
    });
    return out;
  }

  /// 1-D convolution along the city axis with zero "same" padding.
  /// x: (b*n x channels) constant input; kernel: (d x channels*width) laid
  /// out as kernel(h, c*width + o); bias: (1 x d). Output (b*n x d), where
  /// tap o reads city i + o - width/2.
  Var conv1d(Var x, Var kernel, Var bias, Eigen::Index n, Eigen::Index width) {
    const Mat<T>& in = value(x);
    const Mat<T>& k = value(kernel);
    const Eigen::Index channels = in.cols();
    const Eigen::Index d = k.rows();
    check(k.cols() == channels * width && width % 2 == 1, "conv1d kernel shape");
    check(value(bias).rows() == 1 && value(bias).cols() == d, "conv1d bias shape");
    check(in.rows() % n == 0, "conv1d rows not a multiple of n");
    const Eigen::Index batch = in.rows() / n;
    const Eigen::Index half = width / 2;

    Mat<T> y(in.rows(), d);
    y.rowwise() = value(bias).row(0);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index o = 0; o < width; ++o) {
          const Eigen::Index src = i + o - half;
          if (src < 0 || src >= n) continue;
          for (Eigen::Index c = 0; c < channels; ++c) {
            y.row(b * n + i) += in(b * n + src, c) * k.col(c * width + o).transpose();
          }
        }
      }
    }
    Var out = push(std::move(y), any_grad({x, kernel, bias}));
    on_backward(out, [this, x, kernel, bias, out, n, width, batch, channels, half] {
      const Mat<T>& g = grad(out);
      const Mat<T>& in = value(x);
      if (needs(bias)) gref(bias) += g.colwise().sum();
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index o = 0; o < width; ++o) {
            const Eigen::Index src = i + o - half;
            if (src < 0 || src >= n) continue;
            for (Eigen::Index c = 0; c < channels; ++c) {
              if (needs(kernel)) {
                gref(kernel).col(c * width + o) += in(b * n + src, c) * g.row(b * n + i).transpose();
              }
              if (needs(x)) {
                gref(x)(b * n + src, c) += g.row(b * n + i).dot(value(kernel).col(c * width + o));
              }
            }
          }
        }
      }
    });
    return out;
  }

 private:
  struct Node {
    Mat<T> value;
    Mat<T> grad;
    std::function<void()> backward;
    bool needs_grad = false;
  };

  static void check(bool ok, const char* what) {
    if (!ok) fail(ErrorKind::shape, what);
  }

  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  bool same_shape(Var a, Var b) const {
    return value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols();
  }
  bool any_grad(std::initializer_list<Var> vs) const {
    for (Var v : vs) {
      if (needs(v)) return true;
    }
    return false;
  }
  Mat<T>& gref(Var v) { return nodes_[v.id].grad; }

  Var push(Mat<T> value, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), {}, {}, needs_grad && record_});
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  template <typename Fn>
  void on_backward(Var out, Fn&& fn) {
    if (nodes_[out.id].needs_grad) nodes_[out.id].backward = std::forward<Fn>(fn);
  }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace netsp::ad
