#pragma once

// Differentiable operations recorded on a Graph.

#include <cmath>
#include <memory>
#include <string>

#include "lite/autodiff.hpp"
#include "lite/kernels.hpp"

namespace lite::ops {

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> b, std::size_t stride, std::size_t padding) {
  auto& g = x.graph();
  auto cache = std::make_shared<kernels::Conv1dCache<T>>();
  auto y = kernels::conv1d_forward(x.value(), w.value(), b.value(), stride, padding,
                                   g.recording() ? cache.get() : nullptr);
  const int wid = w.id();
  return g.op(std::move(y), {x, w, b},
              [&g, wid, stride, padding, cache](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                kernels::conv1d_backward(dy, g.value(wid), stride, padding, *cache, d[0], d[1],
                                         d[2]);
              });
}

template <typename T>
Var<T> conv_transpose1d(Var<T> x, Var<T> w, Var<T> b, std::size_t stride,
                        std::size_t padding, std::size_t output_padding) {
  auto& g = x.graph();
  auto cache = std::make_shared<kernels::ConvTranspose1dCache<T>>();
  auto y = kernels::conv_transpose1d_forward(x.value(), w.value(), b.value(), stride, padding,
                                             output_padding,
                                             g.recording() ? cache.get() : nullptr);
  const int wid = w.id();
  const std::size_t in_len = x.value().dim(2);
  return g.op(std::move(y), {x, w, b},
              [&g, wid, stride, padding, in_len, cache](const Tensor<T>& dy,
                                                        std::span<Tensor<T>*> d) {
                kernels::conv_transpose1d_backward(dy, g.value(wid), stride, padding, in_len,
                                                   *cache, d[0], d[1], d[2]);
              });
}

template <typename T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b) {
  auto& g = x.graph();
  auto y = kernels::dense_forward(x.value(), w.value(), b.value());
  const int xid = x.id(), wid = w.id();
  return g.op(std::move(y), {x, w, b},
              [&g, xid, wid](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                kernels::dense_backward(dy, g.value(xid), g.value(wid), d[0], d[1], d[2]);
              });
}

template <typename T>
Var<T> lstm_direction(Var<T> x, Var<T> wx, Var<T> wh, Var<T> bx, Var<T> bh, bool reverse) {
  auto& g = x.graph();
  auto cache = std::make_shared<kernels::LstmCache<T>>();
  auto y = kernels::lstm_direction_forward(x.value(), wx.value(), wh.value(), bx.value(),
                                           bh.value(), reverse,
                                           g.recording() ? cache.get() : nullptr);
  const int xid = x.id(), wxid = wx.id(), whid = wh.id();
  return g.op(std::move(y), {x, wx, wh, bx, bh},
              [&g, xid, wxid, whid, reverse, cache](const Tensor<T>& dy,
                                                    std::span<Tensor<T>*> d) {
                kernels::lstm_direction_backward(dy, g.value(xid), g.value(wxid),
                                                 g.value(whid), reverse, *cache, d[0], d[1],
                                                 d[2], d[3], d[4]);
              });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tensor<T> y = x.value();
  for (auto& v : y.data()) v = v > T{0} ? v : T{0};
  auto& g = x.graph();
  const int xid = x.id();
  return g.op(std::move(y), {x}, [&g, xid](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
    const auto& xv = g.value(xid);
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (xv[i] > T{0}) (*d[0])[i] += dy[i];
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> y = x.value();
  for (auto& v : y.data()) v = kernels::sigmoid(v);
  auto out = std::make_shared<Tensor<T>>(y);
  auto& g = x.graph();
  return g.op(std::move(y), {x}, [out](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const T s = (*out)[i];
      (*d[0])[i] += dy[i] * s * (T{1} - s);
    }
  });
}

// [B, C, L] -> [B, C], mean over the last axis. Rank-2 input passes through.
template <typename T>
Var<T> mean_last_axis(Var<T> x) {
  const auto& xv = x.value();
  if (xv.rank() == 2) return x;
  kernels::check_rank(xv.shape(), 3, "mean_last_axis");
  const std::size_t B = xv.dim(0), C = xv.dim(1), L = xv.dim(2);
  Tensor<T> y({B, C});
  for (std::size_t i = 0; i < B * C; ++i) {
    T s{0};
    for (std::size_t t = 0; t < L; ++t) s += xv[i * L + t];
    y[i] = s / static_cast<T>(L);
  }
  return x.graph().op(std::move(y), {x}, [L](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
    const T inv = T{1} / static_cast<T>(L);
    for (std::size_t i = 0; i < dy.size(); ++i)
      for (std::size_t t = 0; t < L; ++t) (*d[0])[i * L + t] += dy[i] * inv;
  });
}

// x [B, C, L] (or [B, C]) scaled per (b, c) by s [B, C].
template <typename T>
Var<T> scale_channels(Var<T> x, Var<T> s) {
  const auto& xv = x.value();
  const auto& sv = s.value();
  if (xv.rank() != 2 && xv.rank() != 3) throw ShapeError("scale_channels: rank must be 2 or 3");
  if (sv.shape() != Shape{xv.dim(0), xv.dim(1)}) {
    throw ShapeError("scale_channels: gate " + shape_str(sv.shape()) + " vs input " +
                     shape_str(xv.shape()));
  }
  const std::size_t BC = sv.size();
  const std::size_t L = xv.rank() == 3 ? xv.dim(2) : 1;
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < BC; ++i)
    for (std::size_t t = 0; t < L; ++t) y[i * L + t] = xv[i * L + t] * sv[i];
  auto& g = x.graph();
  const int xid = x.id(), sid = s.id();
  return g.op(std::move(y), {x, s},
              [&g, xid, sid, BC, L](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                const auto& xv2 = g.value(xid);
                const auto& sv2 = g.value(sid);
                for (std::size_t i = 0; i < BC; ++i) {
                  T acc{0};
                  for (std::size_t t = 0; t < L; ++t) {
                    if (d[0]) (*d[0])[i * L + t] += dy[i * L + t] * sv2[i];
                    acc += dy[i * L + t] * xv2[i * L + t];
                  }
                  if (d[1]) (*d[1])[i] += acc;
                }
              });
}

// [B, A, C] -> [B, C, A].
template <typename T>
Var<T> swap_last_two(Var<T> x) {
  const auto& xv = x.value();
  kernels::check_rank(xv.shape(), 3, "swap_last_two");
  const std::size_t B = xv.dim(0), A = xv.dim(1), C = xv.dim(2);
  Tensor<T> y({B, C, A});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t c = 0; c < C; ++c) y[(b * C + c) * A + a] = xv[(b * A + a) * C + c];
  return x.graph().op(std::move(y), {x},
                      [B, A, C](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                        for (std::size_t b = 0; b < B; ++b)
                          for (std::size_t a = 0; a < A; ++a)
                            for (std::size_t c = 0; c < C; ++c)
                              (*d[0])[(b * A + a) * C + c] += dy[(b * C + c) * A + a];
                      });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  auto y = x.value().reshaped(std::move(shape));
  return x.graph().op(std::move(y), {x}, [](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
    for (std::size_t i = 0; i < dy.size(); ++i) (*d[0])[i] += dy[i];
  });
}

// [B, T, H] -> [B, H] at time index t.
template <typename T>
Var<T> time_step(Var<T> x, std::size_t t) {
  const auto& xv = x.value();
  kernels::check_rank(xv.shape(), 3, "time_step");
  const std::size_t B = xv.dim(0), Tn = xv.dim(1), H = xv.dim(2);
  if (t >= Tn) throw ShapeError("time_step: index out of range");
  Tensor<T> y({B, H});
  for (std::size_t b = 0; b < B; ++b)
    std::copy_n(xv.ptr() + (b * Tn + t) * H, H, y.ptr() + b * H);
  return x.graph().op(std::move(y), {x},
                      [B, Tn, H, t](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                        for (std::size_t b = 0; b < B; ++b)
                          for (std::size_t j = 0; j < H; ++j)
                            (*d[0])[(b * Tn + t) * H + j] += dy[b * H + j];
                      });
}

// [B, F1] ++ [B, F2] -> [B, F1 + F2].
template <typename T>
Var<T> concat_features(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  kernels::check_rank(av.shape(), 2, "concat lhs");
  kernels::check_rank(bv.shape(), 2, "concat rhs");
  if (av.dim(0) != bv.dim(0)) throw ShapeError("concat: batch mismatch");
  const std::size_t B = av.dim(0), F1 = av.dim(1), F2 = bv.dim(1);
  Tensor<T> y({B, F1 + F2});
  for (std::size_t r = 0; r < B; ++r) {
    std::copy_n(av.ptr() + r * F1, F1, y.ptr() + r * (F1 + F2));
    std::copy_n(bv.ptr() + r * F2, F2, y.ptr() + r * (F1 + F2) + F1);
  }
  return a.graph().op(std::move(y), {a, b},
                      [B, F1, F2](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                        for (std::size_t r = 0; r < B; ++r) {
                          for (std::size_t j = 0; j < F1; ++j)
                            if (d[0]) (*d[0])[r * F1 + j] += dy[r * (F1 + F2) + j];
                          for (std::size_t j = 0; j < F2; ++j)
                            if (d[1]) (*d[1])[r * F2 + j] += dy[r * (F1 + F2) + F1 + j];
                        }
                      });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T s{0};
  for (auto v : x.value().data()) s += v;
  return x.graph().op(Tensor<T>({1}, s), {x},
                      [](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                        for (auto& v : d[0]->data()) v += dy[0];
                      });
}

template <typename T>
Var<T> mse_loss(Var<T> pred, Var<T> target) {
  const auto& p = pred.value();
  const auto& t = target.value();
  p.require_same_shape(t, "mse_loss");
  if (p.empty()) throw ShapeError("mse_loss: empty tensors");
  T s{0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T e = p[i] - t[i];
    s += e * e;
  }
  const T n = static_cast<T>(p.size());
  auto& g = pred.graph();
  const int pid = pred.id(), tid = target.id();
  return g.op(Tensor<T>({1}, s / n), {pred, target},
              [&g, pid, tid, n](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                const auto& pv = g.value(pid);
                const auto& tv = g.value(tid);
                for (std::size_t i = 0; i < pv.size(); ++i) {
                  const T gi = dy[0] * T{2} * (pv[i] - tv[i]) / n;
                  if (d[0]) (*d[0])[i] += gi;
                  if (d[1]) (*d[1])[i] -= gi;
                }
              });
}

// wa * a + wb * b, elementwise on equal shapes.
template <typename T>
Var<T> weighted_sum(Var<T> a, T wa, Var<T> b, T wb) {
  const auto& av = a.value();
  const auto& bv = b.value();
  av.require_same_shape(bv, "weighted_sum");
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = wa * av[i] + wb * bv[i];
  return a.graph().op(std::move(y), {a, b},
                      [wa, wb](const Tensor<T>& dy, std::span<Tensor<T>*> d) {
                        for (std::size_t i = 0; i < dy.size(); ++i) {
                          if (d[0]) (*d[0])[i] += wa * dy[i];
                          if (d[1]) (*d[1])[i] += wb * dy[i];
                        }
                      });
}

}  // namespace lite::ops
