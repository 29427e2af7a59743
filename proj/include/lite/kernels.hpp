#pragma once

// Graph-free layer kernels. Each forward has a matching backward that takes
// the cached forward state and the output gradient.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lite/tensor.hpp"

namespace lite::kernels {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

inline std::size_t conv_out_len(std::size_t len, std::size_t kernel, std::size_t stride,
                                std::size_t padding) {
  if (stride < 1) throw ShapeError("conv1d: stride must be >= 1");
  if (kernel > len + 2 * padding) {
    throw ShapeError("conv1d: kernel " + std::to_string(kernel) + " exceeds padded length " +
                     std::to_string(len + 2 * padding));
  }
  return (len + 2 * padding - kernel) / stride + 1;
}

inline std::size_t conv_transpose_out_len(std::size_t len, std::size_t kernel,
                                          std::size_t stride, std::size_t padding,
                                          std::size_t output_padding) {
  if (stride < 1) throw ShapeError("conv_transpose1d: stride must be >= 1");
  if (output_padding >= stride) {
    throw ShapeError("conv_transpose1d: output_padding " + std::to_string(output_padding) +
                     " must be < stride " + std::to_string(stride));
  }
  const long out = static_cast<long>((len - 1) * stride + kernel + output_padding) -
                   2 * static_cast<long>(padding);
  if (out < 1) throw ShapeError("conv_transpose1d: non-positive output length");
  return static_cast<std::size_t>(out);
}

// cols[c*K + k, b*Lout + o] = x[b, c, o*stride + k - padding] (zero outside).
template <typename T>
RowMat<T> im2col(const Tensor<T>& x, std::size_t kernel, std::size_t stride,
                 std::size_t padding, std::size_t lout) {
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  RowMat<T> cols = RowMat<T>::Zero(C * kernel, B * lout);
  const T* xp = x.ptr();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      T* row = cols.data() + (c * kernel + k) * B * lout;
      for (std::size_t b = 0; b < B; ++b) {
        const T* xs = xp + (b * C + c) * L;
        for (std::size_t o = 0; o < lout; ++o) {
          const long pos = static_cast<long>(o * stride + k) - static_cast<long>(padding);
          if (pos >= 0 && pos < static_cast<long>(L)) row[b * lout + o] = xs[pos];
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add columns back onto a [B, C, L] tensor.
template <typename T>
void col2im(const RowMat<T>& cols, std::size_t kernel, std::size_t stride,
            std::size_t padding, std::size_t lcols, Tensor<T>& out) {
  const std::size_t B = out.dim(0), C = out.dim(1), L = out.dim(2);
  T* op = out.ptr();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const T* row = cols.data() + (c * kernel + k) * B * lcols;
      for (std::size_t b = 0; b < B; ++b) {
        T* os = op + (b * C + c) * L;
        for (std::size_t o = 0; o < lcols; ++o) {
          const long pos = static_cast<long>(o * stride + k) - static_cast<long>(padding);
          if (pos >= 0 && pos < static_cast<long>(L)) os[pos] += row[b * lcols + o];
        }
      }
    }
  }
}

// [Cout, B*L] matrix <-> [B, Cout, L] tensor.
template <typename T>
Tensor<T> channels_to_tensor(const RowMat<T>& m, std::size_t B, std::size_t L) {
  const std::size_t C = static_cast<std::size_t>(m.rows());
  Tensor<T> out({B, C, L});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(m.data() + c * B * L + b * L, L, out.ptr() + (b * C + c) * L);
  return out;
}

template <typename T>
RowMat<T> tensor_to_channels(const Tensor<T>& t) {
  const std::size_t B = t.dim(0), C = t.dim(1), L = t.dim(2);
  RowMat<T> m(C, B * L);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(t.ptr() + (b * C + c) * L, L, m.data() + c * B * L + b * L);
  return m;
}

inline void check_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_str(s));
  }
}

// ---------------------------------------------------------------- conv1d

template <typename T>
struct Conv1dCache {
  RowMat<T> cols;
  std::size_t in_len = 0;
};

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                         std::size_t stride, std::size_t padding,
                         Conv1dCache<T>* cache = nullptr) {
  check_rank(x.shape(), 3, "conv1d input");
  check_rank(w.shape(), 3, "conv1d weight");
  const std::size_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
  const std::size_t Cout = w.dim(0), K = w.dim(2);
  if (w.dim(1) != Cin) {
    throw ShapeError("conv1d: input has " + std::to_string(Cin) + " channels but weight " +
                     shape_str(w.shape()) + " expects " + std::to_string(w.dim(1)));
  }
  if (bias.shape() != Shape{Cout}) {
    throw ShapeError("conv1d: bias shape " + shape_str(bias.shape()) + ", expected [" +
                     std::to_string(Cout) + "]");
  }
  const std::size_t lout = conv_out_len(L, K, stride, padding);
  RowMat<T> cols = im2col(x, K, stride, padding, lout);
  CMatMap<T> wm(w.ptr(), Cout, Cin * K);
  RowMat<T> y = wm * cols;
  for (std::size_t c = 0; c < Cout; ++c) y.row(c).array() += bias[c];
  if (cache) {
    cache->cols = std::move(cols);
    cache->in_len = L;
  }
  return channels_to_tensor(y, B, lout);
}

template <typename T>
void conv1d_backward(const Tensor<T>& dy, const Tensor<T>& w, std::size_t stride,
                     std::size_t padding, const Conv1dCache<T>& cache, Tensor<T>* dx,
                     Tensor<T>* dw, Tensor<T>* db) {
  const std::size_t B = dy.dim(0), Cout = dy.dim(1), lout = dy.dim(2);
  const std::size_t Cin = w.dim(1), K = w.dim(2);
  RowMat<T> dym = tensor_to_channels(dy);
  if (dw) {
    MatMap<T> dwm(dw->ptr(), Cout, Cin * K);
    dwm.noalias() += dym * cache.cols.transpose();
  }
  if (db) {
    for (std::size_t c = 0; c < Cout; ++c) (*db)[c] += dym.row(c).sum();
  }
  if (dx) {
    CMatMap<T> wm(w.ptr(), Cout, Cin * K);
    RowMat<T> dcols = wm.transpose() * dym;
    Tensor<T> acc({B, Cin, cache.in_len});
    col2im(dcols, K, stride, padding, lout, acc);
    *dx += acc;
  }
}

// ------------------------------------------------------- conv_transpose1d

template <typename T>
struct ConvTranspose1dCache {
  RowMat<T> xm;  // input as [Cin, B*L]
};

// weight layout [Cin, Cout, K].
template <typename T>
Tensor<T> conv_transpose1d_forward(const Tensor<T>& x, const Tensor<T>& w,
                                   const Tensor<T>& bias, std::size_t stride,
                                   std::size_t padding, std::size_t output_padding,
                                   ConvTranspose1dCache<T>* cache = nullptr) {
  check_rank(x.shape(), 3, "conv_transpose1d input");
  check_rank(w.shape(), 3, "conv_transpose1d weight");
  const std::size_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
  const std::size_t Cout = w.dim(1), K = w.dim(2);
  if (w.dim(0) != Cin) {
    throw ShapeError("conv_transpose1d: input has " + std::to_string(Cin) +
                     " channels but weight " + shape_str(w.shape()) + " expects " +
                     std::to_string(w.dim(0)));
  }
  if (bias.shape() != Shape{Cout}) {
    throw ShapeError("conv_transpose1d: bias shape " + shape_str(bias.shape()));
  }
  const std::size_t lout = conv_transpose_out_len(L, K, stride, padding, output_padding);
  RowMat<T> xm = tensor_to_channels(x);
  CMatMap<T> wm(w.ptr(), Cin, Cout * K);
  RowMat<T> cols = wm.transpose() * xm;  // [Cout*K, B*L]
  Tensor<T> y({B, Cout, lout});
  col2im(cols, K, stride, padding, L, y);
  T* yp = y.ptr();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < Cout; ++c)
      for (std::size_t o = 0; o < lout; ++o) yp[(b * Cout + c) * lout + o] += bias[c];
  if (cache) cache->xm = std::move(xm);
  return y;
}

template <typename T>
void conv_transpose1d_backward(const Tensor<T>& dy, const Tensor<T>& w, std::size_t stride,
                               std::size_t padding, std::size_t in_len,
                               const ConvTranspose1dCache<T>& cache, Tensor<T>* dx,
                               Tensor<T>* dw, Tensor<T>* db) {
  const std::size_t B = dy.dim(0), Cout = dy.dim(1), lout = dy.dim(2);
  const std::size_t Cin = w.dim(0), K = w.dim(2);
  RowMat<T> dcols = im2col(dy, K, stride, padding, in_len);  // [Cout*K, B*L]
  if (dw) {
    MatMap<T> dwm(dw->ptr(), Cin, Cout * K);
    dwm.noalias() += cache.xm * dcols.transpose();
  }
  if (db) {
    const T* dp = dy.ptr();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < Cout; ++c)
        for (std::size_t o = 0; o < lout; ++o) (*db)[c] += dp[(b * Cout + c) * lout + o];
  }
  if (dx) {
    CMatMap<T> wm(w.ptr(), Cin, Cout * K);
    RowMat<T> dxm = wm * dcols;
    *dx += channels_to_tensor(dxm, B, in_len);
  }
}

// ------------------------------------------------------------------ dense

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  check_rank(x.shape(), 2, "dense input");
  check_rank(w.shape(), 2, "dense weight");
  const std::size_t B = x.dim(0), F = x.dim(1), O = w.dim(1);
  if (w.dim(0) != F) {
    throw ShapeError("dense: input width " + std::to_string(F) + " vs weight " +
                     shape_str(w.shape()));
  }
  if (bias.shape() != Shape{O}) throw ShapeError("dense: bias shape " + shape_str(bias.shape()));
  Tensor<T> y({B, O});
  MatMap<T> ym(y.ptr(), B, O);
  ym.noalias() = CMatMap<T>(x.ptr(), B, F) * CMatMap<T>(w.ptr(), F, O);
  ym.rowwise() += Eigen::Map<const RowVec<T>>(bias.ptr(), O);
  return y;
}

template <typename T>
void dense_backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>& w,
                    Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const std::size_t B = x.dim(0), F = x.dim(1), O = w.dim(1);
  CMatMap<T> dym(dy.ptr(), B, O);
  if (dw) MatMap<T>(dw->ptr(), F, O).noalias() += CMatMap<T>(x.ptr(), B, F).transpose() * dym;
  if (db) Eigen::Map<RowVec<T>>(db->ptr(), O) += dym.colwise().sum();
  if (dx) MatMap<T>(dx->ptr(), B, F).noalias() += dym * CMatMap<T>(w.ptr(), F, O).transpose();
}

// ------------------------------------------------------------------- LSTM
//
// Gate order along the 4h axis is (input, forget, cell, output). Weights:
// wx [I, 4h], wh [h, 4h], and two bias vectors bx, bh of length 4h.

template <typename T>
inline T sigmoid(T v) {
  return T{1} / (T{1} + std::exp(-v));
}

template <typename T>
struct LstmCache {
  std::vector<RowMat<T>> act;  // per processing step, [B, 4h] gate activations
  std::vector<RowMat<T>> c;    // cell state [B, h]
  std::vector<RowMat<T>> tc;   // tanh(c)
  std::vector<RowMat<T>> h;    // hidden [B, h]
};

template <typename T>
Tensor<T> lstm_direction_forward(const Tensor<T>& x, const Tensor<T>& wx, const Tensor<T>& wh,
                                 const Tensor<T>& bx, const Tensor<T>& bh, bool reverse,
                                 LstmCache<T>* cache = nullptr) {
  check_rank(x.shape(), 3, "lstm input");
  const std::size_t B = x.dim(0), Tn = x.dim(1), I = x.dim(2);
  const std::size_t H4 = wx.dim(1), H = H4 / 4;
  if (wx.shape() != Shape{I, H4} || H4 % 4 != 0) {
    throw ShapeError("lstm: input width " + std::to_string(I) + " vs wx " + shape_str(wx.shape()));
  }
  if (wh.shape() != Shape{H, H4} || bx.shape() != Shape{H4} || bh.shape() != Shape{H4}) {
    throw ShapeError("lstm: recurrent weight/bias shapes inconsistent with hidden size " +
                     std::to_string(H));
  }
  if (!x.all_finite()) throw NumericError("lstm: non-finite input");

  RowMat<T> xp = CMatMap<T>(x.ptr(), B * Tn, I) * CMatMap<T>(wx.ptr(), I, H4);
  RowVec<T> bias = Eigen::Map<const RowVec<T>>(bx.ptr(), H4) +
                   Eigen::Map<const RowVec<T>>(bh.ptr(), H4);
  CMatMap<T> whm(wh.ptr(), H, H4);

  Tensor<T> y({B, Tn, H});
  RowMat<T> h = RowMat<T>::Zero(B, H), c = RowMat<T>::Zero(B, H);
  RowMat<T> g(B, H4);
  if (cache) {
    cache->act.assign(Tn, {});
    cache->c.assign(Tn, {});
    cache->tc.assign(Tn, {});
    cache->h.assign(Tn, {});
  }
  for (std::size_t s = 0; s < Tn; ++s) {
    const std::size_t t = reverse ? Tn - 1 - s : s;
    g.noalias() = h * whm;
    for (std::size_t b = 0; b < B; ++b) g.row(b) += xp.row(b * Tn + t) + bias;
    for (std::size_t b = 0; b < B; ++b) {
      T* gr = g.data() + b * H4;
      for (std::size_t j = 0; j < H; ++j) {
        gr[j] = sigmoid(gr[j]);
        gr[H + j] = sigmoid(gr[H + j]);
        gr[2 * H + j] = std::tanh(gr[2 * H + j]);
        gr[3 * H + j] = sigmoid(gr[3 * H + j]);
      }
    }
    RowMat<T> tc(B, H);
    for (std::size_t b = 0; b < B; ++b) {
      const T* gr = g.data() + b * H4;
      for (std::size_t j = 0; j < H; ++j) {
        const T cv = gr[H + j] * c(b, j) + gr[j] * gr[2 * H + j];
        c(b, j) = cv;
        tc(b, j) = std::tanh(cv);
        h(b, j) = gr[3 * H + j] * tc(b, j);
        y[(b * Tn + t) * H + j] = h(b, j);
      }
    }
    if (cache) {
      cache->act[s] = g;
      cache->c[s] = c;
      cache->tc[s] = std::move(tc);
      cache->h[s] = h;
    }
  }
  return y;
}

template <typename T>
void lstm_direction_backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>& wx,
                             const Tensor<T>& wh, bool reverse, const LstmCache<T>& cache,
                             Tensor<T>* dx, Tensor<T>* dwx, Tensor<T>* dwh, Tensor<T>* dbx,
                             Tensor<T>* dbh) {
  const std::size_t B = x.dim(0), Tn = x.dim(1), I = x.dim(2);
  const std::size_t H4 = wx.dim(1), H = H4 / 4;
  CMatMap<T> whm(wh.ptr(), H, H4);
  RowMat<T> dxp(B * Tn, H4);
  RowMat<T> dh_next = RowMat<T>::Zero(B, H), dc_next = RowMat<T>::Zero(B, H);
  RowMat<T> dg(B, H4);
  RowMat<T> dwh_acc = RowMat<T>::Zero(H, H4);

  for (std::size_t si = Tn; si-- > 0;) {
    const std::size_t t = reverse ? Tn - 1 - si : si;
    const RowMat<T>& a = cache.act[si];
    const RowMat<T>& tc = cache.tc[si];
    for (std::size_t b = 0; b < B; ++b) {
      const T* ar = a.data() + b * H4;
      T* dgr = dg.data() + b * H4;
      for (std::size_t j = 0; j < H; ++j) {
        const T dh = dy[(b * Tn + t) * H + j] + dh_next(b, j);
        const T ig = ar[j], fg = ar[H + j], gg = ar[2 * H + j], og = ar[3 * H + j];
        const T tcv = tc(b, j);
        const T cprev = si > 0 ? cache.c[si - 1](b, j) : T{0};
        const T dc = dh * og * (T{1} - tcv * tcv) + dc_next(b, j);
        dgr[j] = dc * gg * ig * (T{1} - ig);
        dgr[H + j] = dc * cprev * fg * (T{1} - fg);
        dgr[2 * H + j] = dc * ig * (T{1} - gg * gg);
        dgr[3 * H + j] = dh * tcv * og * (T{1} - og);
        dc_next(b, j) = dc * fg;
      }
    }
    if (si > 0) dwh_acc.noalias() += cache.h[si - 1].transpose() * dg;
    dh_next.noalias() = dg * whm.transpose();
    for (std::size_t b = 0; b < B; ++b) dxp.row(b * Tn + t) = dg.row(b);
  }
  if (dwh) MatMap<T>(dwh->ptr(), H, H4) += dwh_acc;
  if (dwx) MatMap<T>(dwx->ptr(), I, H4).noalias() += CMatMap<T>(x.ptr(), B * Tn, I).transpose() * dxp;
  if (dbx || dbh) {
    RowVec<T> db = dxp.colwise().sum();
    if (dbx) Eigen::Map<RowVec<T>>(dbx->ptr(), H4) += db;
    if (dbh) Eigen::Map<RowVec<T>>(dbh->ptr(), H4) += db;
  }
  if (dx) MatMap<T>(dx->ptr(), B * Tn, I).noalias() += dxp * CMatMap<T>(wx.ptr(), I, H4).transpose();
}

// Inference-only variant: final hidden state of one direction, no per-step
// outputs and no cache. Rows are processed in blocks of `block` samples so the
// projected inputs and gate buffers stay cache resident, inputs are laid out
// time-major per block, and the gate nonlinearities run as vectorized array
// expressions (sigmoid via tanh).
template <typename T>
RowMat<T> lstm_final_hidden(const Tensor<T>& x, const Tensor<T>& wx, const Tensor<T>& wh,
                            const Tensor<T>& bx, const Tensor<T>& bh, bool reverse,
                            std::size_t block = 64) {
  check_rank(x.shape(), 3, "lstm input");
  const std::size_t B = x.dim(0), Tn = x.dim(1), I = x.dim(2);
  const std::size_t H4 = wx.dim(1), H = H4 / 4;
  if (wx.shape() != Shape{I, H4} || H4 % 4 != 0 || wh.shape() != Shape{H, H4} ||
      bx.shape() != Shape{H4} || bh.shape() != Shape{H4}) {
    throw ShapeError("lstm: weights inconsistent with input " + shape_str(x.shape()));
  }
  if (!x.all_finite()) throw NumericError("lstm: non-finite input");
  if (block == 0) block = B;

  CMatMap<T> wxm(wx.ptr(), I, H4), whm(wh.ptr(), H, H4);
  const RowVec<T> bias = Eigen::Map<const RowVec<T>>(bx.ptr(), H4) +
                         Eigen::Map<const RowVec<T>>(bh.ptr(), H4);
  const T half{0.5};
  RowMat<T> out(B, H);
  RowMat<T> xt, xp, g, h, c;
  for (std::size_t b0 = 0; b0 < B; b0 += block) {
    const std::size_t Bb = std::min(block, B - b0);
    xt.resize(Tn * Bb, I);
    for (std::size_t t = 0; t < Tn; ++t)
      for (std::size_t b = 0; b < Bb; ++b)
        xt.row(t * Bb + b) = Eigen::Map<const RowVec<T>>(x.ptr() + ((b0 + b) * Tn + t) * I, I);
    xp.noalias() = xt * wxm;
    xp.rowwise() += bias;
    h.setZero(Bb, H);
    c.setZero(Bb, H);
    g.resize(Bb, H4);
    for (std::size_t s = 0; s < Tn; ++s) {
      const std::size_t t = reverse ? Tn - 1 - s : s;
      g = xp.middleRows(t * Bb, Bb);
      if (s > 0) g.noalias() += h * whm;
      auto a = g.array();
      a.leftCols(2 * H) = half * (half * a.leftCols(2 * H)).tanh() + half;
      a.middleCols(2 * H, H) = a.middleCols(2 * H, H).tanh();
      a.rightCols(H) = half * (half * a.rightCols(H)).tanh() + half;
      c.array() = a.middleCols(H, H) * c.array() + a.leftCols(H) * a.middleCols(2 * H, H);
      h.array() = a.rightCols(H) * c.array().tanh();
    }
    out.middleRows(b0, Bb) = h;
  }
  return out;
}

inline std::size_t lstm_param_count(std::size_t input, std::size_t hidden) {
  return 4 * (input * hidden + hidden * hidden + 2 * hidden);
}

}  // namespace lite::kernels
