#pragma once

#include "dpd/activations.hpp"
#include "dpd/iq.hpp"

#include <random>
#include <vector>

namespace dpd {

/// Two-layer temporal-convolution residual path:
///   Dilated Conv1D (c_in -> c_mid, kernel k1, dilation d1, pad d1 per side)
///   -> Hardswish -> Conv1D (c_mid -> c_out, kernel 1) -> Hardswish.
/// The first layer is non-causal; with pad == dilation and k1 == 3 the taps
/// sit at t - d1, t, t + d1 and the output length equals the input length.
template <typename T>
struct TcnParams {
  int c_in = 2, c_mid = 3, c_out = 2;
  int kernel1 = 3, dilation1 = 16;
  std::vector<Mat<T>> w1;  // kernel1 mats of (c_mid x c_in)
  Vec<T> b1;               // c_mid
  Mat<T> w2;               // c_out x c_mid
  Vec<T> b2;               // c_out

  int pad1() const { return dilation1; }

  void validate() const {
    if (static_cast<int>(w1.size()) != kernel1)
      throw std::invalid_argument("TcnParams: kernel1 tap count mismatch");
    for (const auto& w : w1)
      if (w.rows() != c_mid || w.cols() != c_in)
        throw std::invalid_argument("TcnParams: layer-1 shape mismatch");
    if (w2.rows() != c_out || w2.cols() != c_mid || b1.size() != c_mid ||
        b2.size() != c_out)
      throw std::invalid_argument("TcnParams: layer-2 shape mismatch");
  }

  Index param_count() const {
    return Index(kernel1) * c_mid * c_in + c_mid + Index(c_out) * c_mid + c_out;
  }
};

template <typename T>
TcnParams<T> init_tcn(std::mt19937_64& rng, int c_in = 2, int c_mid = 3,
                      int c_out = 2, int kernel1 = 3, int dilation1 = 16) {
  TcnParams<T> tcn;
  tcn.c_in = c_in;
  tcn.c_mid = c_mid;
  tcn.c_out = c_out;
  tcn.kernel1 = kernel1;
  tcn.dilation1 = dilation1;
  const double bound1 = 1.0 / std::sqrt(double(c_in * kernel1));
  const double bound2 = 1.0 / std::sqrt(double(c_mid));
  std::uniform_real_distribution<double> u1(-bound1, bound1), u2(-bound2, bound2);
  tcn.w1.resize(kernel1);
  for (auto& w : tcn.w1) {
    w.resize(c_mid, c_in);
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<T>(u1(rng));
  }
  tcn.w2.resize(c_out, c_mid);
  for (Index j = 0; j < tcn.w2.cols(); ++j)
    for (Index i = 0; i < tcn.w2.rows(); ++i) tcn.w2(i, j) = static_cast<T>(u2(rng));
  tcn.b1 = Vec<T>::Zero(c_mid);
  tcn.b2 = Vec<T>::Zero(c_out);
  return tcn;
}

/// Layer-1 pre-activation at one time index, reading x (c_in x T) with zero
/// padding outside [0, T).
template <typename T>
Vec<T> tcn_layer1_preact_at(const TcnParams<T>& tcn, const Mat<T>& x, Index t) {
  Vec<T> acc = tcn.b1;
  const Index n = x.cols();
  for (int a = 0; a < tcn.kernel1; ++a) {
    const Index src = t + Index(a) * tcn.dilation1 - tcn.pad1();
    if (src < 0 || src >= n) continue;
    acc.noalias() += tcn.w1[static_cast<size_t>(a)] * x.col(src);
  }
  return acc;
}

template <typename T>
Vec<T> tcn_output_at(const TcnParams<T>& tcn, const Mat<T>& x, Index t) {
  Vec<T> mid = tcn_layer1_preact_at(tcn, x, t);
  for (Index i = 0; i < mid.size(); ++i) mid[i] = hardswish(mid[i]);
  Vec<T> out = tcn.b2;
  out.noalias() += tcn.w2 * mid;
  for (Index i = 0; i < out.size(); ++i) out[i] = hardswish(out[i]);
  return out;
}

/// Whole-sequence forward on a c_in x T input; output is c_out x T.
template <typename T>
Mat<T> tcn_forward(const TcnParams<T>& tcn, const Mat<T>& x) {
  tcn.validate();
  if (x.rows() != tcn.c_in)
    throw std::invalid_argument("tcn_forward: channel mismatch");
  Mat<T> out(tcn.c_out, x.cols());
  for (Index t = 0; t < x.cols(); ++t) out.col(t) = tcn_output_at(tcn, x, t);
  return out;
}

/// I/Q rows of a complex sequence as a 2 x T real matrix.
template <typename T>
Mat<T> iq_rows(const VecXcd& x) {
  Mat<T> out(2, x.size());
  for (Index t = 0; t < x.size(); ++t) {
    out(0, t) = static_cast<T>(x[t].real());
    out(1, t) = static_cast<T>(x[t].imag());
  }
  return out;
}

template <typename T>
Mat<T> tcn_forward(const TcnParams<T>& tcn, const IQSequence& x) {
  return tcn_forward(tcn, iq_rows<T>(x.samples));
}

}  // namespace dpd
