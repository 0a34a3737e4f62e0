#pragma once

#include "dpd/model.hpp"
#include "dpd/tensors.hpp"

#include <type_traits>
#include <vector>

namespace dpd {

/// One frame batch laid out step-major: element t is a (rows x B) matrix.
template <typename T>
using BatchSeq = std::vector<Mat<T>>;

template <typename T>
struct RecurrentCache {
  BatchSeq<T> phi;  // true inputs, F x B
  BatchSeq<T> h;    // hidden after update, H x B
  BatchSeq<T> r, z, n;
  BatchSeq<T> m;  // hidden new-gate pre-activation (M_nh trajectory)

  Index steps() const { return static_cast<Index>(h.size()); }
  void clear() {
    phi.clear();
    h.clear();
    r.clear();
    z.clear();
    n.clear();
    m.clear();
  }
};

/// Batched forward through GRU + FC with the step cache needed for BPTT.
/// With zero thresholds this is plain dense math; with nonzero thresholds
/// the delta-masked accumulator form runs instead and the cache holds the
/// values the thresholded forward actually produced (the backward pass
/// treats the threshold gate as identity).
template <typename T>
BatchSeq<T> gru_fc_forward_cached(const GruParams<T>& g, const FcParams<T>& fc,
                                  const DeltaThresholds& th, const BatchSeq<T>& phi,
                                  RecurrentCache<T>& cache) {
  const Index steps = static_cast<Index>(phi.size());
  if (steps == 0) throw std::invalid_argument("gru_fc_forward_cached: empty frame");
  const Index h = g.hidden_size(), b = phi[0].cols();
  const bool delta = th.theta_phi > 0 || th.theta_h > 0;

  cache.clear();
  cache.phi = phi;
  cache.h.reserve(steps);
  cache.r.reserve(steps);
  cache.z.reserve(steps);
  cache.n.reserve(steps);
  cache.m.reserve(steps);

  BatchSeq<T> out;
  out.reserve(steps);

  Mat<T> h_prev = Mat<T>::Zero(h, b);
  Mat<T> phi_buf, h_buf, Mr, Mz, Mnphi, Mnh;
  if (delta) {
    phi_buf = Mat<T>::Zero(g.input_size(), b);
    h_buf = Mat<T>::Zero(h, b);
    Mr = g.b_ir.replicate(1, b);
    Mz = g.b_iz.replicate(1, b);
    Mnphi = g.b_in.replicate(1, b);
    Mnh = g.b_hn.replicate(1, b);
  }

  for (Index t = 0; t < steps; ++t) {
    Mat<T> ar, az, an_phi, m;
    if (!delta) {
      ar = ((g.W_ir * phi[t]).colwise() + g.b_ir) + g.W_hr * h_prev;
      az = ((g.W_iz * phi[t]).colwise() + g.b_iz) + g.W_hz * h_prev;
      an_phi = (g.W_in * phi[t]).colwise() + g.b_in;
      m = (g.W_hn * h_prev).colwise() + g.b_hn;
    } else {
      Mat<T> dphi = phi[t] - phi_buf;
      const auto phi_mask =
          (dphi.array().abs().template cast<double>() > th.theta_phi).eval();
      dphi = phi_mask.select(dphi.array(), T(0)).matrix();
      phi_buf = phi_mask.select(phi[t].array(), phi_buf.array()).matrix();
      Mat<T> dh = h_prev - h_buf;
      if (t == 0) {
        dh.setZero();
      } else {
        const auto h_mask =
            (dh.array().abs().template cast<double>() > th.theta_h).eval();
        dh = h_mask.select(dh.array(), T(0)).matrix();
        h_buf = h_mask.select(h_prev.array(), h_buf.array()).matrix();
      }
      Mr += g.W_ir * dphi + g.W_hr * dh;
      Mz += g.W_iz * dphi + g.W_hz * dh;
      Mnphi += g.W_in * dphi;
      Mnh += g.W_hn * dh;
      ar = Mr;
      az = Mz;
      an_phi = Mnphi;
      m = Mnh;
    }

    Mat<T> r(h, b), z(h, b), n(h, b), hn(h, b);
    for (Index col = 0; col < b; ++col)
      for (Index i = 0; i < h; ++i) {
        const T rv = stable_sigmoid(ar(i, col));
        const T zv = stable_sigmoid(az(i, col));
        const T nv = std::tanh(an_phi(i, col) + rv * m(i, col));
        r(i, col) = rv;
        z(i, col) = zv;
        n(i, col) = nv;
        hn(i, col) = (T(1) - zv) * h_prev(i, col) + zv * nv;
      }
    cache.r.push_back(r);
    cache.z.push_back(z);
    cache.n.push_back(n);
    cache.m.push_back(m);
    cache.h.push_back(hn);
    out.push_back(((fc.W * hn).colwise() + fc.b).eval());
    h_prev = std::move(hn);
  }
  return out;
}

template <typename T>
struct GruFcGrads {
  GruParams<T> gru;
  FcParams<T> fc;
};

template <typename T>
GruFcGrads<T> zero_grads(const GruParams<T>& g, const FcParams<T>& fc) {
  return {zeros_like(g), zeros_like(fc)};
}

/// Reverse-mode pass over a cached forward. dOut holds per-step gradients
/// w.r.t. the FC output. Parameter gradients accumulate into *grads when
/// given; input-feature gradients accumulate into *dPhi when given.
template <typename T>
void gru_fc_backward(const GruParams<T>& g, const FcParams<T>& fc,
                     const RecurrentCache<T>& cache, const BatchSeq<T>& dOut,
                     std::type_identity_t<GruFcGrads<T>*> grads,
                     std::type_identity_t<BatchSeq<T>*> dPhi) {
  const Index steps = cache.steps();
  if (static_cast<Index>(dOut.size()) != steps)
    throw std::invalid_argument("gru_fc_backward: dOut length mismatch");
  const Index h = g.hidden_size(), b = cache.h[0].cols();

  if (dPhi) {
    dPhi->assign(static_cast<size_t>(steps), Mat<T>::Zero(g.input_size(), b));
  }

  Mat<T> dH = Mat<T>::Zero(h, b);
  const Mat<T> zero_h = Mat<T>::Zero(h, b);
  for (Index t = steps - 1; t >= 0; --t) {
    if (grads) {
      grads->fc.W.noalias() += dOut[t] * cache.h[t].transpose();
      grads->fc.b += dOut[t].rowwise().sum();
    }
    dH.noalias() += fc.W.transpose() * dOut[t];

    const Mat<T>& h_prev = t > 0 ? cache.h[t - 1] : zero_h;
    const Mat<T>& r = cache.r[t];
    const Mat<T>& z = cache.z[t];
    const Mat<T>& n = cache.n[t];
    const Mat<T>& m = cache.m[t];
    const Mat<T>& phi = cache.phi[t];

    const Mat<T> dZ = dH.cwiseProduct(n - h_prev);
    const Mat<T> dN = dH.cwiseProduct(z);
    Mat<T> dHprev = dH.cwiseProduct(Mat<T>::Constant(h, b, T(1)) - z);

    const Mat<T> dAn =
        dN.cwiseProduct((Mat<T>::Constant(h, b, T(1)) - n.cwiseProduct(n)));
    const Mat<T> dR = dAn.cwiseProduct(m);
    const Mat<T> dM = dAn.cwiseProduct(r);
    const Mat<T> dAr = dR.cwiseProduct(r.cwiseProduct(Mat<T>::Constant(h, b, T(1)) - r));
    const Mat<T> dAz = dZ.cwiseProduct(z.cwiseProduct(Mat<T>::Constant(h, b, T(1)) - z));

    if (grads) {
      grads->gru.W_in.noalias() += dAn * phi.transpose();
      grads->gru.b_in += dAn.rowwise().sum();
      grads->gru.W_hn.noalias() += dM * h_prev.transpose();
      grads->gru.b_hn += dM.rowwise().sum();
      grads->gru.W_ir.noalias() += dAr * phi.transpose();
      grads->gru.b_ir += dAr.rowwise().sum();
      grads->gru.W_hr.noalias() += dAr * h_prev.transpose();
      grads->gru.W_iz.noalias() += dAz * phi.transpose();
      grads->gru.b_iz += dAz.rowwise().sum();
      grads->gru.W_hz.noalias() += dAz * h_prev.transpose();
    }
    if (dPhi) {
      (*dPhi)[t].noalias() += g.W_in.transpose() * dAn;
      (*dPhi)[t].noalias() += g.W_ir.transpose() * dAr;
      (*dPhi)[t].noalias() += g.W_iz.transpose() * dAz;
    }
    dHprev.noalias() += g.W_hn.transpose() * dM;
    dHprev.noalias() += g.W_hr.transpose() * dAr;
    dHprev.noalias() += g.W_hz.transpose() * dAz;
    dH = std::move(dHprev);
  }
}

template <typename T>
struct TcnCache {
  BatchSeq<T> pre1, act1, pre2;
};

template <typename T>
BatchSeq<T> tcn_forward_cached(const TcnParams<T>& tcn, const BatchSeq<T>& x,
                               TcnCache<T>& cache) {
  const Index steps = static_cast<Index>(x.size());
  const Index b = x[0].cols();
  cache.pre1.clear();
  cache.act1.clear();
  cache.pre2.clear();
  BatchSeq<T> out;
  out.reserve(steps);
  for (Index t = 0; t < steps; ++t) {
    Mat<T> pre1 = tcn.b1.replicate(1, b);
    for (int a = 0; a < tcn.kernel1; ++a) {
      const Index src = t + Index(a) * tcn.dilation1 - tcn.pad1();
      if (src < 0 || src >= steps) continue;
      pre1.noalias() += tcn.w1[static_cast<size_t>(a)] * x[static_cast<size_t>(src)];
    }
    Mat<T> act1 = pre1.unaryExpr([](T v) { return hardswish(v); });
    Mat<T> pre2 = (tcn.w2 * act1).colwise() + tcn.b2;
    out.push_back(pre2.unaryExpr([](T v) { return hardswish(v); }));
    cache.pre1.push_back(std::move(pre1));
    cache.act1.push_back(std::move(act1));
    cache.pre2.push_back(std::move(pre2));
  }
  return out;
}

template <typename T>
void tcn_backward(const TcnParams<T>& tcn, const BatchSeq<T>& x,
                  const TcnCache<T>& cache, const BatchSeq<T>& dOut,
                  std::type_identity_t<TcnParams<T>*> grads,
                  std::type_identity_t<BatchSeq<T>*> dX) {
  const Index steps = static_cast<Index>(x.size());
  if (dX) dX->assign(static_cast<size_t>(steps), Mat<T>::Zero(tcn.c_in, x[0].cols()));
  for (Index t = 0; t < steps; ++t) {
    const Mat<T> dPre2 = dOut[t].cwiseProduct(
        cache.pre2[t].unaryExpr([](T v) { return hardswish_grad(v); }));
    if (grads) {
      grads->w2.noalias() += dPre2 * cache.act1[t].transpose();
      grads->b2 += dPre2.rowwise().sum();
    }
    const Mat<T> dAct1 = tcn.w2.transpose() * dPre2;
    const Mat<T> dPre1 = dAct1.cwiseProduct(
        cache.pre1[t].unaryExpr([](T v) { return hardswish_grad(v); }));
    if (grads) grads->b1 += dPre1.rowwise().sum();
    for (int a = 0; a < tcn.kernel1; ++a) {
      const Index src = t + Index(a) * tcn.dilation1 - tcn.pad1();
      if (src < 0 || src >= steps) continue;
      if (grads)
        grads->w1[static_cast<size_t>(a)].noalias() +=
            dPre1 * x[static_cast<size_t>(src)].transpose();
      if (dX)
        (*dX)[static_cast<size_t>(src)].noalias() +=
            tcn.w1[static_cast<size_t>(a)].transpose() * dPre1;
    }
  }
}

/// Feature rows built in-graph from a (2 x B)-per-step signal u, with the
/// final step reusing itself as look-ahead.
template <typename T>
BatchSeq<T> features_from_u(const BatchSeq<T>& u) {
  const Index steps = static_cast<Index>(u.size());
  const Index b = u[0].cols();
  BatchSeq<T> phi(static_cast<size_t>(steps));
  for (Index t = 0; t < steps; ++t) {
    const Mat<T>& cur = u[static_cast<size_t>(t)];
    const Mat<T>& nxt = u[static_cast<size_t>(std::min(t + 1, steps - 1))];
    Mat<T>& p = phi[static_cast<size_t>(t)];
    p.resize(kFeatureWidth, b);
    for (Index col = 0; col < b; ++col) {
      const T i = cur(0, col), q = cur(1, col);
      const T mag = std::sqrt(i * i + q * q);
      p(0, col) = i;
      p(1, col) = q;
      p(2, col) = nxt(0, col);
      p(3, col) = nxt(1, col);
      p(4, col) = mag;
      p(5, col) = mag * mag * mag;
    }
  }
  return phi;
}

/// Accumulates d(loss)/d(u) given gradients w.r.t. the feature rows.
template <typename T>
void features_from_u_backward(const BatchSeq<T>& u, const BatchSeq<T>& dPhi,
                              BatchSeq<T>& dU) {
  const Index steps = static_cast<Index>(u.size());
  const Index b = u[0].cols();
  if (dU.size() != u.size())
    dU.assign(u.size(), Mat<T>::Zero(2, b));
  for (Index t = 0; t < steps; ++t) {
    const Mat<T>& cur = u[static_cast<size_t>(t)];
    const Mat<T>& dp = dPhi[static_cast<size_t>(t)];
    Mat<T>& du_t = dU[static_cast<size_t>(t)];
    Mat<T>& du_next = dU[static_cast<size_t>(std::min(t + 1, steps - 1))];
    for (Index col = 0; col < b; ++col) {
      const T i = cur(0, col), q = cur(1, col);
      const T mag = std::sqrt(i * i + q * q);
      du_t(0, col) += dp(0, col);
      du_t(1, col) += dp(1, col);
      du_next(0, col) += dp(2, col);
      du_next(1, col) += dp(3, col);
      if (mag > T(0)) {
        // d|u|/dI = I/|u|, d|u|^3/dI = 3|u| I
        du_t(0, col) += dp(4, col) * (i / mag) + dp(5, col) * (T(3) * mag * i);
        du_t(1, col) += dp(4, col) * (q / mag) + dp(5, col) * (T(3) * mag * q);
      }
    }
  }
}

/// Mean squared error over the real components of steps >= warmup; fills
/// dOut with d(loss)/d(out) when requested.
template <typename T>
double mse_loss(const BatchSeq<T>& out, const BatchSeq<T>& target, Index warmup,
                std::type_identity_t<BatchSeq<T>*> dOut) {
  const Index steps = static_cast<Index>(out.size());
  if (out.size() != target.size())
    throw std::invalid_argument("mse_loss: length mismatch");
  if (warmup >= steps) throw std::invalid_argument("mse_loss: warmup too long");
  const Index b = out[0].cols(), rows = out[0].rows();
  const double n_eff = double((steps - warmup) * b * rows);
  double loss = 0;
  if (dOut) dOut->assign(out.size(), Mat<T>::Zero(rows, b));
  for (Index t = warmup; t < steps; ++t) {
    const Mat<T> diff = out[static_cast<size_t>(t)] - target[static_cast<size_t>(t)];
    loss += double(diff.squaredNorm());
    if (dOut)
      (*dOut)[static_cast<size_t>(t)] = diff * T(2.0 / n_eff);
  }
  return loss / n_eff;
}

}  // namespace dpd
