#pragma once

#include "dpd/activations.hpp"
#include "dpd/iq.hpp"

#include <cstdint>
#include <random>

namespace dpd {

/// GRU weights with the four-bias convention: b_ir, b_iz, b_in on the input
/// side and b_hn on the hidden new-gate side. The hidden reset/update paths
/// carry no bias of their own.
template <typename T>
struct GruParams {
  Mat<T> W_ir, W_iz, W_in;  // H x F
  Mat<T> W_hr, W_hz, W_hn;  // H x H
  Vec<T> b_ir, b_iz, b_in, b_hn;

  Index hidden_size() const { return W_hr.rows(); }
  Index input_size() const { return W_ir.cols(); }

  void validate() const {
    const Index h = hidden_size(), f = input_size();
    auto chk = [](bool ok) {
      if (!ok) throw std::invalid_argument("GruParams: inconsistent shapes");
    };
    chk(W_ir.rows() == h && W_iz.rows() == h && W_in.rows() == h);
    chk(W_iz.cols() == f && W_in.cols() == f);
    chk(W_hr.rows() == h && W_hr.cols() == h);
    chk(W_hz.rows() == h && W_hz.cols() == h);
    chk(W_hn.rows() == h && W_hn.cols() == h);
    chk(b_ir.size() == h && b_iz.size() == h && b_in.size() == h &&
        b_hn.size() == h);
  }
};

struct DeltaThresholds {
  double theta_phi = 0.0;
  double theta_h = 0.0;

  void validate() const {
    if (theta_phi < 0 || theta_h < 0)
      throw std::invalid_argument("DeltaThresholds: must be nonnegative");
  }
};

/// Uniform init in +-1/sqrt(H), all biases zero.
template <typename T>
GruParams<T> init_gru(Index hidden, Index input, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(double(hidden));
  std::uniform_real_distribution<double> u(-bound, bound);
  auto m = [&](Index r, Index c) {
    Mat<T> w(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) w(i, j) = static_cast<T>(u(rng));
    return w;
  };
  GruParams<T> g;
  g.W_ir = m(hidden, input);
  g.W_iz = m(hidden, input);
  g.W_in = m(hidden, input);
  g.W_hr = m(hidden, hidden);
  g.W_hz = m(hidden, hidden);
  g.W_hn = m(hidden, hidden);
  g.b_ir = Vec<T>::Zero(hidden);
  g.b_iz = Vec<T>::Zero(hidden);
  g.b_in = Vec<T>::Zero(hidden);
  g.b_hn = Vec<T>::Zero(hidden);
  return g;
}

/// Per-stream delta-inference memory: encode buffers, exact previous hidden
/// state, and the four pre-activation accumulators. Event and op counters
/// ride along so chunked runs report identically to one-shot runs.
template <typename T>
struct DeltaState {
  Vec<T> phi_buf;  // last significant input, per element
  Vec<T> h_buf;    // last significant hidden state, per element
  Vec<T> h_prev;   // exact h_{t-1}
  Vec<T> M_r, M_z, M_nphi, M_nh;
  std::uint64_t steps = 0;

  // event counters (hidden events accrue from the second step on; the first
  // step has no previous hidden state, hence no skippable work)
  std::uint64_t phi_skipped = 0, phi_total = 0;
  std::uint64_t h_skipped = 0, h_total = 0;

  void reset(const GruParams<T>& g) {
    const Index h = g.hidden_size(), f = g.input_size();
    phi_buf = Vec<T>::Zero(f);
    h_buf = Vec<T>::Zero(h);
    h_prev = Vec<T>::Zero(h);
    M_r = g.b_ir;
    M_z = g.b_iz;
    M_nphi = g.b_in;
    M_nh = g.b_hn;
    steps = 0;
    phi_skipped = phi_total = h_skipped = h_total = 0;
  }
};

/// Fraction of delta elements skipped, plus the MAC-weighted combination
/// that scales the skippable matrix work:
///   gamma = (F*gamma_phi + H*gamma_h) / (F + H)
struct SparsityReport {
  double gamma_phi = 0.0;
  double gamma_h = 0.0;
  std::uint64_t phi_skipped = 0, phi_total = 0;
  std::uint64_t h_skipped = 0, h_total = 0;
  Index input_size = 0, hidden_size = 0;

  double gamma() const {
    const double f = double(input_size), h = double(hidden_size);
    if (f + h == 0) return 0.0;
    return (f * gamma_phi + h * gamma_h) / (f + h);
  }
};

template <typename T>
SparsityReport sparsity_report(const DeltaState<T>& s, Index input_size,
                               Index hidden_size) {
  SparsityReport r;
  r.phi_skipped = s.phi_skipped;
  r.phi_total = s.phi_total;
  r.h_skipped = s.h_skipped;
  r.h_total = s.h_total;
  r.input_size = input_size;
  r.hidden_size = hidden_size;
  r.gamma_phi = s.phi_total ? double(s.phi_skipped) / double(s.phi_total) : 0.0;
  r.gamma_h = s.h_total ? double(s.h_skipped) / double(s.h_total) : 0.0;
  return r;
}

/// Strict-threshold delta encoding. Element k emits v_t^k - buf^k and moves
/// the buffer only when |v_t^k - buf^k| > theta; ties at exactly theta are
/// skipped.
template <typename T>
struct DeltaEncodeResult {
  Vec<T> delta;
  Index updated = 0;  // nonzero deltas == buffer elements moved
};

template <typename T>
DeltaEncodeResult<T> delta_encode(const Vec<T>& v, Vec<T>& buf,
                                  double theta) {
  if (v.size() != buf.size())
    throw std::invalid_argument("delta_encode: length mismatch");
  DeltaEncodeResult<T> out;
  out.delta = Vec<T>::Zero(v.size());
  for (Index k = 0; k < v.size(); ++k) {
    const T d = v[k] - buf[k];
    if (std::abs(double(d)) > theta) {
      out.delta[k] = d;
      buf[k] = v[k];
      ++out.updated;
    }
  }
  return out;
}

struct StepStats {
  Index phi_updated = 0, phi_total = 0;
  Index h_updated = 0, h_total = 0;
};

/// One event-driven DeltaGRU step. Matrix columns are touched only for
/// delta elements that crossed their threshold; the four accumulators carry
/// the running pre-activations across steps.
template <typename T>
Vec<T> delta_gru_step(const GruParams<T>& g, const DeltaThresholds& th,
                      DeltaState<T>& s, const Vec<T>& phi_t,
                      StepStats* stats = nullptr) {
  const Index h = g.hidden_size(), f = g.input_size();
  if (phi_t.size() != f || s.h_prev.size() != h)
    throw std::invalid_argument("delta_gru_step: dimension mismatch");

  StepStats st;
  st.phi_total = f;
  for (Index k = 0; k < f; ++k) {
    const T d = phi_t[k] - s.phi_buf[k];
    if (std::abs(double(d)) > th.theta_phi) {
      s.M_r.noalias() += d * g.W_ir.col(k);
      s.M_z.noalias() += d * g.W_iz.col(k);
      s.M_nphi.noalias() += d * g.W_in.col(k);
      s.phi_buf[k] = phi_t[k];
      ++st.phi_updated;
    }
  }

  if (s.steps > 0) {
    st.h_total = h;
    for (Index k = 0; k < h; ++k) {
      const T d = s.h_prev[k] - s.h_buf[k];
      if (std::abs(double(d)) > th.theta_h) {
        s.M_r.noalias() += d * g.W_hr.col(k);
        s.M_z.noalias() += d * g.W_hz.col(k);
        s.M_nh.noalias() += d * g.W_hn.col(k);
        s.h_buf[k] = s.h_prev[k];
        ++st.h_updated;
      }
    }
  }

  Vec<T> h_t(h);
  for (Index i = 0; i < h; ++i) {
    const T r = stable_sigmoid(s.M_r[i]);
    const T z = stable_sigmoid(s.M_z[i]);
    const T n = std::tanh(s.M_nphi[i] + r * s.M_nh[i]);
    h_t[i] = (T(1) - z) * s.h_prev[i] + z * n;
  }
  s.h_prev = h_t;
  ++s.steps;

  // At zero threshold the encoder is exact: a zero delta contributes no work
  // in either form, so it does not count as a skip. With a positive
  // threshold every element left behind is skipped work.
  s.phi_total += static_cast<std::uint64_t>(st.phi_total);
  if (th.theta_phi > 0)
    s.phi_skipped += static_cast<std::uint64_t>(st.phi_total - st.phi_updated);
  s.h_total += static_cast<std::uint64_t>(st.h_total);
  if (th.theta_h > 0)
    s.h_skipped += static_cast<std::uint64_t>(st.h_total - st.h_updated);
  if (stats) *stats = st;
  return h_t;
}

/// Reference dense GRU over a whole feature sequence; the theta = 0
/// specialization of the delta form, written independently as plain
/// matrix-vector work. Returns the H x T hidden trajectory.
template <typename T>
Mat<T> gru_forward_dense(const GruParams<T>& g, const FeatureSequence<T>& feats) {
  g.validate();
  const Index steps = feats.length();
  if (steps < 1) throw std::invalid_argument("gru_forward_dense: empty input");
  if (feats.phi.rows() != g.input_size())
    throw std::invalid_argument("gru_forward_dense: feature width mismatch");
  const Index h = g.hidden_size();
  Mat<T> out(h, steps);
  Vec<T> hp = Vec<T>::Zero(h);
  for (Index t = 0; t < steps; ++t) {
    const auto phi = feats.phi.col(t);
    Vec<T> ar = g.W_ir * phi + g.b_ir + g.W_hr * hp;
    Vec<T> az = g.W_iz * phi + g.b_iz + g.W_hz * hp;
    Vec<T> m = g.W_hn * hp + g.b_hn;
    Vec<T> an = g.W_in * phi + g.b_in;
    for (Index i = 0; i < h; ++i) {
      const T r = stable_sigmoid(ar[i]);
      const T z = stable_sigmoid(az[i]);
      const T n = std::tanh(an[i] + r * m[i]);
      hp[i] = (T(1) - z) * hp[i] + z * n;
    }
    out.col(t) = hp;
  }
  return out;
}

}  // namespace dpd
