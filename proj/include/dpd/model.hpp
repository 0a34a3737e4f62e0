#pragma once

#include "dpd/gru.hpp"
#include "dpd/opcount.hpp"
#include "dpd/signal.hpp"
#include "dpd/tcn.hpp"

#include <deque>
#include <span>
#include <vector>

namespace dpd {

template <typename T>
struct FcParams {
  Mat<T> W;  // out x H
  Vec<T> b;  // out

  void validate() const {
    if (W.rows() != b.size())
      throw std::invalid_argument("FcParams: shape mismatch");
  }
};

template <typename T>
Vec<T> fc_forward(const FcParams<T>& fc, const Vec<T>& h) {
  if (h.size() != fc.W.cols())
    throw std::invalid_argument("fc_forward: hidden size mismatch");
  return fc.W * h + fc.b;
}

template <typename T>
FcParams<T> init_fc(Index out, Index hidden, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(double(hidden));
  std::uniform_real_distribution<double> u(-bound, bound);
  FcParams<T> fc;
  fc.W.resize(out, hidden);
  for (Index j = 0; j < hidden; ++j)
    for (Index i = 0; i < out; ++i) fc.W(i, j) = static_cast<T>(u(rng));
  fc.b = Vec<T>::Zero(out);
  return fc;
}

/// Recurrent behavioral model (GRU + FC head); used for the PA model.
template <typename T>
struct GruFcModel {
  GruParams<T> gru;
  FcParams<T> fc;

  Index hidden_size() const { return gru.hidden_size(); }
  void validate() const {
    gru.validate();
    fc.validate();
    if (fc.W.cols() != gru.hidden_size())
      throw std::invalid_argument("GruFcModel: FC/GRU size mismatch");
  }
};

/// The predistorter: delta-thresholded GRU + FC on the feature path and a
/// temporal-convolution residual path from the raw I/Q input, summed at the
/// output: u = fc(gru(features(x))) + tcn(x).
template <typename T>
struct TResDeltaGruModel {
  GruParams<T> gru;
  FcParams<T> fc;
  TcnParams<T> tcn;
  DeltaThresholds thresholds;

  Index hidden_size() const { return gru.hidden_size(); }

  ModelDims dims() const {
    ModelDims d;
    d.hidden = gru.hidden_size();
    d.input = gru.input_size();
    d.tcn_c_in = tcn.c_in;
    d.tcn_c_mid = tcn.c_mid;
    d.tcn_c_out = tcn.c_out;
    d.tcn_k1 = tcn.kernel1;
    return d;
  }

  void validate() const {
    gru.validate();
    fc.validate();
    tcn.validate();
    thresholds.validate();
    if (gru.input_size() != kFeatureWidth)
      throw std::invalid_argument("TResDeltaGruModel: feature width must be 6");
    if (fc.W.cols() != gru.hidden_size() || fc.W.rows() != 2)
      throw std::invalid_argument("TResDeltaGruModel: FC must map H -> 2");
    if (tcn.c_in != 2 || tcn.c_out != 2)
      throw std::invalid_argument("TResDeltaGruModel: TCN must map 2 -> 2");
  }
};

template <typename T>
TResDeltaGruModel<T> init_model(Index hidden, const DeltaThresholds& th,
                                std::mt19937_64& rng) {
  TResDeltaGruModel<T> m;
  m.gru = init_gru<T>(hidden, kFeatureWidth, rng);
  m.fc = init_fc<T>(2, hidden, rng);
  m.tcn = init_tcn<T>(rng);
  m.thresholds = th;
  return m;
}

template <typename T>
GruFcModel<T> init_pa_model(Index hidden, std::mt19937_64& rng) {
  GruFcModel<T> m;
  m.gru = init_gru<T>(hidden, kFeatureWidth, rng);
  m.fc = init_fc<T>(2, hidden, rng);
  return m;
}

struct ParamCount {
  Index gru_params = 0;
  Index fc_params = 0;
  Index tcn_params = 0;
  Index total = 0;
};

/// Weights plus biases, all layers, under the four-bias GRU convention.
template <typename T>
ParamCount count_params(const TResDeltaGruModel<T>& m) {
  const Index h = m.gru.hidden_size(), f = m.gru.input_size();
  ParamCount c;
  c.gru_params = 3 * h * f + 3 * h * h + 4 * h;
  c.fc_params = m.fc.W.size() + m.fc.b.size();
  c.tcn_params = m.tcn.param_count();
  c.total = c.gru_params + c.fc_params + c.tcn_params;
  return c;
}

/// #GRU params * (1 - gamma) + #FC params + #TCN params.
template <typename T>
double count_active_params(const TResDeltaGruModel<T>& m, double gamma) {
  if (gamma < 0 || gamma > 1)
    throw std::invalid_argument("count_active_params: gamma outside [0,1]");
  const ParamCount c = count_params(m);
  return double(c.gru_params) * (1.0 - gamma) + double(c.fc_params) +
         double(c.tcn_params);
}

/// Event-driven streaming inference. Samples are pushed in arbitrary chunks;
/// outputs are emitted once the temporal look-ahead (the non-causal TCN taps
/// and the one-sample feature look-ahead) is available, so chunked and
/// one-shot runs are bit-identical. flush() drains the tail, zero-padding
/// the TCN window and replicating the last sample as feature look-ahead.
template <typename T>
class StreamingDpd {
 public:
  explicit StreamingDpd(const TResDeltaGruModel<T>& model) : model_(&model) {
    model.validate();
    state_.reset(model.gru);
    lookahead_ = std::max<Index>(model.tcn.pad1(), 1);
  }

  std::vector<cplx> push(std::span<const cplx> samples) {
    window_.insert(window_.end(), samples.begin(), samples.end());
    received_ += static_cast<Index>(samples.size());
    std::vector<cplx> out;
    while (next_emit_ + lookahead_ < received_) {
      out.push_back(emit_one(false));
    }
    return out;
  }

  std::vector<cplx> flush() {
    std::vector<cplx> out;
    while (next_emit_ < received_) out.push_back(emit_one(true));
    return out;
  }

  const DeltaState<T>& state() const { return state_; }
  const OpCounts& ops() const { return ops_; }

  SparsityReport sparsity() const {
    return sparsity_report(state_, model_->gru.input_size(),
                           model_->gru.hidden_size());
  }

 private:
  cplx sample_at(Index t) const {
    if (t < window_first_ || t >= received_) return cplx(0, 0);
    return window_[static_cast<size_t>(t - window_first_)];
  }

  cplx emit_one(bool flushing) {
    const Index t = next_emit_;
    const auto& m = *model_;
    const Index h = m.gru.hidden_size(), f = m.gru.input_size();

    // features: look-ahead replicates the final sample once the stream ends
    const cplx xt = sample_at(t);
    const cplx xn = (t + 1 < received_) ? sample_at(t + 1) : xt;
    const auto row = detail::feature_row<T>(xt, xn);
    Vec<T> phi(f);
    for (int k = 0; k < kFeatureWidth; ++k) phi[k] = row[k];

    // delta GRU step with instrumentation
    StepStats st;
    const Vec<T> ht = delta_gru_step(m.gru, m.thresholds, state_, phi, &st);
    const double hd = double(h);
    ops_.gru_input.muls += 3 * hd * st.phi_updated;
    ops_.gru_input.adds += 3 * hd * st.phi_updated;
    ops_.gru_input.reads += 3 * hd * st.phi_updated;
    ops_.gru_hidden.muls += 3 * hd * st.h_updated;
    ops_.gru_hidden.adds += 3 * hd * st.h_updated;
    ops_.gru_hidden.reads += 3 * hd * st.h_updated;
    ops_.encode.adds += double(st.phi_total + st.h_total);
    ops_.encode.reads += 2 * double(st.phi_total + st.h_total);
    ops_.encode.writes += double(st.phi_updated + st.h_updated);
    ops_.gru_state.muls += 3 * hd;
    ops_.gru_state.adds += 3 * hd;
    ops_.gru_state.activations += 3 * hd;
    ops_.gru_state.reads += 5 * hd;
    ops_.gru_state.writes += 5 * hd;

    Vec<T> u_hat = fc_forward(m.fc, ht);
    ops_.fc.muls += 2 * hd;
    ops_.fc.adds += 2 * hd + 2;
    ops_.fc.reads += 3 * hd + 2;
    ops_.fc.writes += 2;

    // TCN residual at t; out-of-range taps multiply explicit zeros
    Vec<T> mid = m.tcn.b1;
    for (int a = 0; a < m.tcn.kernel1; ++a) {
      const Index src = t + Index(a - 1) * m.tcn.dilation1;
      const cplx xs = sample_at(src);
      Vec<T> col(2);
      col[0] = static_cast<T>(xs.real());
      col[1] = static_cast<T>(xs.imag());
      mid.noalias() += m.tcn.w1[static_cast<size_t>(a)] * col;
    }
    for (Index i = 0; i < mid.size(); ++i) mid[i] = hardswish(mid[i]);
    Vec<T> res = m.tcn.b2;
    res.noalias() += m.tcn.w2 * mid;
    for (Index i = 0; i < res.size(); ++i) res[i] = hardswish(res[i]);
    const double tmacs = double(m.tcn.kernel1 * m.tcn.c_mid * m.tcn.c_in +
                                m.tcn.c_out * m.tcn.c_mid);
    ops_.tcn.muls += tmacs;
    ops_.tcn.adds += tmacs + double(m.tcn.c_mid + m.tcn.c_out) + double(m.tcn.c_out);
    ops_.tcn.activations += double(m.tcn.c_mid + m.tcn.c_out);
    ops_.tcn.reads += tmacs + double(m.tcn.kernel1 * m.tcn.c_in) +
                      double(m.tcn.c_mid) + double(m.tcn.c_mid + m.tcn.c_out);
    ops_.tcn.writes += double(m.tcn.c_mid + m.tcn.c_out);

    ++next_emit_;
    // retain only the left TCN context
    const Index keep_from = next_emit_ - m.tcn.pad1();
    while (window_first_ < keep_from && !window_.empty()) {
      window_.pop_front();
      ++window_first_;
    }
    (void)flushing;
    return cplx(double(u_hat[0] + res[0]), double(u_hat[1] + res[1]));
  }

  const TResDeltaGruModel<T>* model_;
  DeltaState<T> state_;
  OpCounts ops_;
  std::deque<cplx> window_;
  Index window_first_ = 0;
  Index next_emit_ = 0;
  Index received_ = 0;
  Index lookahead_ = 1;
};

template <typename T>
struct ModelForwardResult {
  IQSequence u;
  SparsityReport sparsity;
  OpCounts ops;
};

/// One-shot forward over a whole sequence from reset state.
template <typename T>
ModelForwardResult<T> model_forward(const TResDeltaGruModel<T>& model,
                                    const IQSequence& x) {
  StreamingDpd<T> engine(model);
  std::vector<cplx> u =
      engine.push(std::span<const cplx>(x.samples.data(), size_t(x.size())));
  std::vector<cplx> tail = engine.flush();
  u.insert(u.end(), tail.begin(), tail.end());
  ModelForwardResult<T> out{
      IQSequence(Eigen::Map<VecXcd>(u.data(), Index(u.size())), x.sample_rate_hz),
      engine.sparsity(), engine.ops()};
  return out;
}

/// Dense reference composition (theta = 0 semantics, whole-sequence math);
/// the equivalence oracle for the streaming engine.
template <typename T>
IQSequence model_forward_dense_reference(const TResDeltaGruModel<T>& model,
                                         const IQSequence& x) {
  const FeatureSequence<T> feats = build_features<T>(x);
  const Mat<T> hs = gru_forward_dense(model.gru, feats);
  const Mat<T> res = tcn_forward(model.tcn, x);
  VecXcd u(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    const Vec<T> uh = fc_forward<T>(model.fc, hs.col(t));
    u[t] = cplx(double(uh[0] + res(0, t)), double(uh[1] + res(1, t)));
  }
  return IQSequence(std::move(u), x.sample_rate_hz);
}

}  // namespace dpd
