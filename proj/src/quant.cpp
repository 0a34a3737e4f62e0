#include "dpd/quant.hpp"

#include "dpd/tensors.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace dpd {

void QuantSpec::validate() const {
  if (n_bits < 2) throw std::invalid_argument("QuantSpec: n_bits >= 2");
  if (!(scale > 0)) throw std::invalid_argument("QuantSpec: scale must be > 0");
  (void)const_cast<QuantSpec*>(this)->scale_exp();
}

int QuantSpec::scale_exp() const {
  const int k = static_cast<int>(std::lround(std::log2(scale)));
  if (std::ldexp(1.0, k) != scale)
    throw std::invalid_argument("QuantSpec: scale is not a power of two");
  return k;
}

double fake_quant(double x, const QuantSpec& spec) {
  const double v = std::clamp(x / spec.scale, spec.qmin(), spec.qmax());
  return spec.scale * round_half_away(v);
}

double ste_backward(double upstream_grad, double x, const QuantSpec& spec) {
  const double v = x / spec.scale;
  return (v >= spec.qmin() && v <= spec.qmax()) ? upstream_grad : 0.0;
}

double snap_scale_pow2(double s) {
  if (!(s > 0)) throw std::invalid_argument("snap_scale_pow2: s must be > 0");
  const double e = std::floor(std::log2(s) + 0.5);  // ties round up
  return std::ldexp(1.0, static_cast<int>(e));
}

namespace qp {
std::vector<std::string> all_activation_points() {
  return {kPhi, kMr, kMz,      kMnphi,   kMnh,     kR,       kZ,       kN,
          kH,   kUhat, kTcnX, kTcnPre1, kTcnAct1, kTcnPre2, kTcnAct2, kU};
}
}  // namespace qp

const QuantizedTensor& QuantizedModel::weight(const std::string& name) const {
  auto it = weights.find(name);
  if (it == weights.end())
    throw std::runtime_error("QuantizedModel: missing tensor " + name);
  return it->second;
}

const QuantSpec& QuantizedModel::act(const std::string& name) const {
  auto it = acts.find(name);
  if (it == acts.end())
    throw std::runtime_error("QuantizedModel: missing activation spec " + name);
  return it->second;
}

namespace {

double snapped_scale_for(double max_abs, double qmax) {
  if (!(max_abs > 0)) return 1.0;  // degenerate all-zero tensor
  return snap_scale_pow2(max_abs / qmax);
}

struct MaxAbs {
  std::map<std::string, double> v;
  void see(const std::string& k, double x) {
    double& m = v[k];
    m = std::max(m, std::abs(x));
  }
};

// Feature row of x at step t with end-of-sequence replication.
Vec<double> feature_col(const IQSequence& x, Index t) {
  const cplx xt = x.samples[t];
  const cplx xn = x.samples[std::min(t + 1, x.size() - 1)];
  const auto row = detail::feature_row<double>(xt, xn);
  Vec<double> phi(kFeatureWidth);
  for (int k = 0; k < kFeatureWidth; ++k) phi[k] = row[k];
  return phi;
}

}  // namespace

ScaleTable calibrate_scales(const TResDeltaGruModel<double>& model,
                            const IQSequence& calibration,
                            const QuantModelConfig& cfg) {
  cfg.validate();
  model.validate();
  const double wqmax = std::ldexp(1.0, cfg.weight_bits - 1) - 1.0;
  const double aqmax = std::ldexp(1.0, cfg.activation_bits - 1) - 1.0;

  ScaleTable table;
  double w1_max = 0;
  for (const auto& tv : tensor_views(model)) {
    if (tv.name.find(".b") != std::string::npos) continue;  // biases ride on acts
    double ma = 0;
    for (Index i = 0; i < tv.size(); ++i) ma = std::max(ma, std::abs(tv.data[i]));
    if (tv.name.rfind("tcn.w1.", 0) == 0) {
      w1_max = std::max(w1_max, ma);
      continue;
    }
    table[tv.name] = snapped_scale_for(ma, wqmax);
  }
  // the dilated-conv taps form one kernel and share one scale
  for (size_t a = 0; a < model.tcn.w1.size(); ++a)
    table["tcn.w1." + std::to_string(a)] = snapped_scale_for(w1_max, wqmax);

  // Full-precision forward trace (delta form, thresholds as configured).
  MaxAbs ma;
  const Index n = calibration.size();
  const Index h = model.gru.hidden_size();
  DeltaState<double> ds;
  ds.reset(model.gru);
  for (Index t = 0; t < n; ++t) {
    const Vec<double> phi = feature_col(calibration, t);
    for (Index k = 0; k < phi.size(); ++k) ma.see(qp::kPhi, phi[k]);
    const Vec<double> ht = delta_gru_step(model.gru, model.thresholds, ds, phi);
    for (Index i = 0; i < h; ++i) {
      ma.see(qp::kMr, ds.M_r[i]);
      ma.see(qp::kMz, ds.M_z[i]);
      ma.see(qp::kMnphi, ds.M_nphi[i]);
      ma.see(qp::kMnh, ds.M_nh[i]);
      ma.see(qp::kH, ht[i]);
    }
    const Vec<double> uh = fc_forward(model.fc, ht);
    ma.see(qp::kUhat, uh[0]);
    ma.see(qp::kUhat, uh[1]);
  }
  ma.see(qp::kR, 1.0);
  ma.see(qp::kZ, 1.0);
  ma.see(qp::kN, 1.0);
  const Mat<double> xiq = iq_rows<double>(calibration.samples);
  const Mat<double> res = tcn_forward(model.tcn, xiq);
  for (Index t = 0; t < n; ++t) {
    ma.see(qp::kTcnX, xiq(0, t));
    ma.see(qp::kTcnX, xiq(1, t));
    const Vec<double> pre1 = tcn_layer1_preact_at(model.tcn, xiq, t);
    for (Index i = 0; i < pre1.size(); ++i) {
      ma.see(qp::kTcnPre1, pre1[i]);
      ma.see(qp::kTcnAct1, hardswish(pre1[i]));
    }
    Vec<double> a1 = pre1;
    for (Index i = 0; i < a1.size(); ++i) a1[i] = hardswish(a1[i]);
    const Vec<double> pre2 = model.tcn.b2 + model.tcn.w2 * a1;
    for (Index i = 0; i < pre2.size(); ++i) ma.see(qp::kTcnPre2, pre2[i]);
    ma.see(qp::kTcnAct2, res(0, t));
    ma.see(qp::kTcnAct2, res(1, t));
  }
  // final output: residual sum bound
  {
    StreamingDpd<double> engine(model);
    auto u = engine.push(
        std::span<const cplx>(calibration.samples.data(), size_t(n)));
    auto tail = engine.flush();
    u.insert(u.end(), tail.begin(), tail.end());
    for (const cplx& c : u) {
      ma.see(qp::kU, c.real());
      ma.see(qp::kU, c.imag());
    }
  }
  for (const auto& name : qp::all_activation_points())
    table[name] = snapped_scale_for(ma.v[name], aqmax);
  return table;
}

QuantizedModel quantize_model(const TResDeltaGruModel<double>& model,
                              const ScaleTable& scales,
                              const QuantModelConfig& cfg) {
  cfg.validate();
  model.validate();
  QuantizedModel qm;
  qm.hidden = model.gru.hidden_size();
  qm.tcn_kernel1 = model.tcn.kernel1;
  qm.tcn_dilation1 = model.tcn.dilation1;
  qm.tcn_c_in = model.tcn.c_in;
  qm.tcn_c_mid = model.tcn.c_mid;
  qm.tcn_c_out = model.tcn.c_out;
  qm.cfg = cfg;
  qm.thresholds = model.thresholds;

  auto scale_at = [&](const std::string& name) {
    auto it = scales.find(name);
    if (it == scales.end())
      throw std::invalid_argument("quantize_model: no scale for " + name);
    return it->second;
  };

  for (const auto& name : qp::all_activation_points()) {
    QuantSpec spec;
    spec.n_bits = cfg.activation_bits;
    spec.scale = scale_at(name);
    spec.target = QuantSpec::Target::activations;
    spec.validate();
    qm.acts[name] = spec;
  }

  auto quantize_tensor = [](const double* data, Index rows, Index cols,
                            double scale, int bits) {
    QuantizedTensor qt;
    qt.n_bits = bits;
    QuantSpec spec;
    spec.n_bits = bits;
    spec.scale = scale;
    qt.scale_exp = spec.scale_exp();
    qt.q.resize(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) {
        const double v =
            std::clamp(data[j * rows + i] / scale, spec.qmin(), spec.qmax());
        qt.q(i, j) = static_cast<std::int32_t>(round_half_away(v));
      }
    return qt;
  };

  // Biases live at their accumulator's activation scale with accumulator
  // (32-bit) headroom.
  const std::map<std::string, std::string> bias_point = {
      {"gru.b_ir", qp::kMr},   {"gru.b_iz", qp::kMz}, {"gru.b_in", qp::kMnphi},
      {"gru.b_hn", qp::kMnh},  {"fc.b", qp::kUhat},   {"tcn.b1", qp::kTcnPre1},
      {"tcn.b2", qp::kTcnPre2}};

  for (const auto& tv : tensor_views(model)) {
    auto bp = bias_point.find(tv.name);
    if (bp != bias_point.end()) {
      qm.weights[tv.name] = quantize_tensor(tv.data, tv.rows, tv.cols,
                                            scale_at(bp->second), 32);
    } else {
      qm.weights[tv.name] = quantize_tensor(tv.data, tv.rows, tv.cols,
                                            scale_at(tv.name), cfg.weight_bits);
    }
  }
  return qm;
}

TResDeltaGruModel<double> dequantize_model(const QuantizedModel& qm) {
  std::mt19937_64 rng(0);
  TResDeltaGruModel<double> m = init_model<double>(qm.hidden, qm.thresholds, rng);
  m.tcn = init_tcn<double>(rng, qm.tcn_c_in, qm.tcn_c_mid, qm.tcn_c_out,
                           qm.tcn_kernel1, qm.tcn_dilation1);
  for (auto& tv : tensor_views(m)) {
    const Mat<double> deq = qm.weight(tv.name).dequantize();
    if (deq.rows() != tv.rows || deq.cols() != tv.cols)
      throw std::runtime_error("dequantize_model: shape mismatch for " + tv.name);
    for (Index j = 0; j < tv.cols; ++j)
      for (Index i = 0; i < tv.rows; ++i) tv.data[j * tv.rows + i] = deq(i, j);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Fake-quant reference forward (double arithmetic, fake_quant at each point)
// ---------------------------------------------------------------------------

QuantForwardResult fakequant_forward(const QuantizedModel& qm, const IQSequence& x,
                                     bool keep_trace) {
  const Index n = x.size();
  const Index h = qm.hidden;
  const TResDeltaGruModel<double> m = dequantize_model(qm);

  const QuantSpec &sPhi = qm.act(qp::kPhi), &sMr = qm.act(qp::kMr),
                  &sMz = qm.act(qp::kMz), &sMnphi = qm.act(qp::kMnphi),
                  &sMnh = qm.act(qp::kMnh), &sR = qm.act(qp::kR),
                  &sZ = qm.act(qp::kZ), &sN = qm.act(qp::kN),
                  &sH = qm.act(qp::kH), &sUhat = qm.act(qp::kUhat),
                  &sTcnX = qm.act(qp::kTcnX), &sPre1 = qm.act(qp::kTcnPre1),
                  &sAct1 = qm.act(qp::kTcnAct1), &sPre2 = qm.act(qp::kTcnPre2),
                  &sAct2 = qm.act(qp::kTcnAct2), &sU = qm.act(qp::kU);

  QuantForwardResult out;
  out.sparsity.input_size = kFeatureWidth;
  out.sparsity.hidden_size = h;
  auto trace = [&](const char* point, double v) {
    if (keep_trace) out.trace[point].push_back(v);
  };

  Vec<double> phi_buf = Vec<double>::Zero(kFeatureWidth);
  Vec<double> h_buf = Vec<double>::Zero(h), h_prev = Vec<double>::Zero(h);
  Vec<double> Mr = m.gru.b_ir, Mz = m.gru.b_iz, Mnphi = m.gru.b_in,
              Mnh = m.gru.b_hn;

  // TCN input samples quantized once for the whole sequence
  Mat<double> xq(2, n);
  for (Index t = 0; t < n; ++t) {
    xq(0, t) = fake_quant(x.samples[t].real(), sTcnX);
    xq(1, t) = fake_quant(x.samples[t].imag(), sTcnX);
    trace(qp::kTcnX, xq(0, t));
    trace(qp::kTcnX, xq(1, t));
  }

  VecXcd u(n);
  for (Index t = 0; t < n; ++t) {
    Vec<double> phi = feature_col(x, t);
    for (Index k = 0; k < phi.size(); ++k) {
      phi[k] = fake_quant(phi[k], sPhi);
      trace(qp::kPhi, phi[k]);
    }

    Vec<double> acc_r = Vec<double>::Zero(h), acc_z = Vec<double>::Zero(h),
                acc_nphi = Vec<double>::Zero(h), acc_nh = Vec<double>::Zero(h);
    for (Index k = 0; k < kFeatureWidth; ++k) {
      const double d = phi[k] - phi_buf[k];
      out.sparsity.phi_total++;
      if (std::abs(d) > qm.thresholds.theta_phi) {
        acc_r.noalias() += d * m.gru.W_ir.col(k);
        acc_z.noalias() += d * m.gru.W_iz.col(k);
        acc_nphi.noalias() += d * m.gru.W_in.col(k);
        phi_buf[k] = phi[k];
      } else if (qm.thresholds.theta_phi > 0) {
        out.sparsity.phi_skipped++;
      }
    }
    if (t > 0) {
      for (Index k = 0; k < h; ++k) {
        const double d = h_prev[k] - h_buf[k];
        out.sparsity.h_total++;
        if (std::abs(d) > qm.thresholds.theta_h) {
          acc_r.noalias() += d * m.gru.W_hr.col(k);
          acc_z.noalias() += d * m.gru.W_hz.col(k);
          acc_nh.noalias() += d * m.gru.W_hn.col(k);
          h_buf[k] = h_prev[k];
        } else if (qm.thresholds.theta_h > 0) {
          out.sparsity.h_skipped++;
        }
      }
    }

    Vec<double> ht(h), uh(2);
    for (Index i = 0; i < h; ++i) {
      Mr[i] = fake_quant(Mr[i] + acc_r[i], sMr);
      Mz[i] = fake_quant(Mz[i] + acc_z[i], sMz);
      Mnphi[i] = fake_quant(Mnphi[i] + acc_nphi[i], sMnphi);
      Mnh[i] = fake_quant(Mnh[i] + acc_nh[i], sMnh);
      trace(qp::kMr, Mr[i]);
      trace(qp::kMz, Mz[i]);
      trace(qp::kMnphi, Mnphi[i]);
      trace(qp::kMnh, Mnh[i]);
      const double r = fake_quant(stable_sigmoid(Mr[i]), sR);
      const double z = fake_quant(stable_sigmoid(Mz[i]), sZ);
      const double nn = fake_quant(std::tanh(Mnphi[i] + r * Mnh[i]), sN);
      trace(qp::kR, r);
      trace(qp::kZ, z);
      trace(qp::kN, nn);
      ht[i] = fake_quant((1.0 - z) * h_prev[i] + z * nn, sH);
      trace(qp::kH, ht[i]);
    }
    h_prev = ht;

    for (Index i = 0; i < 2; ++i) {
      uh[i] = fake_quant(m.fc.W.row(i).dot(ht) + m.fc.b[i], sUhat);
      trace(qp::kUhat, uh[i]);
    }

    Vec<double> pre1 = m.tcn.b1;
    for (int a = 0; a < m.tcn.kernel1; ++a) {
      const Index src = t + Index(a - 1) * m.tcn.dilation1;
      if (src < 0 || src >= n) continue;  // zero-padded taps contribute zero
      pre1.noalias() += m.tcn.w1[static_cast<size_t>(a)] * xq.col(src);
    }
    Vec<double> a1(m.tcn.c_mid);
    for (Index i = 0; i < pre1.size(); ++i) {
      pre1[i] = fake_quant(pre1[i], sPre1);
      trace(qp::kTcnPre1, pre1[i]);
      a1[i] = fake_quant(hardswish(pre1[i]), sAct1);
      trace(qp::kTcnAct1, a1[i]);
    }
    Vec<double> pre2 = m.tcn.b2 + m.tcn.w2 * a1;
    Vec<double> a2(m.tcn.c_out);
    for (Index i = 0; i < pre2.size(); ++i) {
      pre2[i] = fake_quant(pre2[i], sPre2);
      trace(qp::kTcnPre2, pre2[i]);
      a2[i] = fake_quant(hardswish(pre2[i]), sAct2);
      trace(qp::kTcnAct2, a2[i]);
    }

    const double uI = fake_quant(uh[0] + a2[0], sU);
    const double uQ = fake_quant(uh[1] + a2[1], sU);
    trace(qp::kU, uI);
    trace(qp::kU, uQ);
    u[t] = cplx(uI, uQ);
  }

  out.sparsity.gamma_phi = out.sparsity.phi_total
                               ? double(out.sparsity.phi_skipped) /
                                     double(out.sparsity.phi_total)
                               : 0.0;
  out.sparsity.gamma_h =
      out.sparsity.h_total
          ? double(out.sparsity.h_skipped) / double(out.sparsity.h_total)
          : 0.0;
  out.u = IQSequence(std::move(u), x.sample_rate_hz);
  return out;
}

// ---------------------------------------------------------------------------
// Integer forward (int64 MACs, shift rescaling)
// ---------------------------------------------------------------------------

namespace {

using i64 = std::int64_t;

// round_half_away(v / 2^k) for k >= 0
i64 rshift_round(i64 v, int k) {
  if (k == 0) return v;
  const i64 half = i64(1) << (k - 1);
  return v >= 0 ? (v + half) >> k : -(((-v) + half) >> k);
}

struct IntQuantizer {
  const QuantSpec* spec;
  int exp;
  i64 qmin, qmax;

  explicit IntQuantizer(const QuantSpec& s)
      : spec(&s),
        exp(s.scale_exp()),
        qmin(static_cast<i64>(s.qmin())),
        qmax(static_cast<i64>(s.qmax())) {}

  // requantize an integer value held at scale 2^in_exp
  i64 requant(i64 v, int in_exp) const {
    const int shift = in_exp - exp;
    i64 q = shift >= 0 ? (v << shift) : rshift_round(v, -shift);
    return std::clamp(q, qmin, qmax);
  }

  // quantize an arbitrary real value (used after activation functions)
  i64 from_real(double x) const {
    const double v = std::clamp(x / spec->scale, double(qmin), double(qmax));
    return static_cast<i64>(round_half_away(v));
  }

  double real(i64 q) const { return double(q) * spec->scale; }
};

}  // namespace

int default_accumulator_bits(int activation_bits) {
  return activation_bits <= 12 ? 32 : 48;
}

QuantForwardResult integer_forward(const QuantizedModel& qm, const IQSequence& x,
                                   bool keep_trace, int accumulator_bits) {
  if (accumulator_bits == 0)
    accumulator_bits = default_accumulator_bits(qm.cfg.activation_bits);
  const i64 acc_limit = (i64(1) << (accumulator_bits - 1)) - 1;

  const Index n = x.size();
  const Index h = qm.hidden;

  const QuantizedTensor &Wir = qm.weight("gru.W_ir"), &Wiz = qm.weight("gru.W_iz"),
                        &Win = qm.weight("gru.W_in"), &Whr = qm.weight("gru.W_hr"),
                        &Whz = qm.weight("gru.W_hz"), &Whn = qm.weight("gru.W_hn"),
                        &bir = qm.weight("gru.b_ir"), &biz = qm.weight("gru.b_iz"),
                        &bin = qm.weight("gru.b_in"), &bhn = qm.weight("gru.b_hn"),
                        &Wy = qm.weight("fc.W"), &by = qm.weight("fc.b"),
                        &b1 = qm.weight("tcn.b1"), &w2 = qm.weight("tcn.w2"),
                        &b2 = qm.weight("tcn.b2");
  std::vector<const QuantizedTensor*> w1taps;
  for (int a = 0; a < qm.tcn_kernel1; ++a)
    w1taps.push_back(&qm.weight("tcn.w1." + std::to_string(a)));
  for (const auto* tap : w1taps)
    if (tap->scale_exp != w1taps[0]->scale_exp)
      throw std::runtime_error(
          "integer_forward: dilated-conv taps must share one scale");
  const int c_mid = qm.tcn_c_mid, c_out = qm.tcn_c_out;

  const IntQuantizer qPhi(qm.act(qp::kPhi)), qMr(qm.act(qp::kMr)),
      qMz(qm.act(qp::kMz)), qMnphi(qm.act(qp::kMnphi)), qMnh(qm.act(qp::kMnh)),
      qR(qm.act(qp::kR)), qZ(qm.act(qp::kZ)), qN(qm.act(qp::kN)),
      qH(qm.act(qp::kH)), qUhat(qm.act(qp::kUhat)), qTcnX(qm.act(qp::kTcnX)),
      qPre1(qm.act(qp::kTcnPre1)), qAct1(qm.act(qp::kTcnAct1)),
      qPre2(qm.act(qp::kTcnPre2)), qAct2(qm.act(qp::kTcnAct2)), qU(qm.act(qp::kU));

  QuantForwardResult out;
  out.sparsity.input_size = kFeatureWidth;
  out.sparsity.hidden_size = h;
  auto trace = [&](const char* point, double v) {
    if (keep_trace) out.trace[point].push_back(v);
  };
  auto audit = [&](const char* tensor, i64 acc) {
    double& m = out.max_abs_acc[tensor];
    const double a = std::abs(double(acc));
    m = std::max(m, a);
    if (std::abs(acc) > acc_limit)
      throw std::runtime_error(std::string("integer_forward: accumulator overflow in ") +
                               tensor);
  };

  using IVec = Eigen::Matrix<i64, Eigen::Dynamic, 1>;
  IVec phi_buf = IVec::Zero(kFeatureWidth);
  IVec h_buf = IVec::Zero(h), h_prev = IVec::Zero(h);
  IVec Mr(h), Mz(h), Mnphi(h), Mnh(h);
  for (Index i = 0; i < h; ++i) {
    Mr[i] = qMr.requant(bir.q(i, 0), bir.scale_exp);
    Mz[i] = qMz.requant(biz.q(i, 0), biz.scale_exp);
    Mnphi[i] = qMnphi.requant(bin.q(i, 0), bin.scale_exp);
    Mnh[i] = qMnh.requant(bhn.q(i, 0), bhn.scale_exp);
  }

  Eigen::Matrix<i64, 2, Eigen::Dynamic> xq(2, n);
  for (Index t = 0; t < n; ++t) {
    xq(0, t) = qTcnX.from_real(x.samples[t].real());
    xq(1, t) = qTcnX.from_real(x.samples[t].imag());
    trace(qp::kTcnX, qTcnX.real(xq(0, t)));
    trace(qp::kTcnX, qTcnX.real(xq(1, t)));
  }

  // exponents of the two GRU product groups
  const int e_in_r = Wir.scale_exp + qPhi.exp;  // input-side products
  const int e_hid_r = Whr.scale_exp + qH.exp;   // hidden-side products

  VecXcd u(n);
  for (Index t = 0; t < n; ++t) {
    const Vec<double> phi_real = feature_col(x, t);
    IVec phi(kFeatureWidth);
    for (Index k = 0; k < kFeatureWidth; ++k) {
      phi[k] = qPhi.from_real(phi_real[k]);
      trace(qp::kPhi, qPhi.real(phi[k]));
    }

    IVec acc_in_r = IVec::Zero(h), acc_in_z = IVec::Zero(h),
         acc_in_n = IVec::Zero(h);
    for (Index k = 0; k < kFeatureWidth; ++k) {
      const i64 d = phi[k] - phi_buf[k];
      out.sparsity.phi_total++;
      if (std::abs(double(d)) * qPhi.spec->scale > qm.thresholds.theta_phi) {
        for (Index i = 0; i < h; ++i) {
          acc_in_r[i] += d * i64(Wir.q(i, k));
          audit("gru.W_ir", acc_in_r[i]);
          acc_in_z[i] += d * i64(Wiz.q(i, k));
          audit("gru.W_iz", acc_in_z[i]);
          acc_in_n[i] += d * i64(Win.q(i, k));
          audit("gru.W_in", acc_in_n[i]);
        }
        phi_buf[k] = phi[k];
      } else if (qm.thresholds.theta_phi > 0) {
        out.sparsity.phi_skipped++;
      }
    }
    IVec acc_hid_r = IVec::Zero(h), acc_hid_z = IVec::Zero(h),
         acc_hid_n = IVec::Zero(h);
    if (t > 0) {
      for (Index k = 0; k < h; ++k) {
        const i64 d = h_prev[k] - h_buf[k];
        out.sparsity.h_total++;
        if (std::abs(double(d)) * qH.spec->scale > qm.thresholds.theta_h) {
          for (Index i = 0; i < h; ++i) {
            acc_hid_r[i] += d * i64(Whr.q(i, k));
            audit("gru.W_hr", acc_hid_r[i]);
            acc_hid_z[i] += d * i64(Whz.q(i, k));
            audit("gru.W_hz", acc_hid_z[i]);
            acc_hid_n[i] += d * i64(Whn.q(i, k));
            audit("gru.W_hn", acc_hid_n[i]);
          }
          h_buf[k] = h_prev[k];
        } else if (qm.thresholds.theta_h > 0) {
          out.sparsity.h_skipped++;
        }
      }
    }

    // merge accumulators at a common exponent, then requantize to M scales
    auto merge3 = [](i64 a, int ea, i64 b, int eb, i64 c, int ec, int* e_out) {
      const int e = std::min({ea, eb, ec});
      *e_out = e;
      return (a << (ea - e)) + (b << (eb - e)) + (c << (ec - e));
    };
    if (qZ.exp > 0)
      throw std::runtime_error("integer_forward: update-gate scale exceeds 1");
    IVec ht(h), uh_q(2);
    for (Index i = 0; i < h; ++i) {
      int e;
      i64 v = merge3(Mr[i], qMr.exp, acc_in_r[i], e_in_r, acc_hid_r[i], e_hid_r, &e);
      Mr[i] = qMr.requant(v, e);
      v = merge3(Mz[i], qMz.exp, acc_in_z[i], Wiz.scale_exp + qPhi.exp,
                 acc_hid_z[i], Whz.scale_exp + qH.exp, &e);
      Mz[i] = qMz.requant(v, e);
      const int e_in_n = Win.scale_exp + qPhi.exp;
      v = merge3(Mnphi[i], qMnphi.exp, acc_in_n[i], e_in_n, i64(0), e_in_n, &e);
      Mnphi[i] = qMnphi.requant(v, e);
      const int e_hid_n = Whn.scale_exp + qH.exp;
      v = merge3(Mnh[i], qMnh.exp, acc_hid_n[i], e_hid_n, i64(0), e_hid_n, &e);
      Mnh[i] = qMnh.requant(v, e);
      trace(qp::kMr, qMr.real(Mr[i]));
      trace(qp::kMz, qMz.real(Mz[i]));
      trace(qp::kMnphi, qMnphi.real(Mnphi[i]));
      trace(qp::kMnh, qMnh.real(Mnh[i]));

      const i64 r = qR.from_real(stable_sigmoid(qMr.real(Mr[i])));
      const i64 z = qZ.from_real(stable_sigmoid(qMz.real(Mz[i])));
      trace(qp::kR, qR.real(r));
      trace(qp::kZ, qZ.real(z));
      // n pre-activation: M_nphi + r (.) M_nh, exact at exponent
      // min(qMnphi.exp, qR.exp + qMnh.exp)
      const int e_rn = qR.exp + qMnh.exp;
      const int e_arg = std::min(qMnphi.exp, e_rn);
      const i64 arg =
          (Mnphi[i] << (qMnphi.exp - e_arg)) + ((r * Mnh[i]) << (e_rn - e_arg));
      const i64 nn = qN.from_real(std::tanh(double(arg) * std::ldexp(1.0, e_arg)));
      trace(qp::kN, qN.real(nn));

      // h = (1-z) h_prev + z n at exponent qZ.exp + min(qH.exp, qN.exp)
      const i64 one = i64(1) << (-qZ.exp);  // gate scales are <= 1
      const int e_zh = qZ.exp + qH.exp, e_zn = qZ.exp + qN.exp;
      const int e_h = std::min(e_zh, e_zn);
      const i64 hv = ((one - z) * h_prev[i]) << (e_zh - e_h);
      const i64 nv = (z * nn) << (e_zn - e_h);
      ht[i] = qH.requant(hv + nv, e_h);
      trace(qp::kH, qH.real(ht[i]));
    }
    h_prev = ht;

    for (Index i = 0; i < 2; ++i) {
      i64 acc = 0;
      for (Index k = 0; k < h; ++k) {
        acc += i64(Wy.q(i, k)) * ht[k];
        audit("fc.W", acc);
      }
      const int e_acc = Wy.scale_exp + qH.exp;
      const int e = std::min(e_acc, by.scale_exp);
      const i64 v = (acc << (e_acc - e)) + (i64(by.q(i, 0)) << (by.scale_exp - e));
      uh_q[i] = qUhat.requant(v, e);
      trace(qp::kUhat, qUhat.real(uh_q[i]));
    }

    IVec a2(c_out);
    {
      IVec acc1 = IVec::Zero(c_mid);
      for (int a = 0; a < qm.tcn_kernel1; ++a) {
        const Index src = t + Index(a) * qm.tcn_dilation1 - qm.tcn_dilation1;
        if (src < 0 || src >= n) continue;
        for (Index i = 0; i < c_mid; ++i) {
          acc1[i] += i64(w1taps[size_t(a)]->q.coeff(i, 0)) * xq(0, src) +
                     i64(w1taps[size_t(a)]->q.coeff(i, 1)) * xq(1, src);
          audit("tcn.w1", acc1[i]);
        }
      }
      const int e_acc1 = w1taps[0]->scale_exp + qTcnX.exp;
      IVec act1(c_mid);
      for (Index i = 0; i < c_mid; ++i) {
        const int e = std::min(e_acc1, b1.scale_exp);
        const i64 v =
            (acc1[i] << (e_acc1 - e)) + (i64(b1.q(i, 0)) << (b1.scale_exp - e));
        const i64 p1 = qPre1.requant(v, e);
        trace(qp::kTcnPre1, qPre1.real(p1));
        act1[i] = qAct1.from_real(hardswish(qPre1.real(p1)));
        trace(qp::kTcnAct1, qAct1.real(act1[i]));
      }
      for (Index i = 0; i < c_out; ++i) {
        i64 acc = 0;
        for (Index k = 0; k < c_mid; ++k) {
          acc += i64(w2.q(i, k)) * act1[k];
          audit("tcn.w2", acc);
        }
        const int e_acc = w2.scale_exp + qAct1.exp;
        const int e = std::min(e_acc, b2.scale_exp);
        const i64 v =
            (acc << (e_acc - e)) + (i64(b2.q(i, 0)) << (b2.scale_exp - e));
        const i64 p2 = qPre2.requant(v, e);
        trace(qp::kTcnPre2, qPre2.real(p2));
        a2[i] = qAct2.from_real(hardswish(qPre2.real(p2)));
        trace(qp::kTcnAct2, qAct2.real(a2[i]));
      }
    }

    // u = u_hat + tcn residual
    const int e_sum = std::min(qUhat.exp, qAct2.exp);
    IVec uq(2);
    for (Index i = 0; i < 2; ++i) {
      const i64 v =
          (uh_q[i] << (qUhat.exp - e_sum)) + (a2[i] << (qAct2.exp - e_sum));
      uq[i] = qU.requant(v, e_sum);
      trace(qp::kU, qU.real(uq[i]));
    }
    u[t] = cplx(qU.real(uq[0]), qU.real(uq[1]));
  }

  out.sparsity.gamma_phi = out.sparsity.phi_total
                               ? double(out.sparsity.phi_skipped) /
                                     double(out.sparsity.phi_total)
                               : 0.0;
  out.sparsity.gamma_h =
      out.sparsity.h_total
          ? double(out.sparsity.h_skipped) / double(out.sparsity.h_total)
          : 0.0;
  out.u = IQSequence(std::move(u), x.sample_rate_hz);
  return out;
}

}  // namespace dpd
