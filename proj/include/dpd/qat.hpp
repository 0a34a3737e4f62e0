#pragma once

#include "dpd/autograd.hpp"
#include "dpd/quant.hpp"

namespace dpd {

/// Resolved quantization formats for every point of the predistorter during
/// quantization-aware training. Scales are plain positive reals here; they
/// are snapped to powers of two at epoch boundaries.
struct QatPoints {
  QuantSpec phi, Mr, Mz, Mnphi, Mnh, r, z, n, h, uhat;
  QuantSpec x, pre1, act1, pre2, act2, u;
  std::map<std::string, QuantSpec> weight_specs;

  static QatPoints from_table(const ScaleTable& table, const QuantModelConfig& cfg);
  ScaleTable to_table() const;
  void snap_all();
};

inline QatPoints QatPoints::from_table(const ScaleTable& table,
                                       const QuantModelConfig& cfg) {
  auto act = [&](const char* name) {
    QuantSpec s;
    s.n_bits = cfg.activation_bits;
    s.target = QuantSpec::Target::activations;
    auto it = table.find(name);
    if (it == table.end())
      throw std::invalid_argument(std::string("QatPoints: missing scale ") + name);
    s.scale = it->second;
    return s;
  };
  QatPoints p;
  p.phi = act(qp::kPhi);
  p.Mr = act(qp::kMr);
  p.Mz = act(qp::kMz);
  p.Mnphi = act(qp::kMnphi);
  p.Mnh = act(qp::kMnh);
  p.r = act(qp::kR);
  p.z = act(qp::kZ);
  p.n = act(qp::kN);
  p.h = act(qp::kH);
  p.uhat = act(qp::kUhat);
  p.x = act(qp::kTcnX);
  p.pre1 = act(qp::kTcnPre1);
  p.act1 = act(qp::kTcnAct1);
  p.pre2 = act(qp::kTcnPre2);
  p.act2 = act(qp::kTcnAct2);
  p.u = act(qp::kU);
  for (const auto& [name, scale] : table) {
    if (name.rfind("act.", 0) == 0) continue;
    QuantSpec s;
    s.n_bits = cfg.weight_bits;
    s.target = QuantSpec::Target::weights;
    s.scale = scale;
    p.weight_specs[name] = s;
  }
  return p;
}

inline ScaleTable QatPoints::to_table() const {
  ScaleTable t;
  t[qp::kPhi] = phi.scale;
  t[qp::kMr] = Mr.scale;
  t[qp::kMz] = Mz.scale;
  t[qp::kMnphi] = Mnphi.scale;
  t[qp::kMnh] = Mnh.scale;
  t[qp::kR] = r.scale;
  t[qp::kZ] = z.scale;
  t[qp::kN] = n.scale;
  t[qp::kH] = h.scale;
  t[qp::kUhat] = uhat.scale;
  t[qp::kTcnX] = x.scale;
  t[qp::kTcnPre1] = pre1.scale;
  t[qp::kTcnAct1] = act1.scale;
  t[qp::kTcnPre2] = pre2.scale;
  t[qp::kTcnAct2] = act2.scale;
  t[qp::kU] = u.scale;
  for (const auto& [name, spec] : weight_specs) t[name] = spec.scale;
  return t;
}

inline void QatPoints::snap_all() {
  for (QuantSpec* s : {&phi, &Mr, &Mz, &Mnphi, &Mnh, &r, &z, &n, &h, &uhat, &x,
                       &pre1, &act1, &pre2, &act2, &u})
    s->scale = snap_scale_pow2(s->scale);
  for (auto& [name, spec] : weight_specs) spec.scale = snap_scale_pow2(spec.scale);
}

/// Quantize x elementwise, saving the scale-gradient coefficient:
/// round(x/s) - x/s where x/s is in range, the clip rail outside. The
/// straight-through mask is |coef| <= 1/2.
template <typename T>
Mat<T> fq_node(const Mat<T>& x, const QuantSpec& s,
               std::type_identity_t<Mat<T>*> coef) {
  Mat<T> out(x.rows(), x.cols());
  if (coef) coef->resize(x.rows(), x.cols());
  const double qmin = s.qmin(), qmax = s.qmax();
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      const double v = double(x(i, j)) / s.scale;
      double c, q;
      if (v < qmin) {
        q = qmin;
        c = qmin;
      } else if (v > qmax) {
        q = qmax;
        c = qmax;
      } else {
        q = round_half_away(v);
        c = q - v;
      }
      out(i, j) = static_cast<T>(s.scale * q);
      if (coef) (*coef)(i, j) = static_cast<T>(c);
    }
  return out;
}

template <typename T>
inline T ste_mask(T coef) {
  return std::abs(double(coef)) <= 0.5 ? T(1) : T(0);
}

template <typename T>
struct QatCache {
  // quantized parameters and their scale-gradient coefficients
  GruParams<T> gru_q, gru_c;
  FcParams<T> fc_q, fc_c;
  TcnParams<T> tcn_q, tcn_c;
  // quantized step trajectories (rec.m holds the M_nh accumulator)
  RecurrentCache<T> rec;
  BatchSeq<T> phi_c, Mr_c, Mz_c, Mnphi_c, Mnh_c, r_c, z_c, n_c, h_c, uhat_c;
  BatchSeq<T> uhat;
  // TCN path
  BatchSeq<T> x_q, x_c, pre1_q, pre1_c, act1_q, act1_c, pre2_c, act2_q, act2_c;
  BatchSeq<T> u, u_c;
};

/// Fixed-point forward of the predistorter with fake quantization at every
/// point, the delta thresholds applied to quantized values, and everything
/// the straight-through backward needs cached.
template <typename T>
BatchSeq<T> qat_forward_cached(const TResDeltaGruModel<T>& model,
                               const QatPoints& pts, const BatchSeq<T>& phi,
                               const BatchSeq<T>& x_iq, QatCache<T>& cache) {
  const Index steps = static_cast<Index>(phi.size());
  const Index h = model.gru.hidden_size(), b = phi[0].cols();
  const Index f = model.gru.input_size();

  auto wspec = [&](const char* name) {
    auto it = pts.weight_specs.find(name);
    if (it == pts.weight_specs.end())
      throw std::invalid_argument(std::string("qat: missing weight spec ") + name);
    return it->second;
  };

  // quantize weights once per call; biases ride at accumulator scales with
  // 32-bit headroom (their STE masks never clip in practice)
  auto bias_spec = [&](const QuantSpec& acc) {
    QuantSpec s = acc;
    s.n_bits = 32;
    return s;
  };
  cache.gru_q = model.gru;
  cache.gru_c = zeros_like(model.gru);
  cache.gru_q.W_ir = fq_node(model.gru.W_ir, wspec("gru.W_ir"), &cache.gru_c.W_ir);
  cache.gru_q.W_iz = fq_node(model.gru.W_iz, wspec("gru.W_iz"), &cache.gru_c.W_iz);
  cache.gru_q.W_in = fq_node(model.gru.W_in, wspec("gru.W_in"), &cache.gru_c.W_in);
  cache.gru_q.W_hr = fq_node(model.gru.W_hr, wspec("gru.W_hr"), &cache.gru_c.W_hr);
  cache.gru_q.W_hz = fq_node(model.gru.W_hz, wspec("gru.W_hz"), &cache.gru_c.W_hz);
  cache.gru_q.W_hn = fq_node(model.gru.W_hn, wspec("gru.W_hn"), &cache.gru_c.W_hn);
  cache.gru_q.b_ir = fq_node(Mat<T>(model.gru.b_ir), bias_spec(pts.Mr), nullptr);
  cache.gru_q.b_iz = fq_node(Mat<T>(model.gru.b_iz), bias_spec(pts.Mz), nullptr);
  cache.gru_q.b_in = fq_node(Mat<T>(model.gru.b_in), bias_spec(pts.Mnphi), nullptr);
  cache.gru_q.b_hn = fq_node(Mat<T>(model.gru.b_hn), bias_spec(pts.Mnh), nullptr);
  cache.fc_q = model.fc;
  cache.fc_c = zeros_like(model.fc);
  cache.fc_q.W = fq_node(model.fc.W, wspec("fc.W"), &cache.fc_c.W);
  cache.fc_q.b = fq_node(Mat<T>(model.fc.b), bias_spec(pts.uhat), nullptr);
  cache.tcn_q = model.tcn;
  cache.tcn_c = zeros_like(model.tcn);
  for (size_t a = 0; a < model.tcn.w1.size(); ++a)
    cache.tcn_q.w1[a] =
        fq_node(model.tcn.w1[a], wspec(("tcn.w1." + std::to_string(a)).c_str()),
                &cache.tcn_c.w1[a]);
  cache.tcn_q.w2 = fq_node(model.tcn.w2, wspec("tcn.w2"), &cache.tcn_c.w2);
  cache.tcn_q.b1 = fq_node(Mat<T>(model.tcn.b1), bias_spec(pts.pre1), nullptr);
  cache.tcn_q.b2 = fq_node(Mat<T>(model.tcn.b2), bias_spec(pts.pre2), nullptr);

  auto resize_seq = [&](BatchSeq<T>& s) { s.assign(size_t(steps), Mat<T>()); };
  resize_seq(cache.phi_c);
  resize_seq(cache.Mr_c);
  resize_seq(cache.Mz_c);
  resize_seq(cache.Mnphi_c);
  resize_seq(cache.Mnh_c);
  resize_seq(cache.r_c);
  resize_seq(cache.z_c);
  resize_seq(cache.n_c);
  resize_seq(cache.h_c);
  resize_seq(cache.uhat_c);
  resize_seq(cache.x_q);
  resize_seq(cache.x_c);
  resize_seq(cache.pre1_q);
  resize_seq(cache.pre1_c);
  resize_seq(cache.act1_q);
  resize_seq(cache.act1_c);
  resize_seq(cache.pre2_c);
  resize_seq(cache.act2_q);
  resize_seq(cache.act2_c);
  resize_seq(cache.u_c);
  cache.rec.clear();
  cache.uhat.assign(size_t(steps), Mat<T>());
  cache.u.assign(size_t(steps), Mat<T>());
  auto& rec = cache.rec;

  Mat<T> h_prev = Mat<T>::Zero(h, b);
  Mat<T> phi_buf = Mat<T>::Zero(f, b), h_buf = Mat<T>::Zero(h, b);
  Mat<T> Mr = cache.gru_q.b_ir.replicate(1, b), Mz = cache.gru_q.b_iz.replicate(1, b);
  Mat<T> Mnphi = cache.gru_q.b_in.replicate(1, b),
         Mnh = cache.gru_q.b_hn.replicate(1, b);

  for (Index t = 0; t < steps; ++t) {
    const size_t ts = size_t(t);
    const Mat<T> phi_q = fq_node(phi[ts], pts.phi, &cache.phi_c[ts]);
    Mat<T> dphi = phi_q - phi_buf;
    const auto pm =
        (dphi.array().abs().template cast<double>() > model.thresholds.theta_phi)
            .eval();
    dphi = pm.select(dphi.array(), T(0)).matrix();
    phi_buf = pm.select(phi_q.array(), phi_buf.array()).matrix();
    Mat<T> dh = h_prev - h_buf;
    if (t == 0) {
      dh.setZero();
    } else {
      const auto hm =
          (dh.array().abs().template cast<double>() > model.thresholds.theta_h)
              .eval();
      dh = hm.select(dh.array(), T(0)).matrix();
      h_buf = hm.select(h_prev.array(), h_buf.array()).matrix();
    }
    Mr = fq_node<T>(Mr + cache.gru_q.W_ir * dphi + cache.gru_q.W_hr * dh, pts.Mr,
                    &cache.Mr_c[ts]);
    Mz = fq_node<T>(Mz + cache.gru_q.W_iz * dphi + cache.gru_q.W_hz * dh, pts.Mz,
                    &cache.Mz_c[ts]);
    Mnphi = fq_node<T>(Mnphi + cache.gru_q.W_in * dphi, pts.Mnphi,
                       &cache.Mnphi_c[ts]);
    Mnh = fq_node<T>(Mnh + cache.gru_q.W_hn * dh, pts.Mnh, &cache.Mnh_c[ts]);

    const Mat<T> r = fq_node<T>(
        Mr.unaryExpr([](T v) { return stable_sigmoid(v); }), pts.r, &cache.r_c[ts]);
    const Mat<T> z = fq_node<T>(
        Mz.unaryExpr([](T v) { return stable_sigmoid(v); }), pts.z, &cache.z_c[ts]);
    const Mat<T> n = fq_node<T>(
        (Mnphi + r.cwiseProduct(Mnh)).unaryExpr([](T v) { return std::tanh(v); }),
        pts.n, &cache.n_c[ts]);
    const Mat<T> ones = Mat<T>::Constant(h, b, T(1));
    const Mat<T> hq = fq_node<T>(
        (ones - z).cwiseProduct(h_prev) + z.cwiseProduct(n), pts.h, &cache.h_c[ts]);

    rec.phi.push_back(phi_q);
    rec.r.push_back(r);
    rec.z.push_back(z);
    rec.n.push_back(n);
    rec.m.push_back(Mnh);
    rec.h.push_back(hq);
    h_prev = hq;

    cache.uhat[ts] = fq_node<T>(((cache.fc_q.W * hq).colwise() + cache.fc_q.b).eval(),
                                pts.uhat, &cache.uhat_c[ts]);
  }

  // TCN path on quantized inputs
  for (Index t = 0; t < steps; ++t)
    cache.x_q[size_t(t)] = fq_node(x_iq[size_t(t)], pts.x, &cache.x_c[size_t(t)]);
  for (Index t = 0; t < steps; ++t) {
    const size_t ts = size_t(t);
    Mat<T> pre1 = cache.tcn_q.b1.replicate(1, b);
    for (int a = 0; a < model.tcn.kernel1; ++a) {
      const Index src = t + Index(a) * model.tcn.dilation1 - model.tcn.pad1();
      if (src < 0 || src >= steps) continue;
      pre1.noalias() += cache.tcn_q.w1[size_t(a)] * cache.x_q[size_t(src)];
    }
    cache.pre1_q[ts] = fq_node(pre1, pts.pre1, &cache.pre1_c[ts]);
    cache.act1_q[ts] =
        fq_node<T>(cache.pre1_q[ts].unaryExpr([](T v) { return hardswish(v); }),
                   pts.act1, &cache.act1_c[ts]);
    Mat<T> pre2 = (cache.tcn_q.w2 * cache.act1_q[ts]).colwise() + cache.tcn_q.b2;
    const Mat<T> pre2_q = fq_node(pre2, pts.pre2, &cache.pre2_c[ts]);
    cache.act2_q[ts] = fq_node<T>(
        pre2_q.unaryExpr([](T v) { return hardswish(v); }), pts.act2,
        &cache.act2_c[ts]);
    cache.u[ts] =
        fq_node<T>(cache.uhat[ts] + cache.act2_q[ts], pts.u, &cache.u_c[ts]);
  }
  return cache.u;
}

struct ScaleGrads {
  std::map<std::string, double> g;

  void add(const std::string& name, double v) { g[name] += v; }
};

template <typename T>
double dot_coef(const Mat<T>& d, const Mat<T>& coef) {
  return double(d.cwiseProduct(coef).sum());
}

template <typename T>
Mat<T> masked(const Mat<T>& d, const Mat<T>& coef) {
  return d.binaryExpr(coef, [](T dv, T cv) { return dv * ste_mask(cv); });
}

/// Straight-through backward over a QAT forward. Parameter gradients land in
/// full-precision (master) layout; per-point and per-weight scale gradients
/// accumulate into sgrads.
template <typename T>
void qat_backward(const TResDeltaGruModel<T>& model, const QatPoints& pts,
                  const QatCache<T>& cache, const BatchSeq<T>& dU,
                  std::type_identity_t<GruFcGrads<T>*> core,
                  std::type_identity_t<TcnParams<T>*> tcn_grads,
                  ScaleGrads* sgrads) {
  const Index steps = cache.rec.steps();
  const Index h = model.gru.hidden_size(), b = cache.rec.h[0].cols();
  const Mat<T> zero_h = Mat<T>::Zero(h, b);
  const Mat<T> ones = Mat<T>::Constant(h, b, T(1));

  BatchSeq<T> dUhat(static_cast<size_t>(steps));
  BatchSeq<T> dAct2(static_cast<size_t>(steps));
  for (Index t = 0; t < steps; ++t) {
    const size_t ts = size_t(t);
    if (sgrads) sgrads->add(qp::kU, dot_coef(dU[ts], cache.u_c[ts]));
    const Mat<T> d = masked(dU[ts], cache.u_c[ts]);
    dUhat[ts] = d;
    dAct2[ts] = d;
  }

  // --- TCN branch ---
  {
    TcnParams<T> tg = zeros_like(model.tcn);
    for (Index t = 0; t < steps; ++t) {
      const size_t ts = size_t(t);
      if (sgrads) sgrads->add(qp::kTcnAct2, dot_coef(dAct2[ts], cache.act2_c[ts]));
      const Mat<T> d = masked(dAct2[ts], cache.act2_c[ts]);
      // the hardswish derivative is taken at the quantized pre-activation
      Mat<T> pre2_q =
          ((cache.tcn_q.w2 * cache.act1_q[ts]).colwise() + cache.tcn_q.b2).eval();
      pre2_q = fq_node(pre2_q, pts.pre2, nullptr);
      Mat<T> dPre2 = d.cwiseProduct(
          pre2_q.unaryExpr([](T v) { return hardswish_grad(v); }));
      if (sgrads) sgrads->add(qp::kTcnPre2, dot_coef(dPre2, cache.pre2_c[ts]));
      dPre2 = masked(dPre2, cache.pre2_c[ts]);
      tg.w2.noalias() += dPre2 * cache.act1_q[ts].transpose();
      tg.b2 += dPre2.rowwise().sum();
      Mat<T> dAct1 = cache.tcn_q.w2.transpose() * dPre2;
      if (sgrads) sgrads->add(qp::kTcnAct1, dot_coef(dAct1, cache.act1_c[ts]));
      dAct1 = masked(dAct1, cache.act1_c[ts]);
      Mat<T> dPre1 = dAct1.cwiseProduct(
          cache.pre1_q[ts].unaryExpr([](T v) { return hardswish_grad(v); }));
      if (sgrads) sgrads->add(qp::kTcnPre1, dot_coef(dPre1, cache.pre1_c[ts]));
      dPre1 = masked(dPre1, cache.pre1_c[ts]);
      tg.b1 += dPre1.rowwise().sum();
      for (int a = 0; a < model.tcn.kernel1; ++a) {
        const Index src = t + Index(a) * model.tcn.dilation1 - model.tcn.pad1();
        if (src < 0 || src >= steps) continue;
        tg.w1[size_t(a)].noalias() += dPre1 * cache.x_q[size_t(src)].transpose();
      }
    }
    if (tcn_grads || sgrads) {
      for (size_t a = 0; a < tg.w1.size(); ++a) {
        if (sgrads)
          sgrads->add("tcn.w1." + std::to_string(a),
                      dot_coef(tg.w1[a], cache.tcn_c.w1[a]));
        if (tcn_grads) tcn_grads->w1[a] += masked(tg.w1[a], cache.tcn_c.w1[a]);
      }
      if (sgrads) sgrads->add("tcn.w2", dot_coef(tg.w2, cache.tcn_c.w2));
      if (tcn_grads) {
        tcn_grads->w2 += masked(tg.w2, cache.tcn_c.w2);
        tcn_grads->b1 += tg.b1;
        tcn_grads->b2 += tg.b2;
      }
    }
  }

  // --- recurrent branch ---
  GruFcGrads<T> gq = zero_grads(model.gru, model.fc);
  Mat<T> dH = zero_h;
  for (Index t = steps - 1; t >= 0; --t) {
    const size_t ts = size_t(t);
    if (sgrads) sgrads->add(qp::kUhat, dot_coef(dUhat[ts], cache.uhat_c[ts]));
    const Mat<T> dOut = masked(dUhat[ts], cache.uhat_c[ts]);
    gq.fc.W.noalias() += dOut * cache.rec.h[ts].transpose();
    gq.fc.b += dOut.rowwise().sum();
    dH.noalias() += cache.fc_q.W.transpose() * dOut;

    if (sgrads) sgrads->add(qp::kH, dot_coef(dH, cache.h_c[ts]));
    dH = masked(dH, cache.h_c[ts]);

    const Mat<T>& h_prev = t > 0 ? cache.rec.h[ts - 1] : zero_h;
    const Mat<T>& r = cache.rec.r[ts];
    const Mat<T>& z = cache.rec.z[ts];
    const Mat<T>& n = cache.rec.n[ts];
    const Mat<T>& m = cache.rec.m[ts];
    const Mat<T>& phi = cache.rec.phi[ts];

    const Mat<T> dZ = dH.cwiseProduct(n - h_prev);
    Mat<T> dN = dH.cwiseProduct(z);
    Mat<T> dHprev = dH.cwiseProduct(ones - z);

    if (sgrads) sgrads->add(qp::kN, dot_coef(dN, cache.n_c[ts]));
    dN = masked(dN, cache.n_c[ts]);
    const Mat<T> dArg = dN.cwiseProduct(ones - n.cwiseProduct(n));
    Mat<T> dR = dArg.cwiseProduct(m);
    Mat<T> dMnh = dArg.cwiseProduct(r);
    Mat<T> dMnphi = dArg;

    if (sgrads) sgrads->add(qp::kR, dot_coef(dR, cache.r_c[ts]));
    dR = masked(dR, cache.r_c[ts]);
    Mat<T> dAr = dR.cwiseProduct(r.cwiseProduct(ones - r));
    if (sgrads) sgrads->add(qp::kMr, dot_coef(dAr, cache.Mr_c[ts]));
    dAr = masked(dAr, cache.Mr_c[ts]);

    Mat<T> dAz = dZ;
    if (sgrads) sgrads->add(qp::kZ, dot_coef(dAz, cache.z_c[ts]));
    dAz = masked(dAz, cache.z_c[ts]);
    dAz = dAz.cwiseProduct(z.cwiseProduct(ones - z));
    if (sgrads) sgrads->add(qp::kMz, dot_coef(dAz, cache.Mz_c[ts]));
    dAz = masked(dAz, cache.Mz_c[ts]);

    if (sgrads) sgrads->add(qp::kMnphi, dot_coef(dMnphi, cache.Mnphi_c[ts]));
    dMnphi = masked(dMnphi, cache.Mnphi_c[ts]);
    if (sgrads) sgrads->add(qp::kMnh, dot_coef(dMnh, cache.Mnh_c[ts]));
    dMnh = masked(dMnh, cache.Mnh_c[ts]);

    gq.gru.W_in.noalias() += dMnphi * phi.transpose();
    gq.gru.b_in += dMnphi.rowwise().sum();
    gq.gru.W_hn.noalias() += dMnh * h_prev.transpose();
    gq.gru.b_hn += dMnh.rowwise().sum();
    gq.gru.W_ir.noalias() += dAr * phi.transpose();
    gq.gru.b_ir += dAr.rowwise().sum();
    gq.gru.W_hr.noalias() += dAr * h_prev.transpose();
    gq.gru.W_iz.noalias() += dAz * phi.transpose();
    gq.gru.b_iz += dAz.rowwise().sum();
    gq.gru.W_hz.noalias() += dAz * h_prev.transpose();

    Mat<T> dPhi = cache.gru_q.W_in.transpose() * dMnphi;
    dPhi.noalias() += cache.gru_q.W_ir.transpose() * dAr;
    dPhi.noalias() += cache.gru_q.W_iz.transpose() * dAz;
    if (sgrads) sgrads->add(qp::kPhi, dot_coef(dPhi, cache.phi_c[ts]));

    dHprev.noalias() += cache.gru_q.W_hn.transpose() * dMnh;
    dHprev.noalias() += cache.gru_q.W_hr.transpose() * dAr;
    dHprev.noalias() += cache.gru_q.W_hz.transpose() * dAz;
    dH = std::move(dHprev);
  }

  if (core) {
    auto apply = [&](Mat<T>& dst, const Mat<T>& g, const Mat<T>& coef,
                     const char* name) {
      if (sgrads) sgrads->add(name, dot_coef(g, coef));
      dst += masked(g, coef);
    };
    apply(core->gru.W_ir, gq.gru.W_ir, cache.gru_c.W_ir, "gru.W_ir");
    apply(core->gru.W_iz, gq.gru.W_iz, cache.gru_c.W_iz, "gru.W_iz");
    apply(core->gru.W_in, gq.gru.W_in, cache.gru_c.W_in, "gru.W_in");
    apply(core->gru.W_hr, gq.gru.W_hr, cache.gru_c.W_hr, "gru.W_hr");
    apply(core->gru.W_hz, gq.gru.W_hz, cache.gru_c.W_hz, "gru.W_hz");
    apply(core->gru.W_hn, gq.gru.W_hn, cache.gru_c.W_hn, "gru.W_hn");
    core->gru.b_ir += gq.gru.b_ir;
    core->gru.b_iz += gq.gru.b_iz;
    core->gru.b_in += gq.gru.b_in;
    core->gru.b_hn += gq.gru.b_hn;
    apply(core->fc.W, gq.fc.W, cache.fc_c.W, "fc.W");
    core->fc.b += gq.fc.b;
  }
}

}  // namespace dpd
