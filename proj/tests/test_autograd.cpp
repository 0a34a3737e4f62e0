#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpd/autograd.hpp"
#include "dpd/qat.hpp"
#include "dpd/train.hpp"

#include <random>

using namespace dpd;

namespace {

constexpr Index kSteps = 12;
constexpr Index kBatch = 2;
constexpr Index kHidden = 3;

BatchSeq<double> random_seq(Index rows, Index steps, Index batch, unsigned seed,
                            double amp = 0.8) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, amp);
  BatchSeq<double> out(static_cast<size_t>(steps));
  for (auto& m : out) {
    m.resize(rows, batch);
    for (Index j = 0; j < batch; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  }
  return out;
}

// direct predistorter loss: MSE between u = fc(gru(phi)) + tcn(x) and target
double dpd_loss(const TResDeltaGruModel<double>& m, const BatchSeq<double>& phi,
                const BatchSeq<double>& x_iq, const BatchSeq<double>& target,
                GruFcGrads<double>* grads, TcnParams<double>* tgrads) {
  RecurrentCache<double> cache;
  const BatchSeq<double> uhat =
      gru_fc_forward_cached(m.gru, m.fc, m.thresholds, phi, cache);
  TcnCache<double> tcache;
  const BatchSeq<double> res = tcn_forward_cached(m.tcn, x_iq, tcache);
  BatchSeq<double> u(uhat.size());
  for (size_t t = 0; t < uhat.size(); ++t) u[t] = uhat[t] + res[t];
  BatchSeq<double> dU;
  const double loss = mse_loss(u, target, 2, grads || tgrads ? &dU : nullptr);
  if (grads || tgrads) {
    gru_fc_backward(m.gru, m.fc, cache, dU, grads, nullptr);
    tcn_backward(m.tcn, x_iq, tcache, dU, tgrads, nullptr);
  }
  return loss;
}

struct FdReport {
  double worst_rel = 0;
  std::string worst_name;
};

// central finite differences over every parameter of a model against the
// analytic gradients; eps = 1e-4, 64-bit
template <typename Model, typename LossFn, typename GradViews>
FdReport fd_check(Model& model, const LossFn& loss_fn, GradViews& grad_views,
                  std::vector<TensorView<double>>& param_views) {
  const double eps = 1e-4;
  FdReport rep;
  REQUIRE(param_views.size() == grad_views.size());
  for (size_t ti = 0; ti < param_views.size(); ++ti) {
    auto& pv = param_views[ti];
    auto& gv = grad_views[ti];
    REQUIRE(pv.size() == gv.size());
    for (Index i = 0; i < pv.size(); ++i) {
      const double keep = pv.data[i];
      pv.data[i] = keep + eps;
      const double lp = loss_fn();
      pv.data[i] = keep - eps;
      const double lm = loss_fn();
      pv.data[i] = keep;
      const double fd = (lp - lm) / (2 * eps);
      const double rel = std::abs(gv.data[i] - fd) / (std::abs(gv.data[i]) + 1e-8);
      if (rel > rep.worst_rel) {
        rep.worst_rel = rel;
        rep.worst_name = pv.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

}  // namespace

TEST_CASE("PA-model BPTT gradients match central finite differences") {
  std::mt19937_64 rng(1);
  GruFcModel<double> model = init_pa_model<double>(kHidden, rng);
  const BatchSeq<double> phi = random_seq(kFeatureWidth, kSteps, kBatch, 11);
  const BatchSeq<double> target = random_seq(2, kSteps, kBatch, 12, 0.5);

  GruFcGrads<double> grads = zero_grads(model.gru, model.fc);
  {
    RecurrentCache<double> cache;
    const BatchSeq<double> out =
        gru_fc_forward_cached(model.gru, model.fc, DeltaThresholds{}, phi, cache);
    BatchSeq<double> dOut;
    mse_loss(out, target, 2, &dOut);
    gru_fc_backward(model.gru, model.fc, cache, dOut, &grads, nullptr);
  }

  auto loss_fn = [&]() {
    RecurrentCache<double> cache;
    const BatchSeq<double> out =
        gru_fc_forward_cached(model.gru, model.fc, DeltaThresholds{}, phi, cache);
    return mse_loss(out, target, 2, nullptr);
  };
  auto pviews = tensor_views(model);
  auto gviews = tensor_views_of_grads(grads);
  const FdReport rep = fd_check(model, loss_fn, gviews, pviews);
  INFO("worst: ", rep.worst_name);
  CHECK(rep.worst_rel <= 1e-4);
}

TEST_CASE("predistorter BPTT gradients (GRU + FC + TCN) match finite differences") {
  std::mt19937_64 rng(2);
  TResDeltaGruModel<double> model = init_model<double>(kHidden, DeltaThresholds{}, rng);
  model.tcn.dilation1 = 2;  // keep the receptive field inside a 12-step frame
  const BatchSeq<double> phi = random_seq(kFeatureWidth, kSteps, kBatch, 21);
  const BatchSeq<double> x_iq = random_seq(2, kSteps, kBatch, 22, 0.6);
  const BatchSeq<double> target = random_seq(2, kSteps, kBatch, 23, 0.5);

  GruFcGrads<double> grads = zero_grads(model.gru, model.fc);
  TcnParams<double> tgrads = zeros_like(model.tcn);
  dpd_loss(model, phi, x_iq, target, &grads, &tgrads);

  auto loss_fn = [&]() {
    return dpd_loss(model, phi, x_iq, target, nullptr, nullptr);
  };
  auto pviews = tensor_views(model);
  std::vector<TensorView<double>> gviews = tensor_views_of_grads(grads);
  append_views("tcn.", tgrads, gviews);
  const FdReport rep = fd_check(model, loss_fn, gviews, pviews);
  INFO("worst: ", rep.worst_name);
  CHECK(rep.worst_rel <= 1e-4);
}

TEST_CASE("cascade gradients through the frozen PA match finite differences") {
  std::mt19937_64 rng(3);
  TResDeltaGruModel<double> dpd = init_model<double>(kHidden, DeltaThresholds{}, rng);
  dpd.tcn.dilation1 = 2;
  GruFcModel<double> pa = init_pa_model<double>(kHidden, rng);
  const BatchSeq<double> phi = random_seq(kFeatureWidth, kSteps, kBatch, 31);
  const BatchSeq<double> x_iq = random_seq(2, kSteps, kBatch, 32, 0.6);
  const BatchSeq<double> target = random_seq(2, kSteps, kBatch, 33, 0.5);

  const GruFcModel<double> pa_before = pa;
  GruFcGrads<double> grads = zero_grads(dpd.gru, dpd.fc);
  TcnParams<double> tgrads = zeros_like(dpd.tcn);
  cascade_batch(dpd, pa, phi, x_iq, target, 2, &grads, &tgrads);

  // frozen-PA invariant: parameters bit-identical after the pass
  for (auto [a, b] :
       {std::pair{&pa.gru.W_ir, &pa_before.gru.W_ir},
        std::pair{&pa.gru.W_hn, &pa_before.gru.W_hn}})
    CHECK(*a == *b);

  auto loss_fn = [&]() {
    return cascade_batch(dpd, pa, phi, x_iq, target, 2, nullptr, nullptr);
  };
  auto pviews = tensor_views(dpd);
  std::vector<TensorView<double>> gviews = tensor_views_of_grads(grads);
  append_views("tcn.", tgrads, gviews);
  const FdReport rep = fd_check(dpd, loss_fn, gviews, pviews);
  INFO("worst: ", rep.worst_name);
  CHECK(rep.worst_rel <= 1e-4);
}

TEST_CASE("zero-loss batch produces zero gradients") {
  std::mt19937_64 rng(4);
  GruFcModel<double> model = init_pa_model<double>(kHidden, rng);
  const BatchSeq<double> phi = random_seq(kFeatureWidth, kSteps, kBatch, 41);
  RecurrentCache<double> cache;
  const BatchSeq<double> out =
      gru_fc_forward_cached(model.gru, model.fc, DeltaThresholds{}, phi, cache);
  BatchSeq<double> dOut;
  const double loss = mse_loss(out, out, 2, &dOut);  // targets equal outputs
  CHECK(loss == 0.0);
  GruFcGrads<double> grads = zero_grads(model.gru, model.fc);
  gru_fc_backward(model.gru, model.fc, cache, dOut, &grads, nullptr);
  for (const auto& gv : tensor_views_of_grads(grads))
    for (Index i = 0; i < gv.size(); ++i) CHECK(gv.data[i] == 0.0);
}

TEST_CASE("backward is linear in the loss scale") {
  std::mt19937_64 rng(5);
  GruFcModel<double> model = init_pa_model<double>(kHidden, rng);
  const BatchSeq<double> phi = random_seq(kFeatureWidth, kSteps, kBatch, 51);
  const BatchSeq<double> target = random_seq(2, kSteps, kBatch, 52, 0.5);
  RecurrentCache<double> cache;
  const BatchSeq<double> out =
      gru_fc_forward_cached(model.gru, model.fc, DeltaThresholds{}, phi, cache);
  BatchSeq<double> dOut;
  mse_loss(out, target, 2, &dOut);

  GruFcGrads<double> g1 = zero_grads(model.gru, model.fc);
  gru_fc_backward(model.gru, model.fc, cache, dOut, &g1, nullptr);

  const double c = 3.5;
  BatchSeq<double> dScaled = dOut;
  for (auto& m : dScaled) m *= c;
  GruFcGrads<double> g2 = zero_grads(model.gru, model.fc);
  gru_fc_backward(model.gru, model.fc, cache, dScaled, &g2, nullptr);

  auto v1 = tensor_views_of_grads(g1);
  auto v2 = tensor_views_of_grads(g2);
  for (size_t t = 0; t < v1.size(); ++t)
    for (Index i = 0; i < v1[t].size(); ++i)
      CHECK(v2[t].data[i] == doctest::Approx(c * v1[t].data[i]).epsilon(1e-12));
}

TEST_CASE("thresholded training forward degrades gracefully toward dense") {
  // with tiny thresholds the masked-delta forward tracks the dense forward
  std::mt19937_64 rng(6);
  const GruFcModel<double> model = init_pa_model<double>(5, rng);
  const BatchSeq<double> phi = random_seq(kFeatureWidth, 40, 3, 61);
  RecurrentCache<double> c1, c2;
  const BatchSeq<double> dense =
      gru_fc_forward_cached(model.gru, model.fc, DeltaThresholds{}, phi, c1);
  const BatchSeq<double> delta = gru_fc_forward_cached(
      model.gru, model.fc, DeltaThresholds{1e-9, 1e-9}, phi, c2);
  for (size_t t = 0; t < dense.size(); ++t)
    CHECK((dense[t] - delta[t]).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("masked-delta training forward agrees with the streaming engine") {
  std::mt19937_64 rng(7);
  TResDeltaGruModel<double> m = init_model<double>(5, DeltaThresholds{0.01, 0.05}, rng);
  const Index n = 400;
  std::normal_distribution<double> g(0.0, 0.4);
  VecXcd v(n);
  std::mt19937_64 rng2(71);
  for (Index i = 0; i < n; ++i) v[i] = cplx(g(rng2), g(rng2));
  const IQSequence x(v, 1.0);

  // batched path with B = 1
  const Mat<double> feats = build_features<double>(x).phi;
  BatchSeq<double> phi(static_cast<size_t>(n));
  for (Index t = 0; t < n; ++t) phi[size_t(t)] = feats.col(t);
  RecurrentCache<double> cache;
  const BatchSeq<double> uhat =
      gru_fc_forward_cached(m.gru, m.fc, m.thresholds, phi, cache);

  // event-driven engine
  const ModelForwardResult<double> fwd = model_forward(m, x);
  const Mat<double> res = tcn_forward(m.tcn, x);
  for (Index t = 0; t < n; ++t) {
    const cplx engine_uhat =
        fwd.u.samples[t] - cplx(res(0, t), res(1, t));
    CHECK(std::abs(engine_uhat - cplx(uhat[size_t(t)](0, 0), uhat[size_t(t)](1, 0))) <
          1e-9);
  }
}

TEST_CASE("QAT backward approaches the FP backward at fine scales") {
  std::mt19937_64 rng(8);
  TResDeltaGruModel<double> dpd = init_model<double>(kHidden, DeltaThresholds{}, rng);
  dpd.tcn.dilation1 = 2;
  const BatchSeq<double> phi = random_seq(kFeatureWidth, kSteps, kBatch, 81);
  const BatchSeq<double> x_iq = random_seq(2, kSteps, kBatch, 82, 0.6);
  const BatchSeq<double> target = random_seq(2, kSteps, kBatch, 83, 0.5);

  // FP gradients
  GruFcGrads<double> g_fp = zero_grads(dpd.gru, dpd.fc);
  TcnParams<double> t_fp = zeros_like(dpd.tcn);
  dpd_loss(dpd, phi, x_iq, target, &g_fp, &t_fp);

  // 16-bit fake-quant gradients with calibration-free fine scales
  QuantModelConfig qc;
  ScaleTable table;
  for (const auto& name : qp::all_activation_points()) table[name] = 1.0 / (1 << 10);
  for (const auto& tv : tensor_views(dpd))
    if (tv.name.find(".b") == std::string::npos) table[tv.name] = 1.0 / (1 << 12);
  QatPoints pts = QatPoints::from_table(table, qc);

  QatCache<double> cache;
  const BatchSeq<double> u = qat_forward_cached(dpd, pts, phi, x_iq, cache);
  BatchSeq<double> dU;
  mse_loss(u, target, 2, &dU);
  GruFcGrads<double> g_q = zero_grads(dpd.gru, dpd.fc);
  TcnParams<double> t_q = zeros_like(dpd.tcn);
  ScaleGrads sg;
  qat_backward(dpd, pts, cache, dU, &g_q, &t_q, &sg);

  auto vfp = tensor_views_of_grads(g_fp);
  auto vq = tensor_views_of_grads(g_q);
  append_views("tcn.", t_fp, vfp);
  append_views("tcn.", t_q, vq);
  double worst = 0;
  for (size_t t = 0; t < vfp.size(); ++t)
    for (Index i = 0; i < vfp[t].size(); ++i)
      worst = std::max(worst, std::abs(vfp[t].data[i] - vq[t].data[i]) /
                                  (std::abs(vfp[t].data[i]) + 1e-4));
  CHECK(worst < 0.05);
  CHECK(!sg.g.empty());
}
