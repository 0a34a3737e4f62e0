#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpd/model.hpp"
#include "dpd/tcn.hpp"

#include <random>

using namespace dpd;

namespace {

// direct zero-padded dilated convolution, written independently of the
// implementation under test
template <typename T>
Mat<T> direct_reference(const TcnParams<T>& tcn, const Mat<T>& x) {
  const Index n = x.cols();
  Mat<T> mid(tcn.c_mid, n), out(tcn.c_out, n);
  for (Index t = 0; t < n; ++t) {
    Vec<T> acc = tcn.b1;
    for (int a = 0; a < tcn.kernel1; ++a) {
      const Index src = t - tcn.pad1() + Index(a) * tcn.dilation1;
      if (src >= 0 && src < n)
        acc += tcn.w1[size_t(a)] * x.col(src);
    }
    for (Index i = 0; i < acc.size(); ++i) mid(i, t) = hardswish(acc[i]);
  }
  for (Index t = 0; t < n; ++t) {
    Vec<T> acc = tcn.b2 + tcn.w2 * mid.col(t);
    for (Index i = 0; i < acc.size(); ++i) out(i, t) = hardswish(acc[i]);
  }
  return out;
}

IQSequence random_iq(Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  VecXcd v(n);
  for (Index i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
  return IQSequence(v, 1.0);
}

}  // namespace

TEST_CASE("zero weights give a constant bias-driven output") {
  std::mt19937_64 rng(1);
  TcnParams<double> tcn = init_tcn<double>(rng);
  for (auto& w : tcn.w1) w.setZero();
  tcn.w2.setZero();
  tcn.b1 << 0.5, -1.0, 4.0;
  tcn.b2 << 0.25, -3.5;

  const IQSequence x = random_iq(64, 2);
  const Mat<double> out = tcn_forward(tcn, x);
  // layer 1 contributes nothing through the zero w2; output is hsw(b2)
  const double e0 = hardswish(0.25), e1 = hardswish(-3.5);
  for (Index t = 0; t < out.cols(); ++t) {
    CHECK(out(0, t) == doctest::Approx(e0).epsilon(1e-15));
    CHECK(out(1, t) == doctest::Approx(e1).epsilon(1e-15));
  }
}

TEST_CASE("whole-sequence forward matches the direct convolution") {
  std::mt19937_64 rng(3);
  const TcnParams<double> tcn = init_tcn<double>(rng);
  const IQSequence x = random_iq(300, 4);
  const Mat<double> xr = iq_rows<double>(x.samples);
  const Mat<double> a = tcn_forward(tcn, x);
  const Mat<double> b = direct_reference(tcn, xr);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("impulse response support sits at the dilated tap offsets") {
  std::mt19937_64 rng(5);
  TcnParams<double> tcn = init_tcn<double>(rng);
  // biases away from the hardswish dead zone so small responses are visible
  tcn.b1.setConstant(0.5);
  tcn.b2.setConstant(0.5);

  const Index n = 200, p = 100;
  Mat<double> zero = Mat<double>::Zero(2, n);
  Mat<double> pulse = zero;
  pulse(0, p) = 0.7;
  pulse(1, p) = -0.4;

  const Mat<double> base = tcn_forward(tcn, zero);
  const Mat<double> resp = tcn_forward(tcn, pulse);
  std::vector<Index> support;
  for (Index t = 0; t < n; ++t)
    if ((resp.col(t) - base.col(t)).cwiseAbs().maxCoeff() > 1e-12)
      support.push_back(t);
  // taps at t - 16, t, t + 16 read the pulse when t is p+16, p, p-16
  REQUIRE(support.size() == 3);
  CHECK(support[0] == p - 16);
  CHECK(support[1] == p);
  CHECK(support[2] == p + 16);
}

TEST_CASE("output length equals input length") {
  std::mt19937_64 rng(6);
  const TcnParams<float> tcn = init_tcn<float>(rng);
  for (Index n : {Index(1), Index(33), Index(10000)}) {
    const Mat<float> x = Mat<float>::Random(2, n);
    CHECK(tcn_forward(tcn, x).cols() == n);
  }
}

TEST_CASE("TCN output is independent of the GRU thresholds") {
  std::mt19937_64 rng(7);
  TResDeltaGruModel<double> m = init_model<double>(6, DeltaThresholds{}, rng);
  m.fc.W.setZero();
  m.fc.b.setZero();
  for (auto* w : {&m.gru.W_ir, &m.gru.W_iz, &m.gru.W_in, &m.gru.W_hr, &m.gru.W_hz,
                  &m.gru.W_hn})
    w->setZero();
  for (auto* b : {&m.gru.b_ir, &m.gru.b_iz, &m.gru.b_in, &m.gru.b_hn}) b->setZero();

  const IQSequence x = random_iq(500, 8);
  const ModelForwardResult<double> dense = model_forward(m, x);
  m.thresholds = DeltaThresholds{0.05, 0.3};
  const ModelForwardResult<double> sparse = model_forward(m, x);
  for (Index t = 0; t < x.size(); ++t)
    CHECK(dense.u.samples[t] == sparse.u.samples[t]);
}

TEST_CASE("shape validation") {
  std::mt19937_64 rng(9);
  TcnParams<double> tcn = init_tcn<double>(rng);
  tcn.w1.pop_back();
  CHECK_THROWS(tcn_forward(tcn, Mat<double>(Mat<double>::Zero(2, 10))));
}
