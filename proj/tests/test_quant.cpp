#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpd/quant.hpp"
#include "dpd/signal.hpp"

#include <random>

using namespace dpd;

namespace {

IQSequence bandlike_signal(Index n, unsigned long long seed) {
  OfdmConfig cfg;
  cfg.num_symbols = std::max<int>(1, int((n + cfg.fft_size() - 1) / cfg.fft_size()));
  cfg.seed = seed;
  IQSequence x = generate_ofdm(cfg);
  VecXcd v = x.samples.head(n);
  v /= v.cwiseAbs().maxCoeff();
  return IQSequence(v, x.sample_rate_hz);
}

QuantizedModel quantized_test_model(Index hidden, const DeltaThresholds& th,
                                    const QuantModelConfig& qc,
                                    unsigned long long seed, const IQSequence& calib) {
  std::mt19937_64 rng(seed);
  TResDeltaGruModel<double> m = init_model<double>(hidden, th, rng);
  const ScaleTable table = calibrate_scales(m, calib, qc);
  return quantize_model(m, table, qc);
}

}  // namespace

TEST_CASE("fake_quant reference points") {
  QuantSpec s8{8, 1.0, QuantSpec::Target::activations};
  CHECK(fake_quant(200.0, s8) == 127.0);
  CHECK(fake_quant(-300.0, s8) == -128.0);
  CHECK(fake_quant(0.0, s8) == 0.0);

  QuantSpec fine{8, std::ldexp(1.0, -7), QuantSpec::Target::activations};
  CHECK(fake_quant(0.3, fine) == doctest::Approx(0.296875).epsilon(1e-15));
}

TEST_CASE("fake_quant properties on a million scalars") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const QuantSpec spec{12, std::ldexp(1.0, -9), QuantSpec::Target::activations};
  const double bound = spec.scale * spec.qmax();
  for (int i = 0; i < 1000000; ++i) {
    const double x = u(rng);
    const double q = fake_quant(x, spec);
    // idempotence
    CHECK(fake_quant(q, spec) == q);
    // grid membership
    const double steps = q / spec.scale;
    CHECK(steps == std::round(steps));
    CHECK(q >= spec.scale * spec.qmin());
    CHECK(q <= spec.scale * spec.qmax());
    // error bound inside the clip range
    if (std::abs(x) <= bound) CHECK(std::abs(q - x) <= spec.scale / 2);
  }
}

TEST_CASE("fake_quant monotonicity") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const QuantSpec spec{8, std::ldexp(1.0, -5), QuantSpec::Target::activations};
  for (int i = 0; i < 20000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    CHECK(fake_quant(a, spec) <= fake_quant(b, spec));
  }
}

TEST_CASE("round convention is half away from zero") {
  QuantSpec s{8, 1.0, QuantSpec::Target::activations};
  CHECK(fake_quant(0.5, s) == 1.0);
  CHECK(fake_quant(-0.5, s) == -1.0);
  CHECK(fake_quant(1.5, s) == 2.0);
  CHECK(fake_quant(-2.5, s) == -3.0);
}

TEST_CASE("ste_backward clip gating") {
  QuantSpec s{8, 1.0, QuantSpec::Target::activations};
  CHECK(ste_backward(2.5, 10.0, s) == 2.5);
  CHECK(ste_backward(2.5, 10.0 * s.qmax(), s) == 0.0);
  // boundary passes: closed interval
  CHECK(ste_backward(1.0, s.qmax(), s) == 1.0);
  CHECK(ste_backward(1.0, s.qmin(), s) == 1.0);
  CHECK(ste_backward(1.0, s.qmin() - 1, s) == 0.0);
}

TEST_CASE("snap_scale_pow2") {
  CHECK(snap_scale_pow2(0.7) == 0.5);
  CHECK(snap_scale_pow2(1.5) == 2.0);
  for (int k = -20; k <= 20; ++k)
    CHECK(snap_scale_pow2(std::ldexp(1.0, k)) == std::ldexp(1.0, k));
  // exact midpoint in log2 rounds up
  CHECK(snap_scale_pow2(std::sqrt(2.0) / 2.0) == 1.0);
  CHECK_THROWS(snap_scale_pow2(0.0));
}

TEST_CASE("max-abs scale initialization lands in the expected octave") {
  // weights in [-0.49, 0.49] with 8 bits: max-abs/Q_max snapped
  const double s = snap_scale_pow2(0.49 / 127.0);
  CHECK(s >= std::ldexp(1.0, -8));
  CHECK(s <= std::ldexp(1.0, -7));
}

TEST_CASE("calibration falls back to scale 1 for all-zero tensors") {
  std::mt19937_64 rng(3);
  TResDeltaGruModel<double> m = init_model<double>(4, DeltaThresholds{}, rng);
  m.fc.W.setZero();
  const IQSequence calib = bandlike_signal(512, 4);
  const ScaleTable t = calibrate_scales(m, calib, QuantModelConfig{});
  CHECK(t.at("fc.W") == 1.0);
}

TEST_CASE("quantize-dequantize is exact on representable values") {
  std::mt19937_64 rng(5);
  const IQSequence calib = bandlike_signal(1024, 6);
  const QuantizedModel qm =
      quantized_test_model(6, DeltaThresholds{}, QuantModelConfig{}, 7, calib);
  const TResDeltaGruModel<double> m = dequantize_model(qm);
  // re-quantizing the dequantized model reproduces the integers
  const QuantizedModel qm2 = quantize_model(m, [&] {
        ScaleTable t;
        for (const auto& [name, qt] : qm.weights) t[name] = qt.scale();
        for (const auto& [name, spec] : qm.acts) t[name] = spec.scale;
        // weight entries must carry the weight scales, not the bias ones
        for (const auto& [name, spec] : qm.acts) t[name] = spec.scale;
        return t;
      }(), qm.cfg);
  for (const auto& [name, qt] : qm.weights) {
    if (name.find(".b") != std::string::npos) continue;
    CHECK(qm2.weight(name).q == qt.q);
  }
}

TEST_CASE("integer path equals fake-quant path bit-exactly") {
  const IQSequence calib = bandlike_signal(2048, 11);
  const IQSequence x = bandlike_signal(1000, 12);

  auto run = [&](int wb, int ab, const DeltaThresholds& th) {
    QuantModelConfig qc;
    qc.weight_bits = wb;
    qc.activation_bits = ab;
    const QuantizedModel qm = quantized_test_model(15, th, qc, 13, calib);
    const QuantForwardResult fake = fakequant_forward(qm, x, true);
    const QuantForwardResult integer = integer_forward(qm, x, true);

    REQUIRE(fake.trace.size() == integer.trace.size());
    for (const auto& [point, fv] : fake.trace) {
      const auto& iv = integer.trace.at(point);
      REQUIRE(fv.size() == iv.size());
      for (size_t i = 0; i < fv.size(); ++i) {
        if (fv[i] != iv[i]) {
          CAPTURE(point);
          CAPTURE(i);
          REQUIRE(fv[i] == iv[i]);
        }
      }
    }
    for (Index t = 0; t < x.size(); ++t)
      CHECK(fake.u.samples[t] == integer.u.samples[t]);
    CHECK(fake.sparsity.phi_skipped == integer.sparsity.phi_skipped);
    CHECK(fake.sparsity.h_skipped == integer.sparsity.h_skipped);
    return integer;
  };

  SUBCASE("W16A16 dense") { run(16, 16, DeltaThresholds{}); }
  SUBCASE("W16A16 with thresholds") { run(16, 16, DeltaThresholds{0.01, 0.05}); }
  SUBCASE("W12A12 dense") {
    const QuantForwardResult integer = run(12, 12, DeltaThresholds{});
    // accumulator audit: everything fits the 32-bit budget
    for (const auto& [name, peak] : integer.max_abs_acc) {
      CAPTURE(name);
      CHECK(peak < double(std::int64_t(1) << 31));
    }
  }
  SUBCASE("W12A12 with thresholds") { run(12, 12, DeltaThresholds{0.02, 0.1}); }
}

TEST_CASE("quantized forward reports thresholds' sparsity") {
  const IQSequence calib = bandlike_signal(2048, 21);
  const IQSequence x = bandlike_signal(1500, 22);
  QuantModelConfig qc;
  const QuantizedModel qm =
      quantized_test_model(8, DeltaThresholds{0.02, 0.08}, qc, 23, calib);
  const QuantForwardResult r = fakequant_forward(qm, x);
  CHECK(r.sparsity.gamma() > 0.0);
  CHECK(r.sparsity.gamma() < 1.0);
}

TEST_CASE("integer accumulator overflow is detected and reported") {
  const IQSequence calib = bandlike_signal(512, 31);
  QuantModelConfig qc;
  qc.weight_bits = 16;
  qc.activation_bits = 16;
  const QuantizedModel qm = quantized_test_model(15, DeltaThresholds{}, qc, 32, calib);
  const IQSequence x = bandlike_signal(400, 33);
  // a 16-bit accumulator budget is far too small for 16-bit products
  CHECK_THROWS_WITH_AS(integer_forward(qm, x, false, 16),
                       doctest::Contains("accumulator overflow"),
                       std::runtime_error);
}
