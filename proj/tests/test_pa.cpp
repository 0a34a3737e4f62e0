#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpd/metrics.hpp"
#include "dpd/pa.hpp"
#include "dpd/signal.hpp"

#include <filesystem>
#include <random>

#include <unsupported/Eigen/FFT>

using namespace dpd;

namespace {

IQSequence random_signal(Index n, unsigned seed, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, amp / std::sqrt(2.0));
  VecXcd v(n);
  for (Index i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
  return IQSequence(v, 1.0);
}

IQSequence desk_ofdm(unsigned long long seed = 1, int symbols = 16) {
  OfdmConfig cfg;
  cfg.num_symbols = symbols;
  cfg.seed = seed;
  IQSequence x = generate_ofdm(cfg);
  return IQSequence(x.samples / x.samples.cwiseAbs().maxCoeff(), x.sample_rate_hz);
}

}  // namespace

TEST_CASE("linear-only PA is exact scaling") {
  MemoryPolynomialPA pa;
  pa.coeffs = Mat<cplx>::Zero(2, 2);
  pa.coeffs(0, 0) = cplx(2.0, -1.0);
  const IQSequence x = random_signal(64, 1);
  const IQSequence y = pa_apply(pa, x);
  for (Index t = 0; t < x.size(); ++t)
    CHECK(y.samples[t] == pa.coeffs(0, 0) * x.samples[t]);
}

TEST_CASE("memoryless cubic evaluation") {
  MemoryPolynomialPA pa;
  pa.coeffs = Mat<cplx>::Zero(1, 2);
  pa.coeffs(0, 0) = cplx(1.0, 0.0);
  pa.coeffs(0, 1) = cplx(-0.1, 0.0);
  VecXcd v(1);
  v[0] = cplx(1, 0);
  const IQSequence y = pa_apply(pa, IQSequence(v, 1.0));
  CHECK(y.samples[0].real() == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(y.samples[0].imag() == 0.0);
}

TEST_CASE("memoryless cubic two-tone intermodulation") {
  // tones on FFT bins 40 and 48 of 512; IMD3 lands at bins 32 and 56
  const Index n = 4096;
  VecXcd v(n);
  const double f1 = 40.0 / 512.0, f2 = 48.0 / 512.0;
  for (Index t = 0; t < n; ++t)
    v[t] = 0.5 * std::polar(1.0, 2 * M_PI * f1 * t) +
           0.5 * std::polar(1.0, 2 * M_PI * f2 * t);
  MemoryPolynomialPA pa;
  pa.coeffs = Mat<cplx>::Zero(1, 2);
  pa.coeffs(0, 0) = cplx(1, 0);
  pa.coeffs(0, 1) = cplx(-0.2, 0.05);
  const IQSequence y = pa_apply(pa, IQSequence(v, 1.0));

  Eigen::FFT<double> fft;
  std::vector<cplx> in(y.samples.data(), y.samples.data() + n), out;
  fft.fwd(out, in);
  auto bin_mag = [&](double f) {
    const Index k = Index(std::llround(f * n));
    return std::abs(out[size_t((k % n + n) % n)]);
  };
  const double imd_lo = bin_mag(2 * f1 - f2);  // 32/512
  const double imd_hi = bin_mag(2 * f2 - f1);  // 56/512
  const double floor_bin = bin_mag(100.0 / 512.0);
  CHECK(imd_lo > 100 * floor_bin);
  CHECK(imd_hi > 100 * floor_bin);
}

TEST_CASE("pa_apply is causal") {
  const MemoryPolynomialPA pa = default_test_pa();
  const IQSequence x = random_signal(256, 2, 0.5);
  const IQSequence y_full = pa_apply(pa, x);
  // truncating the input does not change earlier outputs
  const Index cut = 100;
  const IQSequence y_head =
      pa_apply(pa, IQSequence(x.samples.head(cut), x.sample_rate_hz));
  for (Index t = 0; t < cut; ++t) CHECK(y_head.samples[t] == y_full.samples[t]);
}

TEST_CASE("pa_apply is time-invariant after warm-up") {
  const MemoryPolynomialPA pa = default_test_pa();
  const Index n = 200, shift = 7;
  const IQSequence x = random_signal(n, 3, 0.5);
  VecXcd shifted = VecXcd::Zero(n + shift);
  shifted.tail(n) = x.samples;
  const IQSequence y = pa_apply(pa, x);
  const IQSequence ys = pa_apply(pa, IQSequence(shifted, 1.0));
  const int m = pa.memory_depth();
  for (Index t = m; t < n; ++t)
    CHECK(std::abs(ys.samples[t + shift] - y.samples[t]) < 1e-14);
}

TEST_CASE("noise off means deterministic") {
  const MemoryPolynomialPA pa = default_test_pa();
  const IQSequence x = random_signal(128, 4, 0.5);
  const IQSequence a = pa_apply(pa, x);
  const IQSequence b = pa_apply(pa, x);
  for (Index t = 0; t < x.size(); ++t) CHECK(a.samples[t] == b.samples[t]);
}

TEST_CASE("default_test_pa is a fixed coefficient set") {
  const MemoryPolynomialPA a = default_test_pa(0);
  const MemoryPolynomialPA b = default_test_pa(123);  // seed affects noise only
  CHECK(a.coeffs == b.coeffs);
  CHECK(a.memory_depth() == 3);
  CHECK(a.max_order() == 7);
}

TEST_CASE("default_test_pa no-DPD ACPR sits in the committed bracket") {
  const IQSequence x = desk_ofdm();
  const IQSequence y = pa_apply(default_test_pa(), x);
  const double bw = OfdmConfig{}.occupied_bw_hz();
  const Index seg = welch_segment_for(x.sample_rate_hz, bw, y.size());
  const AcprResult a = acpr(psd_welch(y, seg), AcprConfig::for_bandwidth(bw));
  CHECK(a.avg_dbc >= -35.0);
  CHECK(a.avg_dbc <= -25.0);
}

TEST_CASE("default_test_pa is near-linear at small drive") {
  const MemoryPolynomialPA pa = default_test_pa();
  IQSequence x = desk_ofdm(7, 4);
  x = IQSequence(x.samples * 0.01, x.sample_rate_hz);  // |x| <= 0.01
  const IQSequence y = pa_apply(pa, x);
  const cplx g = pa.coeffs(0, 0);
  double num = 0, den = 0;
  for (Index t = 0; t < x.size(); ++t) {
    num += std::norm(y.samples[t] - g * x.samples[t]);
    den += std::norm(g * x.samples[t]);
  }
  CHECK(std::sqrt(num / den) <= 1e-3);
}

TEST_CASE("extract_am_curves on exact maps") {
  const IQSequence x = random_signal(4096, 5);
  SUBCASE("pure gain") {
    const IQSequence y(x.samples * 2.0, 1.0);
    const AmCurves c = extract_am_curves(x, y, 16);
    for (Index b = 0; b < 16; ++b)
      if (c.occupied[size_t(b)]) {
        CHECK(c.gain[b] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(c.phase_rad[b] == doctest::Approx(0.0).epsilon(1e-12));
      }
  }
  SUBCASE("pure rotation") {
    const IQSequence y(x.samples * std::polar(1.0, M_PI / 4), 1.0);
    const AmCurves c = extract_am_curves(x, y, 16);
    for (Index b = 0; b < 16; ++b)
      if (c.occupied[size_t(b)]) {
        CHECK(c.gain[b] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(c.phase_rad[b] == doctest::Approx(M_PI / 4).epsilon(1e-12));
      }
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS(extract_am_curves(x, random_signal(10, 6), 8));
  }
}

TEST_CASE("default_test_pa compresses toward full drive") {
  // amplitude ramp excites the static nonlinearity without binning noise
  const Index n = 20000;
  VecXcd v(n);
  for (Index t = 0; t < n; ++t)
    v[t] = std::polar(0.02 + 0.98 * double(t) / double(n - 1),
                      2 * M_PI * 0.11 * double(t));
  const IQSequence x(v, 1.0);
  const IQSequence y = pa_apply(default_test_pa(), x);
  const AmCurves c = extract_am_curves(x, y, 20);
  // monotone decrease across the top decile of drive amplitude
  for (Index b = 18; b < 20; ++b) {
    REQUIRE(c.occupied[size_t(b)]);
    CHECK(c.gain[b] < c.gain[b - 1]);
  }
  CHECK(c.gain[19] < c.gain[14]);
}

TEST_CASE("coefficient files round-trip") {
  const MemoryPolynomialPA pa = default_test_pa();
  const auto p = std::filesystem::temp_directory_path() / "dpd_pa_coeffs.csv";
  save_pa_coeffs(p, pa);
  const MemoryPolynomialPA q = load_pa_coeffs(p);
  REQUIRE(q.coeffs.rows() == pa.coeffs.rows());
  REQUIRE(q.coeffs.cols() == pa.coeffs.cols());
  for (Index m = 0; m < pa.coeffs.rows(); ++m)
    for (Index j = 0; j < pa.coeffs.cols(); ++j)
      CHECK(q.coeffs(m, j) == pa.coeffs(m, j));
}

TEST_CASE("output noise level lands where requested") {
  MemoryPolynomialPA pa = default_test_pa();
  pa.output_noise_dbc = -40.0;
  pa.noise_seed = 9;
  const IQSequence x = desk_ofdm(2, 8);
  const IQSequence clean = pa_apply(default_test_pa(), x);
  const IQSequence noisy = pa_apply(pa, x);
  const double p_sig = clean.samples.squaredNorm();
  const double p_noise = (noisy.samples - clean.samples).squaredNorm();
  CHECK(10 * std::log10(p_noise / p_sig) == doctest::Approx(-40.0).epsilon(0.02));
}
