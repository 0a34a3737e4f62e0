#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpd/metrics.hpp"
#include "dpd/pa.hpp"
#include "dpd/signal.hpp"

#include <unsupported/Eigen/FFT>

#include <random>

using namespace dpd;

namespace {

IQSequence white_noise(Index n, unsigned seed, double fs = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(2.0));
  VecXcd v(n);
  for (Index i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
  return IQSequence(v, fs);
}

IQSequence bandlimit(const IQSequence& x, double lo_hz, double hi_hz) {
  Eigen::FFT<double> fft;
  const Index n = x.size();
  std::vector<cplx> in(x.samples.data(), x.samples.data() + n), freq, out;
  fft.fwd(freq, in);
  for (Index k = 0; k < n; ++k) {
    const Index shifted = k <= n / 2 ? k : k - n;
    const double f = double(shifted) * x.sample_rate_hz / double(n);
    if (f < lo_hz || f >= hi_hz) freq[size_t(k)] = 0;  // keep [lo, hi)
  }
  fft.inv(out, freq);
  VecXcd v = Eigen::Map<VecXcd>(out.data(), n);
  return IQSequence(std::move(v), x.sample_rate_hz);
}

}  // namespace

TEST_CASE("tone concentrates in one bin") {
  const Index n = 1 << 16, l = 512;
  const double fs = 1.0, f0 = 37.0 / double(l);
  VecXcd v(n);
  for (Index t = 0; t < n; ++t) v[t] = std::polar(1.0, 2 * M_PI * f0 * t);
  const Spectrum sp = psd_welch(IQSequence(v, fs), l);

  Index peak_idx = 0;
  sp.psd_db.maxCoeff(&peak_idx);
  CHECK(sp.freq_hz[peak_idx] == doctest::Approx(f0).epsilon(1e-9));

  VecXd sorted = sp.psd_db;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const double median = sorted[sorted.size() / 2];
  CHECK(sp.psd_db[peak_idx] - median >= 50.0);
}

TEST_CASE("white noise is flat within 1.5 dB with enough averages") {
  const Index n = 1 << 17, l = 512;  // ~511 segments at 50% overlap
  const Spectrum sp = psd_welch(white_noise(n, 1), l);
  const double mean_db =
      10.0 * std::log10(sp.psd_linear().mean());
  for (Index i = 0; i < sp.psd_db.size(); ++i)
    CHECK(std::abs(sp.psd_db[i] - mean_db) <= 1.5);
}

TEST_CASE("Parseval consistency") {
  SUBCASE("tone is exact") {
    const Index n = 1 << 14;
    VecXcd v(n);
    for (Index t = 0; t < n; ++t) v[t] = std::polar(0.7, 2 * M_PI * 0.123 * t);
    const IQSequence x(v, 2.5);
    const Spectrum sp = psd_welch(x, 1024);
    const double time_power = x.samples.squaredNorm() / double(n);
    CHECK(10 * std::log10(sp.total_power() / time_power) ==
          doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("noise within 0.1 dB") {
    const IQSequence x = white_noise(1 << 17, 2, 5.0);
    const Spectrum sp = psd_welch(x, 1024);
    const double time_power = x.samples.squaredNorm() / double(x.size());
    CHECK(std::abs(10 * std::log10(sp.total_power() / time_power)) <= 0.1);
  }
}

TEST_CASE("spectrum of a real signal is symmetric") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const Index n = 1 << 16;
  VecXcd v(n);
  for (Index t = 0; t < n; ++t) v[t] = cplx(g(rng), 0.0);
  const Spectrum sp = psd_welch(IQSequence(v, 1.0), 256);
  const Index l = sp.psd_db.size();
  // compare mirrored bins, skipping DC and the unpaired Nyquist bin
  for (Index i = 1; i < l / 2; ++i)
    CHECK(sp.psd_db[l / 2 + i] == doctest::Approx(sp.psd_db[l / 2 - i]).epsilon(0.15));
}

TEST_CASE("acpr of white noise is 0 dBc") {
  const IQSequence x = white_noise(1 << 18, 4, 4.0);
  const Spectrum sp = psd_welch(x, 1024);
  AcprConfig cfg = AcprConfig::for_bandwidth(1.0);  // quarter of fs = 4
  const AcprResult r = acpr(sp, cfg);
  CHECK(std::abs(r.lower_dbc) <= 0.2);
  CHECK(std::abs(r.upper_dbc) <= 0.2);
  CHECK(std::abs(r.avg_dbc) <= 0.2);
  CHECK(r.avg_dbc >= std::min(r.lower_dbc, r.upper_dbc));
  CHECK(r.avg_dbc <= std::max(r.lower_dbc, r.upper_dbc));
}

TEST_CASE("acpr of an ideally bandlimited signal is leakage-bounded") {
  const IQSequence noise = white_noise(1 << 18, 5, 4.0);
  const IQSequence x = bandlimit(noise, -0.495, 0.495);  // 99% occupancy guard
  const Spectrum sp = psd_welch(x, 8192);
  const AcprResult r = acpr(sp, AcprConfig::for_bandwidth(1.0));
  CHECK(r.lower_dbc <= -60.0);
  CHECK(r.upper_dbc <= -60.0);
}

TEST_CASE("acpr is invariant to amplitude scaling") {
  OfdmConfig cfg;
  cfg.num_symbols = 8;
  cfg.seed = 6;
  const IQSequence x = generate_ofdm(cfg);
  const IQSequence y(x.samples * 7.3, x.sample_rate_hz);
  const AcprConfig band = AcprConfig::for_bandwidth(cfg.occupied_bw_hz());
  const AcprResult a = acpr(psd_welch(x, 4096), band);
  const AcprResult b = acpr(psd_welch(y, 4096), band);
  CHECK(a.avg_dbc == doctest::Approx(b.avg_dbc).epsilon(1e-9));
}

TEST_CASE("memoryless cubic distortion is spectrally symmetric") {
  OfdmConfig ofdm;
  ofdm.num_symbols = 48;
  ofdm.seed = 7;
  IQSequence x = generate_ofdm(ofdm);
  x = IQSequence(x.samples / x.samples.cwiseAbs().maxCoeff(), x.sample_rate_hz);
  MemoryPolynomialPA pa;
  pa.coeffs = Mat<cplx>::Zero(1, 2);
  pa.coeffs(0, 0) = cplx(1, 0);
  pa.coeffs(0, 1) = cplx(-0.3, 0.2);
  const IQSequence y = pa_apply(pa, x);
  const AcprResult r = acpr(psd_welch(y, 4096),
                            AcprConfig::for_bandwidth(ofdm.occupied_bw_hz()));
  CHECK(std::abs(r.lower_dbc - r.upper_dbc) <= 1.0);
}

TEST_CASE("acpr rejects bands beyond the analyzed range") {
  const IQSequence x = white_noise(1 << 14, 8, 1.0);
  const Spectrum sp = psd_welch(x, 512);
  CHECK_THROWS(acpr(sp, AcprConfig::for_bandwidth(0.9)));  // adjacents past Nyquist
}

TEST_CASE("evm") {
  const IQSequence x = white_noise(20000, 9);
  SUBCASE("pure complex gain hits the floor") {
    const IQSequence y(x.samples * cplx(0.8, -1.1), 1.0);
    CHECK(evm_db(x, y) == -120.0);
  }
  SUBCASE("pure rotation hits the floor") {
    const IQSequence y(x.samples * std::polar(1.0, 1.234), 1.0);
    CHECK(evm_db(x, y) == -120.0);
  }
  SUBCASE("additive noise at -30 dB reads back") {
    const IQSequence n = white_noise(20000, 10);
    const double alpha = std::sqrt(
        1e-3 * x.samples.squaredNorm() / n.samples.squaredNorm());
    const IQSequence y(x.samples + alpha * n.samples, 1.0);
    CHECK(evm_db(x, y) == doctest::Approx(-30.0).epsilon(0.01));
  }
  SUBCASE("invariant to scaling of y") {
    const IQSequence n = white_noise(20000, 11);
    const IQSequence y(x.samples + 0.01 * n.samples, 1.0);
    const IQSequence y2(y.samples * cplx(0.0, 2.5), 1.0);
    CHECK(evm_db(x, y) == doctest::Approx(evm_db(x, y2)).epsilon(1e-9));
  }
  SUBCASE("zero reference throws") {
    VecXcd z = VecXcd::Zero(4);
    CHECK_THROWS(evm_db(IQSequence(z, 1.0), x));
  }
}

TEST_CASE("nmse") {
  const IQSequence x = white_noise(5000, 12);
  SUBCASE("identity is floored") { CHECK(nmse_db(x, x) == -120.0); }
  SUBCASE("10% gain error is -20 dB") {
    const IQSequence y(x.samples * 1.1, 1.0);
    CHECK(nmse_db(x, y) == doctest::Approx(-20.0).epsilon(1e-9));
  }
  SUBCASE("zero output is 0 dB") {
    VecXcd z = VecXcd::Zero(x.size());
    CHECK(nmse_db(x, IQSequence(z, 1.0)) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("not invariant to scaling, unlike evm") {
    const IQSequence y(x.samples * 2.0, 1.0);
    CHECK(nmse_db(x, y) == doctest::Approx(0.0).epsilon(1e-9));  // |y-x| = |x|
    CHECK(evm_db(x, y) == -120.0);
  }
}

TEST_CASE("welch input validation") {
  const IQSequence x = white_noise(100, 13);
  CHECK_THROWS(psd_welch(x, 128));  // segment longer than the signal
  CHECK_THROWS(psd_welch(x, 64, 1.5));
  CHECK_THROWS(psd_welch(x, 64, 0.5, "hamming"));
}
