#include "dpd/metrics.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <vector>

namespace dpd {

Spectrum psd_welch(const IQSequence& x, Index segment_len, double overlap,
                   const std::string& window) {
  const Index n = x.size();
  if (segment_len < 2 || segment_len > n)
    throw std::invalid_argument("psd_welch: segment length out of range");
  if (!(overlap >= 0 && overlap < 1))
    throw std::invalid_argument("psd_welch: overlap must be in [0,1)");
  if (window != "hann")
    throw std::invalid_argument("psd_welch: unsupported window " + window);

  const Index l = segment_len;
  VecXd w(l);
  for (Index i = 0; i < l; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * double(i) / double(l)));
  const double w2 = w.squaredNorm();
  const double w1 = w.sum();

  const Index hop = std::max<Index>(1, Index(std::llround(double(l) * (1.0 - overlap))));
  const Index segments = (n - l) / hop + 1;

  Eigen::FFT<double> fft;
  std::vector<cplx> seg(static_cast<size_t>(l)), out;
  VecXd accum = VecXd::Zero(l);
  for (Index s = 0; s < segments; ++s) {
    const Index base = s * hop;
    for (Index i = 0; i < l; ++i) seg[size_t(i)] = w[i] * x.samples[base + i];
    fft.fwd(out, seg);
    for (Index i = 0; i < l; ++i) accum[i] += std::norm(out[size_t(i)]);
  }

  const double fs = x.sample_rate_hz;
  const double norm = fs * w2 * double(segments);

  Spectrum sp;
  sp.freq_hz.resize(l);
  sp.psd_db.resize(l);
  sp.bin_hz = fs / double(l);
  sp.rbw_hz = fs * double(l) * w2 / (w1 * w1) / double(l);  // ENBW
  sp.window = window;
  const Index half = l / 2;
  for (Index i = 0; i < l; ++i) {
    // fftshift: output index i corresponds to DFT bin i - half (mod l)
    const Index k = (i - half + l) % l;
    sp.freq_hz[i] = double(i - half) * sp.bin_hz;
    const double p = accum[k] / norm;
    sp.psd_db[i] = 10.0 * std::log10(std::max(p, 1e-300));
  }
  return sp;
}

Index welch_segment_for(double sample_rate_hz, double main_bw_hz, Index signal_len) {
  const double target_rbw = main_bw_hz / 1000.0;
  Index l = 64;
  // ENBW of Hann is 1.5 bins
  while (1.5 * sample_rate_hz / double(l) > target_rbw && 2 * l <= signal_len) l *= 2;
  return std::min<Index>(l, signal_len);
}

namespace {

// Bin centers landing exactly on a shared band edge belong to the main
// channel, so an adjacent band never collects the straddled edge bin.
double band_power(const Spectrum& sp, double lo, double hi, bool incl_lo,
                  bool incl_hi) {
  const double eps = sp.bin_hz * 1e-9;
  double p = 0;
  for (Index i = 0; i < sp.freq_hz.size(); ++i) {
    const double f = sp.freq_hz[i];
    const bool above = incl_lo ? f >= lo - eps : f > lo + eps;
    const bool below = incl_hi ? f <= hi + eps : f < hi - eps;
    if (above && below) p += std::pow(10.0, sp.psd_db[i] / 10.0) * sp.bin_hz;
  }
  return p;
}

}  // namespace

AcprResult acpr(const Spectrum& spec, const AcprConfig& cfg) {
  if (!(cfg.main_hi_hz > cfg.main_lo_hz))
    throw std::invalid_argument("acpr: empty main band");
  const double fmin = spec.freq_hz[0];
  const double fmax = spec.freq_hz[spec.freq_hz.size() - 1] + spec.bin_hz;
  const double c_main = 0.5 * (cfg.main_lo_hz + cfg.main_hi_hz);
  const double bw = cfg.adj_bw();
  const double lo_lo = c_main - cfg.adjacent_offset_hz - bw / 2;
  const double up_hi = c_main + cfg.adjacent_offset_hz + bw / 2;
  if (lo_lo < fmin || up_hi > fmax)
    throw std::invalid_argument("acpr: bands exceed the analyzed bandwidth");

  const double p_main =
      band_power(spec, cfg.main_lo_hz, cfg.main_hi_hz, true, true);
  if (!(p_main > 0)) throw std::invalid_argument("acpr: zero main-band power");
  const double p_lower = band_power(spec, lo_lo, c_main - cfg.adjacent_offset_hz + bw / 2,
                                    true, false);
  const double p_upper = band_power(spec, c_main + cfg.adjacent_offset_hz - bw / 2,
                                    up_hi, false, true);

  AcprResult r;
  r.lower_dbc = 10.0 * std::log10(std::max(p_lower / p_main, 1e-30));
  r.upper_dbc = 10.0 * std::log10(std::max(p_upper / p_main, 1e-30));
  r.avg_dbc = 0.5 * (r.lower_dbc + r.upper_dbc);
  return r;
}

double evm_db(const IQSequence& x_ref, const IQSequence& y) {
  if (x_ref.size() != y.size())
    throw std::invalid_argument("evm_db: length mismatch");
  const double px = x_ref.samples.squaredNorm();
  if (!(px > 0)) throw std::invalid_argument("evm_db: zero reference");
  cplx g(0, 0);
  for (Index t = 0; t < y.size(); ++t)
    g += y.samples[t] * std::conj(x_ref.samples[t]);
  g /= px;
  const double pg = std::norm(g) * px;
  if (!(pg > 0)) throw std::invalid_argument("evm_db: zero fitted reference");
  double perr = 0;
  for (Index t = 0; t < y.size(); ++t)
    perr += std::norm(y.samples[t] - g * x_ref.samples[t]);
  return std::max(10.0 * std::log10(perr / pg), -120.0);
}

double nmse_db(const IQSequence& x_ref, const IQSequence& y) {
  if (x_ref.size() != y.size())
    throw std::invalid_argument("nmse_db: length mismatch");
  const double px = x_ref.samples.squaredNorm();
  if (!(px > 0)) throw std::invalid_argument("nmse_db: zero reference");
  const double pe = (y.samples - x_ref.samples).squaredNorm();
  return std::max(10.0 * std::log10(pe / px), -120.0);
}

}  // namespace dpd
