#pragma once

#include "dpd/iq.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <utility>

namespace dpd {

/// Multicarrier QAM test-signal generator. num_channels contiguous channels
/// of channel_bw_hz each are filled with random QAM symbols on a
/// subcarrier_spacing_hz grid; symbols are synthesized by IFFT (no cyclic
/// prefix) and concatenated. The IFFT length is the smallest power of two
/// >= occupied_bins * oversample_ratio, so the output sample rate is
/// subcarrier_spacing_hz * fft_size.
struct OfdmConfig {
  int num_channels = 5;
  double channel_bw_hz = 0.4e6;
  double subcarrier_spacing_hz = 2400.0;
  int qam_order = 256;  // power of 4
  int num_symbols = 28;
  double oversample_ratio = 4.9;
  unsigned long long seed = 1;

  int bins_per_channel() const {
    return static_cast<int>(std::floor(channel_bw_hz / subcarrier_spacing_hz));
  }
  int occupied_bins() const { return num_channels * bins_per_channel(); }
  int fft_size() const;
  double sample_rate_hz() const { return subcarrier_spacing_hz * fft_size(); }
  double occupied_bw_hz() const { return occupied_bins() * subcarrier_spacing_hz; }

  void validate() const;
};

IQSequence load_iq_csv(const std::filesystem::path& path, double sample_rate_hz);
void save_iq_csv(const std::filesystem::path& path, const IQSequence& x);

IQSequence generate_ofdm(const OfdmConfig& cfg);

/// Peak-to-average power ratio in dB: 10*log10(max|x|^2 / mean|x|^2).
double papr_db(const IQSequence& x);

struct NormalizedPair {
  IQSequence x, y;
  double scale_x = 1.0, scale_y = 1.0;
};

/// Divide each sequence by its own max magnitude; scales are returned so the
/// caller can undo the normalization.
NormalizedPair normalize_pair(const IQSequence& x, const IQSequence& y);

struct SplitRatios {
  double train = 0.6, val = 0.2, test = 0.2;
};

/// Contiguous split in order train|val|test. Sizes are floor(ratio*N); the
/// remainder goes to train.
DatasetSplit split_dataset(const IQSequence& x, const IQSequence& y,
                           const SplitRatios& ratios);

namespace detail {

template <typename T>
inline std::array<T, kFeatureWidth> feature_row(const cplx& xt, const cplx& xnext) {
  const double mag = std::abs(xt);
  return {static_cast<T>(xt.real()),    static_cast<T>(xt.imag()),
          static_cast<T>(xnext.real()), static_cast<T>(xnext.imag()),
          static_cast<T>(mag),          static_cast<T>(mag * mag * mag)};
}

}  // namespace detail

/// Feature matrix for a whole sequence. Column t is
/// [I_t, Q_t, I_{t+1}, Q_{t+1}, |x_t|, |x_t|^3]; the final column reuses the
/// last sample as its own lookahead.
template <typename T>
FeatureSequence<T> build_features(const IQSequence& x) {
  const Index n = x.size();
  if (n < 2) throw std::invalid_argument("build_features: need length >= 2");
  FeatureSequence<T> out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.phi.resize(kFeatureWidth, n);
  for (Index t = 0; t < n; ++t) {
    const cplx& xt = x.samples[t];
    const cplx& xn = x.samples[std::min(t + 1, n - 1)];
    const auto row = detail::feature_row<T>(xt, xn);
    for (int k = 0; k < kFeatureWidth; ++k) out.phi(k, t) = row[k];
  }
  return out;
}

}  // namespace dpd
