#pragma once

#include "dpd/iq.hpp"

#include <string>

namespace dpd {

/// Two-sided power spectral density of complex baseband, centered at 0 Hz.
struct Spectrum {
  VecXd freq_hz;   // monotone ascending bin centers
  VecXd psd_db;    // 10*log10 of density (relative units / Hz)
  double bin_hz = 0;
  double rbw_hz = 0;  // equivalent noise bandwidth of the window
  std::string window = "hann";

  VecXd psd_linear() const {
    VecXd out(psd_db.size());
    for (Index i = 0; i < psd_db.size(); ++i)
      out[i] = std::pow(10.0, psd_db[i] / 10.0);
    return out;
  }

  /// Total integrated power (for Parseval checks).
  double total_power() const { return psd_linear().sum() * bin_hz; }
};

/// Averaged Hann-windowed periodograms. Normalization is
/// Parseval-consistent: integrating the density over frequency recovers the
/// time-domain mean power.
Spectrum psd_welch(const IQSequence& x, Index segment_len, double overlap = 0.5,
                   const std::string& window = "hann");

/// Picks the power-of-two segment length that keeps the resolution
/// bandwidth at or below main_bw / 1000 (capped by the signal length).
Index welch_segment_for(double sample_rate_hz, double main_bw_hz, Index signal_len);

struct AcprConfig {
  double main_lo_hz = 0, main_hi_hz = 0;
  double adjacent_offset_hz = 0;  // center-to-center offset of each adjacent band
  double adjacent_bw_hz = 0;      // 0 means same as the main bandwidth

  double main_bw() const { return main_hi_hz - main_lo_hz; }
  double adj_bw() const { return adjacent_bw_hz > 0 ? adjacent_bw_hz : main_bw(); }

  /// Composite-carrier convention: main band centered at DC, adjacent bands
  /// of the same width immediately above and below.
  static AcprConfig for_bandwidth(double occupied_bw_hz) {
    AcprConfig c;
    c.main_lo_hz = -occupied_bw_hz / 2;
    c.main_hi_hz = occupied_bw_hz / 2;
    c.adjacent_offset_hz = occupied_bw_hz;
    return c;
  }
};

struct AcprResult {
  double lower_dbc = 0, upper_dbc = 0;
  double avg_dbc = 0;  // arithmetic mean of the two sides in dB
};

AcprResult acpr(const Spectrum& spec, const AcprConfig& cfg);

/// Error vector magnitude against the reference after a least-squares
/// complex gain fit, in dB (floored at -120).
double evm_db(const IQSequence& x_ref, const IQSequence& y);

/// 10*log10(sum|y-x|^2 / sum|x|^2), no gain fit, floored at -120 dB.
double nmse_db(const IQSequence& x_ref, const IQSequence& y);

}  // namespace dpd
