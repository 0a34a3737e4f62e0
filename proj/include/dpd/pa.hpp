#pragma once

#include "dpd/iq.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace dpd {

/// Baseband memory-polynomial amplifier:
///   y_t = sum_m sum_{k odd} coeff(m, k) * x_{t-m} * |x_{t-m}|^{k-1}
/// with x_{t<0} = 0. Only odd orders are representable. Optional complex
/// Gaussian noise is added at output_noise_dbc relative to output power.
struct MemoryPolynomialPA {
  // coeffs(m, j) multiplies x_{t-m} |x_{t-m}|^{2j}, i.e. order k = 2j+1.
  Mat<cplx> coeffs;  // (memory_depth+1) x num_orders
  std::optional<double> output_noise_dbc;
  unsigned long long noise_seed = 0;

  int memory_depth() const { return static_cast<int>(coeffs.rows()) - 1; }
  int max_order() const { return 2 * static_cast<int>(coeffs.cols()) - 1; }

  void validate() const;
};

IQSequence pa_apply(const MemoryPolynomialPA& pa, const IQSequence& x);

/// The committed test amplifier: M=3, K=7, mild compression with AM/PM
/// rotation and short-memory nonlinear taps. Coefficients are constants so
/// every run sees the same device; seed only selects the noise stream.
MemoryPolynomialPA default_test_pa(unsigned long long seed = 0);

void save_pa_coeffs(const std::filesystem::path& path, const MemoryPolynomialPA& pa);
MemoryPolynomialPA load_pa_coeffs(const std::filesystem::path& path);

/// Binned AM/AM and AM/PM curves: per-|x| bin mean gain |y|/|x| and mean
/// phase offset arg(y) - arg(x).
struct AmCurves {
  VecXd bin_centers;
  VecXd gain;      // mean |y|/|x| per bin
  VecXd phase_rad;  // mean arg(y*conj(x)) per bin
  std::vector<bool> occupied;
};

AmCurves extract_am_curves(const IQSequence& x, const IQSequence& y, int num_bins);

}  // namespace dpd
