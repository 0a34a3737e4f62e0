#include "dpd/pa.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace dpd {

void MemoryPolynomialPA::validate() const {
  if (coeffs.rows() < 1 || coeffs.cols() < 1)
    throw std::invalid_argument("pa: empty coefficient set");
  if (!coeffs.real().allFinite() || !coeffs.imag().allFinite())
    throw std::invalid_argument("pa: non-finite coefficient");
  if (coeffs(0, 0) == cplx(0, 0))
    throw std::invalid_argument("pa: zero linear gain coeff(m=0,k=1)");
}

IQSequence pa_apply(const MemoryPolynomialPA& pa, const IQSequence& x) {
  pa.validate();
  const Index n = x.size();
  const int mdepth = pa.memory_depth();
  const int orders = static_cast<int>(pa.coeffs.cols());
  VecXcd y = VecXcd::Zero(n);
  for (Index t = 0; t < n; ++t) {
    cplx acc(0, 0);
    for (int m = 0; m <= mdepth && m <= t; ++m) {
      const cplx xm = x.samples[t - m];
      const double mag2 = std::norm(xm);
      double env = 1.0;
      cplx basis_sum(0, 0);
      for (int j = 0; j < orders; ++j) {
        basis_sum += pa.coeffs(m, j) * env;
        env *= mag2;
      }
      acc += xm * basis_sum;
    }
    y[t] = acc;
  }
  if (pa.output_noise_dbc) {
    const double sig_pow = y.squaredNorm() / double(n);
    const double noise_pow = sig_pow * std::pow(10.0, *pa.output_noise_dbc / 10.0);
    std::mt19937_64 rng(pa.noise_seed);
    std::normal_distribution<double> g(0.0, std::sqrt(noise_pow / 2.0));
    for (Index t = 0; t < n; ++t) y[t] += cplx(g(rng), g(rng));
  }
  return IQSequence(std::move(y), x.sample_rate_hz);
}

MemoryPolynomialPA default_test_pa(unsigned long long seed) {
  MemoryPolynomialPA pa;
  pa.coeffs = Mat<cplx>::Zero(4, 4);  // m in 0..3, orders 1,3,5,7
  using namespace std::complex_literals;
  // Static polynomial: ~3 dB gain compression and ~15 deg AM/PM at |x|=1.
  pa.coeffs(0, 0) = 1.00 + 0.00i;         // k=1
  pa.coeffs(0, 1) = -0.26 + 0.19i;        // k=3
  pa.coeffs(0, 2) = -0.06 + 0.04i;        // k=5
  pa.coeffs(0, 3) = 0.015 - 0.012i;       // k=7
  // Short memory on the nonlinear terms only, so the small-signal response
  // stays a pure scalar gain.
  pa.coeffs(1, 1) = 0.045 - 0.030i;       // m=1, k=3
  pa.coeffs(2, 1) = -0.018 + 0.012i;      // m=2, k=3
  pa.coeffs(1, 2) = 0.010 + 0.008i;       // m=1, k=5
  pa.coeffs(3, 1) = 0.008 - 0.006i;       // m=3, k=3
  pa.output_noise_dbc.reset();
  pa.noise_seed = seed;
  return pa;
}

void save_pa_coeffs(const std::filesystem::path& path, const MemoryPolynomialPA& pa) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_pa_coeffs: cannot open " + path.string());
  out << "m,k,re,im\n";
  char buf[96];
  for (Index m = 0; m < pa.coeffs.rows(); ++m)
    for (Index j = 0; j < pa.coeffs.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%ld,%ld,%.17g,%.17g\n", long(m), long(2 * j + 1),
                    pa.coeffs(m, j).real(), pa.coeffs(m, j).imag());
      out << buf;
    }
}

MemoryPolynomialPA load_pa_coeffs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pa_coeffs: cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  struct Entry {
    int m, k;
    cplx c;
  };
  std::vector<Entry> entries;
  int max_m = 0, max_k = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    Entry e;
    double re, im;
    std::getline(ss, tok, ',');
    e.m = std::stoi(tok);
    std::getline(ss, tok, ',');
    e.k = std::stoi(tok);
    std::getline(ss, tok, ',');
    re = std::stod(tok);
    std::getline(ss, tok, ',');
    im = std::stod(tok);
    if (e.k % 2 == 0) throw std::runtime_error("load_pa_coeffs: even order " + line);
    e.c = cplx(re, im);
    entries.push_back(e);
    max_m = std::max(max_m, e.m);
    max_k = std::max(max_k, e.k);
  }
  MemoryPolynomialPA pa;
  pa.coeffs = Mat<cplx>::Zero(max_m + 1, (max_k + 1) / 2);
  for (const auto& e : entries) pa.coeffs(e.m, (e.k - 1) / 2) = e.c;
  pa.validate();
  return pa;
}

AmCurves extract_am_curves(const IQSequence& x, const IQSequence& y, int num_bins) {
  if (x.size() != y.size())
    throw std::invalid_argument("extract_am_curves: length mismatch");
  if (num_bins < 2) throw std::invalid_argument("extract_am_curves: num_bins >= 2");
  const double max_mag = x.samples.cwiseAbs().maxCoeff();
  AmCurves out;
  out.bin_centers.resize(num_bins);
  out.gain = VecXd::Zero(num_bins);
  out.phase_rad = VecXd::Zero(num_bins);
  out.occupied.assign(static_cast<size_t>(num_bins), false);
  VecXd counts = VecXd::Zero(num_bins);
  const double width = max_mag / num_bins;
  for (int b = 0; b < num_bins; ++b) out.bin_centers[b] = (b + 0.5) * width;
  for (Index t = 0; t < x.size(); ++t) {
    const double mag = std::abs(x.samples[t]);
    if (mag <= 0) continue;
    int b = std::min(num_bins - 1, static_cast<int>(mag / width));
    out.gain[b] += std::abs(y.samples[t]) / mag;
    out.phase_rad[b] += std::arg(y.samples[t] * std::conj(x.samples[t]));
    counts[b] += 1;
  }
  for (int b = 0; b < num_bins; ++b) {
    if (counts[b] > 0) {
      out.gain[b] /= counts[b];
      out.phase_rad[b] /= counts[b];
      out.occupied[static_cast<size_t>(b)] = true;
    }
  }
  return out;
}

}  // namespace dpd
