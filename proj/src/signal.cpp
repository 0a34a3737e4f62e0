#include "dpd/signal.hpp"

#include <unsupported/Eigen/FFT>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace dpd {

void OfdmConfig::validate() const {
  if (num_channels < 1) throw std::invalid_argument("ofdm: num_channels >= 1");
  if (!(channel_bw_hz > 0)) throw std::invalid_argument("ofdm: channel_bw_hz > 0");
  if (!(subcarrier_spacing_hz > 0))
    throw std::invalid_argument("ofdm: subcarrier_spacing_hz > 0");
  int q = qam_order;
  while (q > 1 && q % 4 == 0) q /= 4;
  if (q != 1) throw std::invalid_argument("ofdm: qam_order must be a power of 4");
  if (num_symbols < 1) throw std::invalid_argument("ofdm: num_symbols >= 1");
  if (!(oversample_ratio >= 1.0))
    throw std::invalid_argument("ofdm: oversample_ratio >= 1");
  if (bins_per_channel() < 1)
    throw std::invalid_argument("ofdm: channel narrower than subcarrier spacing");
}

int OfdmConfig::fft_size() const {
  const double want = occupied_bins() * oversample_ratio;
  int n = 1;
  while (n < want) n *= 2;
  return n;
}

IQSequence load_iq_csv(const std::filesystem::path& path, double sample_rate_hz) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_iq_csv: cannot open " + path.string());
  std::vector<cplx> samples;
  std::string line;
  long line_no = 0;
  auto malformed = [&](const std::string& why) {
    throw std::runtime_error("load_iq_csv: " + path.string() + ": line " +
                             std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // optional single header line
    if (line_no == 1) {
      std::string stripped;
      for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) stripped += c;
      if (stripped == "I,Q" || stripped == "i,q") continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) malformed("expected two comma-separated values");
    if (line.find(',', comma + 1) != std::string::npos)
      malformed("expected exactly two columns");
    char* end = nullptr;
    const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
    const double i = std::strtod(a.c_str(), &end);
    if (end == a.c_str() || *end != '\0') malformed("bad I value '" + a + "'");
    const double q = std::strtod(b.c_str(), &end);
    if (end == b.c_str() || *end != '\0') malformed("bad Q value '" + b + "'");
    if (!std::isfinite(i) || !std::isfinite(q)) malformed("non-finite value");
    samples.emplace_back(i, q);
  }
  if (samples.empty())
    throw std::runtime_error("load_iq_csv: " + path.string() + ": empty dataset");
  VecXcd v = Eigen::Map<VecXcd>(samples.data(), static_cast<Index>(samples.size()));
  return IQSequence(std::move(v), sample_rate_hz);
}

void save_iq_csv(const std::filesystem::path& path, const IQSequence& x) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_iq_csv: cannot open " + path.string());
  out << "I,Q\n";
  char buf[64];
  for (Index t = 0; t < x.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", x.samples[t].real(),
                  x.samples[t].imag());
    out << buf;
  }
  if (!out) throw std::runtime_error("save_iq_csv: write failed " + path.string());
}

namespace {

// Gray-free square QAM: I and Q levels at odd integers +-1, +-3, ...
cplx draw_qam(int order, std::mt19937_64& rng) {
  const int side = static_cast<int>(std::lround(std::sqrt(double(order))));
  std::uniform_int_distribution<int> d(0, side - 1);
  const double i = 2.0 * d(rng) - (side - 1);
  const double q = 2.0 * d(rng) - (side - 1);
  return {i, q};
}

}  // namespace

IQSequence generate_ofdm(const OfdmConfig& cfg) {
  cfg.validate();
  const int n_occ = cfg.occupied_bins();
  const int n_fft = cfg.fft_size();
  std::mt19937_64 rng(cfg.seed);
  Eigen::FFT<double> fft;

  // Occupied bins sit centered around DC, DC itself left empty.
  std::vector<int> bins;
  bins.reserve(n_occ);
  const int half = n_occ / 2;
  for (int k = -half; k <= n_occ - half; ++k) {
    if (k == 0) continue;
    if (static_cast<int>(bins.size()) == n_occ) break;
    bins.push_back(k < 0 ? k + n_fft : k);
  }

  std::vector<cplx> freq(n_fft), sym;
  VecXcd out(static_cast<Index>(n_fft) * cfg.num_symbols);
  for (int s = 0; s < cfg.num_symbols; ++s) {
    std::fill(freq.begin(), freq.end(), cplx(0, 0));
    for (int b : bins) freq[static_cast<size_t>(b)] = draw_qam(cfg.qam_order, rng);
    fft.inv(sym, freq);
    for (int t = 0; t < n_fft; ++t) out[static_cast<Index>(s) * n_fft + t] = sym[t];
  }

  // Scale so the RMS level is independent of constellation and bin count.
  const double rms = std::sqrt(out.squaredNorm() / double(out.size()));
  if (rms > 0) out /= rms;
  return IQSequence(std::move(out), cfg.sample_rate_hz());
}

double papr_db(const IQSequence& x) {
  const VecXd p = x.samples.cwiseAbs2();
  const double mean = p.mean();
  if (!(mean > 0)) throw std::invalid_argument("papr_db: all-zero signal");
  return 10.0 * std::log10(p.maxCoeff() / mean);
}

NormalizedPair normalize_pair(const IQSequence& x, const IQSequence& y) {
  const double sx = x.samples.cwiseAbs().maxCoeff();
  const double sy = y.samples.cwiseAbs().maxCoeff();
  if (!(sx > 0) || !(sy > 0))
    throw std::invalid_argument("normalize_pair: all-zero input");
  NormalizedPair out;
  out.x = IQSequence(x.samples / sx, x.sample_rate_hz);
  out.y = IQSequence(y.samples / sy, y.sample_rate_hz);
  out.scale_x = sx;
  out.scale_y = sy;
  return out;
}

DatasetSplit split_dataset(const IQSequence& x, const IQSequence& y,
                           const SplitRatios& ratios) {
  if (x.size() != y.size())
    throw std::invalid_argument("split_dataset: length mismatch");
  const double sum = ratios.train + ratios.val + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  const Index n = x.size();
  const Index n_val = static_cast<Index>(std::floor(ratios.val * double(n)));
  const Index n_test = static_cast<Index>(std::floor(ratios.test * double(n)));
  const Index n_train = n - n_val - n_test;  // floor(train*N) + remainder

  auto seg = [&](const IQSequence& s, Index from, Index len) {
    return len > 0 ? IQSequence(s.samples.segment(from, len), s.sample_rate_hz)
                   : IQSequence();
  };
  DatasetSplit out;
  out.train_in = seg(x, 0, n_train);
  out.train_out = seg(y, 0, n_train);
  out.val_in = seg(x, n_train, n_val);
  out.val_out = seg(y, n_train, n_val);
  out.test_in = seg(x, n_train + n_val, n_test);
  out.test_out = seg(y, n_train + n_val, n_test);
  return out;
}

}  // namespace dpd
