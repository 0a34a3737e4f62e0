#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpd/metrics.hpp"
#include "dpd/signal.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace dpd;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dpd_sig_" + name);
  fs::remove(p);
  return p;
}

IQSequence make_seq(std::initializer_list<cplx> vals, double fs = 1.0) {
  VecXcd v(Index(vals.size()));
  Index i = 0;
  for (const cplx& c : vals) v[i++] = c;
  return IQSequence(std::move(v), fs);
}

}  // namespace

TEST_CASE("load_iq_csv parses rows in order") {
  const fs::path p = temp_file("basic.csv");
  {
    std::ofstream f(p);
    f << "0.1,0.2\n0.3,-0.4\n";
  }
  const IQSequence x = load_iq_csv(p, 2.0);
  REQUIRE(x.size() == 2);
  CHECK(x.samples[0] == cplx(0.1, 0.2));
  CHECK(x.samples[1] == cplx(0.3, -0.4));
  CHECK(x.sample_rate_hz == 2.0);
}

TEST_CASE("load_iq_csv accepts the optional header") {
  const fs::path p = temp_file("header.csv");
  {
    std::ofstream f(p);
    f << "I,Q\n1,2\n";
  }
  CHECK(load_iq_csv(p, 1.0).samples[0] == cplx(1, 2));
}

TEST_CASE("load_iq_csv errors") {
  const fs::path empty = temp_file("empty.csv");
  { std::ofstream f(empty); }
  CHECK_THROWS_WITH_AS(load_iq_csv(empty, 1.0),
                       doctest::Contains("empty dataset"), std::runtime_error);

  const fs::path one_col = temp_file("onecol.csv");
  {
    std::ofstream f(one_col);
    f << "0.1\n";
  }
  CHECK_THROWS_WITH_AS(load_iq_csv(one_col, 1.0), doctest::Contains("line 1"),
                       std::runtime_error);

  CHECK_THROWS_AS(load_iq_csv(temp_file("missing.csv"), 1.0), std::runtime_error);
}

TEST_CASE("save/load round-trips bit-exactly") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  VecXcd v(257);
  for (Index i = 0; i < v.size(); ++i) v[i] = cplx(g(rng), g(rng));
  const IQSequence x(v, 5.0);
  const fs::path p = temp_file("roundtrip.csv");
  save_iq_csv(p, x);
  const IQSequence y = load_iq_csv(p, 5.0);
  REQUIRE(y.size() == x.size());
  for (Index i = 0; i < v.size(); ++i) CHECK(y.samples[i] == x.samples[i]);
}

TEST_CASE("papr basics") {
  // axis-aligned unit samples: max power equals mean power exactly
  const IQSequence tone = make_seq({{1, 0}, {0, 1}, {-1, 0}, {0, -1}});
  CHECK(papr_db(tone) == 0.0);

  const IQSequence two = make_seq({{1, 0}, {std::sqrt(3.0), 0}});
  CHECK(papr_db(two) == doctest::Approx(10.0 * std::log10(3.0 / 2.0)).epsilon(1e-12));

  CHECK_THROWS(papr_db(make_seq({{0, 0}, {0, 0}})));
}

TEST_CASE("papr invariant to global scaling") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  VecXcd v(1000);
  for (Index i = 0; i < v.size(); ++i) v[i] = cplx(g(rng), g(rng));
  const IQSequence x(v, 1.0);
  const IQSequence y(v * cplx(0.3, -1.7), 1.0);
  CHECK(papr_db(x) == doctest::Approx(papr_db(y)).epsilon(1e-12));
}

TEST_CASE("normalize_pair") {
  const IQSequence x = make_seq({{2, 0}, {1, 0}});
  const IQSequence y = make_seq({{0, 5}, {1, 0}});
  const NormalizedPair np = normalize_pair(x, y);
  CHECK(np.scale_x == 2.0);
  CHECK(np.scale_y == 5.0);
  CHECK(np.x.samples[0] == cplx(1, 0));
  CHECK(np.y.samples[0] == cplx(0, 1));
  // de-normalization round trip
  for (Index i = 0; i < x.size(); ++i) {
    CHECK(std::abs(np.x.samples[i] * np.scale_x - x.samples[i]) < 1e-12);
    CHECK(std::abs(np.y.samples[i] * np.scale_y - y.samples[i]) < 1e-12);
  }
  CHECK_THROWS(normalize_pair(make_seq({{0, 0}}), y));
}

TEST_CASE("build_features rows") {
  const IQSequence x = make_seq({{1, 0}, {0, 1}, {0.6, 0.8}});
  const FeatureSequence<double> f = build_features<double>(x);
  REQUIRE(f.length() == 3);
  // row 0: x0 = 1, x1 = j
  CHECK(f.phi(0, 0) == 1.0);
  CHECK(f.phi(1, 0) == 0.0);
  CHECK(f.phi(2, 0) == 0.0);
  CHECK(f.phi(3, 0) == 1.0);
  CHECK(f.phi(4, 0) == 1.0);
  CHECK(f.phi(5, 0) == 1.0);
  // 3-4-5 triangle: |x| = 1 so both magnitude features are 1
  CHECK(f.phi(4, 2) == doctest::Approx(1.0));
  CHECK(f.phi(5, 2) == doctest::Approx(1.0));
  // final row replicates the last sample as its own look-ahead
  CHECK(f.phi(2, 2) == doctest::Approx(0.6));
  CHECK(f.phi(3, 2) == doctest::Approx(0.8));

  CHECK_THROWS(build_features<double>(make_seq({{1, 0}})));
}

TEST_CASE("build_features scaling property") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  VecXcd v(64);
  for (Index i = 0; i < v.size(); ++i) v[i] = cplx(g(rng), g(rng));
  const double c = 1.7;
  const FeatureSequence<double> f1 = build_features<double>(IQSequence(v, 1.0));
  const FeatureSequence<double> f2 = build_features<double>(IQSequence(v * c, 1.0));
  for (Index t = 0; t < f1.length(); ++t) {
    for (int k = 0; k < 5; ++k)
      CHECK(f2.phi(k, t) == doctest::Approx(c * f1.phi(k, t)).epsilon(1e-12));
    CHECK(f2.phi(5, t) == doctest::Approx(c * c * c * f1.phi(5, t)).epsilon(1e-12));
  }
}

TEST_CASE("split_dataset splits contiguously with remainder to train") {
  auto make_n = [](Index n) {
    VecXcd v(n);
    for (Index i = 0; i < n; ++i) v[i] = cplx(double(i), 0);
    return IQSequence(v, 1.0);
  };

  SUBCASE("98304 samples as in the measured dataset") {
    const IQSequence x = make_n(98304);
    const DatasetSplit s = split_dataset(x, x, SplitRatios{});
    CHECK(s.train_in.size() == 58984);
    CHECK(s.val_in.size() == 19660);
    CHECK(s.test_in.size() == 19660);
  }
  SUBCASE("10 samples") {
    const IQSequence x = make_n(10);
    const DatasetSplit s = split_dataset(x, x, SplitRatios{});
    CHECK(s.train_in.size() == 6);
    CHECK(s.val_in.size() == 2);
    CHECK(s.test_in.size() == 2);
  }
  SUBCASE("all-train ratios") {
    const IQSequence x = make_n(10);
    const DatasetSplit s = split_dataset(x, x, SplitRatios{1.0, 0.0, 0.0});
    CHECK(s.train_in.size() == 10);
    CHECK(s.val_in.size() == 0);
  }
  SUBCASE("partitions are disjoint and cover in order") {
    const IQSequence x = make_n(101);
    const DatasetSplit s = split_dataset(x, x, SplitRatios{});
    Index k = 0;
    for (const auto* part : {&s.train_in, &s.val_in, &s.test_in})
      for (Index i = 0; i < part->size(); ++i)
        CHECK(part->samples[i].real() == double(k++));
    CHECK(k == 101);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS(split_dataset(make_n(5), make_n(6), SplitRatios{}));
  }
}

TEST_CASE("generate_ofdm determinism") {
  OfdmConfig cfg;
  cfg.num_channels = 1;
  cfg.qam_order = 4;
  cfg.num_symbols = 2;
  cfg.seed = 42;
  const IQSequence a = generate_ofdm(cfg);
  const IQSequence b = generate_ofdm(cfg);
  REQUIRE(a.size() == b.size());
  for (Index i = 0; i < a.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("generate_ofdm occupied bandwidth at -30 dB points") {
  OfdmConfig cfg;  // 5 x 0.4 MHz at 9.8304 MHz
  cfg.num_symbols = 16;
  cfg.seed = 5;
  const IQSequence x = generate_ofdm(cfg);
  CHECK(x.sample_rate_hz == doctest::Approx(9.8304e6));

  const Spectrum sp = psd_welch(x, 4096);
  const double peak = sp.psd_db.maxCoeff();
  // find the -30 dB edges
  double lo = 0, hi = 0;
  for (Index i = 0; i < sp.freq_hz.size(); ++i)
    if (sp.psd_db[i] > peak - 30.0) {
      lo = sp.freq_hz[i];
      break;
    }
  for (Index i = sp.freq_hz.size() - 1; i >= 0; --i)
    if (sp.psd_db[i] > peak - 30.0) {
      hi = sp.freq_hz[i];
      break;
    }
  const double occupied = hi - lo;
  CHECK(occupied == doctest::Approx(cfg.occupied_bw_hz()).epsilon(0.15));
}

TEST_CASE("generate_ofdm 256-QAM crest factor") {
  OfdmConfig cfg;
  cfg.num_symbols = 32;
  cfg.qam_order = 256;
  cfg.seed = 9;
  const double papr = papr_db(generate_ofdm(cfg));
  CHECK(papr >= 8.0);
  CHECK(papr <= 12.0);
}

TEST_CASE("ofdm config validation") {
  OfdmConfig cfg;
  cfg.qam_order = 8;  // not a power of 4
  CHECK_THROWS(generate_ofdm(cfg));
  cfg = OfdmConfig{};
  cfg.oversample_ratio = 0.5;
  CHECK_THROWS(generate_ofdm(cfg));
}
