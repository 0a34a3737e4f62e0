#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace dpd {

template <typename T>
using Vec = Eigen::Vector<T, Eigen::Dynamic>;
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

using cplx = std::complex<double>;
using VecXd = Eigen::VectorXd;
using VecXcd = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Complex baseband samples at a fixed sample rate. The carrier of every
/// signal in the pipeline (PA input x, PA output y, predistorted u).
struct IQSequence {
  VecXcd samples;
  double sample_rate_hz = 1.0;

  IQSequence() = default;
  IQSequence(VecXcd s, double fs) : samples(std::move(s)), sample_rate_hz(fs) {
    if (samples.size() < 1) throw std::invalid_argument("IQSequence: empty");
    if (!(sample_rate_hz > 0.0))
      throw std::invalid_argument("IQSequence: sample_rate_hz must be > 0");
    if (!samples.allFinite())
      throw std::invalid_argument("IQSequence: non-finite sample");
  }

  Index size() const { return samples.size(); }
};

inline constexpr int kFeatureWidth = 6;

/// Per-time-step input features, one column per step:
///   [I_t, Q_t, I_{t+1}, Q_{t+1}, |x_t|, |x_t|^3]
/// Stored column-major so phi.col(t) is the step-t feature vector.
template <typename T>
struct FeatureSequence {
  Mat<T> phi;  // kFeatureWidth x T
  double sample_rate_hz = 1.0;

  Index length() const { return phi.cols(); }
};

/// Contiguous train/val/test partition of an (input, output) signal pair.
struct DatasetSplit {
  IQSequence train_in, train_out;
  IQSequence val_in, val_out;
  IQSequence test_in, test_out;
};

}  // namespace dpd
