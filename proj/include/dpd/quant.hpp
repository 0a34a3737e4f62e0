#pragma once

#include "dpd/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dpd {

/// Signed fixed-point format: values are s * q with integer
/// q in [-2^(n-1), 2^(n-1) - 1] and s a power of two.
struct QuantSpec {
  enum class Target { weights, activations };

  int n_bits = 16;
  double scale = 1.0;
  Target target = Target::activations;

  double qmin() const { return -std::ldexp(1.0, n_bits - 1); }
  double qmax() const { return std::ldexp(1.0, n_bits - 1) - 1.0; }
  int scale_exp() const;  // log2(scale); throws if scale is not a power of two

  void validate() const;
};

/// Round half away from zero (the convention used by both the fake-quant
/// and integer paths).
inline double round_half_away(double v) { return std::round(v); }

/// s * Round(Clip(x/s, Qmin, Qmax))
double fake_quant(double x, const QuantSpec& spec);

template <typename Derived>
Mat<double> fake_quant(const Eigen::MatrixBase<Derived>& x, const QuantSpec& spec) {
  Mat<double> out = x.template cast<double>();
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = fake_quant(out(i, j), spec);
  return out;
}

/// Straight-through gradient: passes where x/s lies in [Qmin, Qmax]
/// (closed interval), zero outside.
double ste_backward(double upstream_grad, double x, const QuantSpec& spec);

/// 2^round(log2 s), ties rounding up.
double snap_scale_pow2(double s);

struct QuantModelConfig {
  int weight_bits = 16;
  int activation_bits = 16;

  void validate() const {
    for (int b : {weight_bits, activation_bits})
      if (b != 8 && b != 12 && b != 16)
        throw std::invalid_argument("quant: bits must be 8, 12 or 16");
  }
  std::string name() const {
    return "W" + std::to_string(weight_bits) + "A" + std::to_string(activation_bits);
  }
};

/// Per-tensor scale table keyed by quantization-point name. Weight points
/// use the tensor names ("gru.W_ir", ...); activation points use "act." keys.
using ScaleTable = std::map<std::string, double>;

namespace qp {
// activation quantization points of the predistorter
inline constexpr const char* kPhi = "act.phi";
inline constexpr const char* kMr = "act.M_r";
inline constexpr const char* kMz = "act.M_z";
inline constexpr const char* kMnphi = "act.M_nphi";
inline constexpr const char* kMnh = "act.M_nh";
inline constexpr const char* kR = "act.r";
inline constexpr const char* kZ = "act.z";
inline constexpr const char* kN = "act.n";
inline constexpr const char* kH = "act.h";
inline constexpr const char* kUhat = "act.u_hat";
inline constexpr const char* kTcnX = "act.tcn_x";
inline constexpr const char* kTcnPre1 = "act.tcn_pre1";
inline constexpr const char* kTcnAct1 = "act.tcn_act1";
inline constexpr const char* kTcnPre2 = "act.tcn_pre2";
inline constexpr const char* kTcnAct2 = "act.tcn_act2";
inline constexpr const char* kU = "act.u";

std::vector<std::string> all_activation_points();
}  // namespace qp

struct QuantizedTensor {
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> q;
  int n_bits = 16;
  int scale_exp = 0;  // value = q * 2^scale_exp

  double scale() const { return std::ldexp(1.0, scale_exp); }
  Mat<double> dequantize() const {
    return q.cast<double>() * scale();
  }
};

/// Fixed-point predistorter checkpoint: integer weight tensors plus the
/// activation formats and delta thresholds needed to run inference.
struct QuantizedModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  Index hidden = 0;
  int tcn_kernel1 = 3, tcn_dilation1 = 16;
  int tcn_c_in = 2, tcn_c_mid = 3, tcn_c_out = 2;
  QuantModelConfig cfg;
  DeltaThresholds thresholds;
  std::map<std::string, QuantizedTensor> weights;  // weights and biases
  std::map<std::string, QuantSpec> acts;           // activation points

  const QuantizedTensor& weight(const std::string& name) const;
  const QuantSpec& act(const std::string& name) const;
};

/// Max-abs calibration on the full-precision model: weight scales from the
/// tensors themselves, activation scales from a forward trace over the
/// calibration signal. All scales are snapped to powers of two;
/// all-zero tensors fall back to scale 1.
ScaleTable calibrate_scales(const TResDeltaGruModel<double>& model,
                            const IQSequence& calibration,
                            const QuantModelConfig& cfg);

/// Freeze a full-precision model into integer tensors under the given
/// (power-of-two) scale table.
QuantizedModel quantize_model(const TResDeltaGruModel<double>& model,
                              const ScaleTable& scales,
                              const QuantModelConfig& cfg);

TResDeltaGruModel<double> dequantize_model(const QuantizedModel& qm);

/// Values observed at every quantization point during a forward run, for
/// cross-path equality checks. Entries are the quantized values (exact
/// multiples of the point's scale), concatenated over time.
using QuantTrace = std::map<std::string, std::vector<double>>;

struct QuantForwardResult {
  IQSequence u;
  SparsityReport sparsity;
  QuantTrace trace;                          // filled when requested
  std::map<std::string, double> max_abs_acc;  // integer path: accumulator audit
};

/// Reference fixed-point forward: double arithmetic with fake_quant applied
/// at every quantization point (the semantics quantization-aware training
/// sees).
QuantForwardResult fakequant_forward(const QuantizedModel& qm, const IQSequence& x,
                                     bool keep_trace = false);

/// Deployment-faithful forward: integer tensors, integer multiply-
/// accumulate, shift-based rescaling; sigmoid/tanh/Hardswish evaluated in
/// real arithmetic on dequantized values and re-quantized. Bit-exact to
/// fakequant_forward at every quantization point. Throws if a dot-product
/// accumulator exceeds accumulator_bits (32 covers activations up to
/// 12 bits; 16-bit activations use the wider default).
QuantForwardResult integer_forward(const QuantizedModel& qm, const IQSequence& x,
                                   bool keep_trace = false,
                                   int accumulator_bits = 0);

/// Default accumulator width for a given activation precision.
int default_accumulator_bits(int activation_bits);

}  // namespace dpd
