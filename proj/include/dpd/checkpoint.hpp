#pragma once

#include "dpd/quant.hpp"
#include "dpd/tensors.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dpd {

enum class Dtype : std::uint32_t { f32 = 1, f64 = 2, i32 = 3, u8 = 4 };

struct TensorBlob {
  Dtype dtype = Dtype::f64;
  Index rows = 0, cols = 0;
  std::vector<unsigned char> raw;
};

/// Named-tensor container with a flat binary file format. Round-trips are
/// bit-exact; writes go through a temp file and a rename.
class TensorFile {
 public:
  static constexpr std::uint32_t kVersion = 1;

  bool has(const std::string& name) const { return blobs_.count(name) > 0; }
  std::vector<std::string> keys() const;

  void put_f64(const std::string& name, const double* data, Index rows, Index cols);
  void put_f32(const std::string& name, const float* data, Index rows, Index cols);
  void put_i32(const std::string& name, const std::int32_t* data, Index rows,
               Index cols);
  void put_bytes(const std::string& name, const std::string& bytes);
  void put_scalar(const std::string& name, double v) { put_f64(name, &v, 1, 1); }
  void put_vector(const std::string& name, const std::vector<double>& v) {
    put_f64(name, v.data(), Index(v.size()), 1);
  }

  const TensorBlob& get(const std::string& name) const;
  Mat<double> get_f64(const std::string& name) const;
  Mat<float> get_f32(const std::string& name) const;
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> get_i32(
      const std::string& name) const;
  std::string get_bytes(const std::string& name) const;
  double get_scalar(const std::string& name) const;
  std::vector<double> get_vector(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static TensorFile load(const std::filesystem::path& path);

 private:
  std::map<std::string, TensorBlob> blobs_;
};

namespace detail {

template <typename T>
void put_typed(TensorFile& tf, const std::string& name, const T* data, Index rows,
               Index cols) {
  if constexpr (std::is_same_v<T, double>)
    tf.put_f64(name, data, rows, cols);
  else
    tf.put_f32(name, data, rows, cols);
}

template <typename T>
Mat<T> get_typed(const TensorFile& tf, const std::string& name) {
  const TensorBlob& b = tf.get(name);
  if (b.dtype == Dtype::f64) return tf.get_f64(name).cast<T>();
  if (b.dtype == Dtype::f32) return tf.get_f32(name).cast<T>();
  throw std::runtime_error("checkpoint: tensor " + name + " is not floating point");
}

}  // namespace detail

inline constexpr const char* kKindDpd = "tres_delta_gru";
inline constexpr const char* kKindPa = "gru_fc";
inline constexpr const char* kKindQuant = "tres_delta_gru_quant";

template <typename T>
void write_model(TensorFile& tf, const TResDeltaGruModel<T>& model) {
  auto& m = const_cast<TResDeltaGruModel<T>&>(model);
  for (const auto& tv : tensor_views(m))
    detail::put_typed(tf, tv.name, tv.data, tv.rows, tv.cols);
  tf.put_bytes("meta.kind", kKindDpd);
  tf.put_scalar("meta.format", 1.0);
  tf.put_scalar("meta.hidden", double(model.gru.hidden_size()));
  tf.put_scalar("meta.theta_phi", model.thresholds.theta_phi);
  tf.put_scalar("meta.theta_h", model.thresholds.theta_h);
  const std::vector<double> dims = {
      double(model.tcn.c_in), double(model.tcn.c_mid), double(model.tcn.c_out),
      double(model.tcn.kernel1), double(model.tcn.dilation1)};
  tf.put_vector("meta.tcn", dims);
}

template <typename T>
TResDeltaGruModel<T> read_model(const TensorFile& tf) {
  if (tf.get_bytes("meta.kind") != kKindDpd)
    throw std::runtime_error("checkpoint: not a predistorter model file");
  const Index hidden = Index(tf.get_scalar("meta.hidden"));
  const std::vector<double> dims = tf.get_vector("meta.tcn");
  DeltaThresholds th{tf.get_scalar("meta.theta_phi"), tf.get_scalar("meta.theta_h")};
  std::mt19937_64 rng(0);
  TResDeltaGruModel<T> m = init_model<T>(hidden, th, rng);
  m.tcn = init_tcn<T>(rng, int(dims.at(0)), int(dims.at(1)), int(dims.at(2)),
                      int(dims.at(3)), int(dims.at(4)));
  for (auto& tv : tensor_views(m)) {
    const Mat<T> t = detail::get_typed<T>(tf, tv.name);
    if (t.rows() != tv.rows || t.cols() != tv.cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + tv.name);
    std::copy(t.data(), t.data() + t.size(), tv.data);
  }
  return m;
}

template <typename T>
void write_pa_model(TensorFile& tf, const GruFcModel<T>& model) {
  auto& m = const_cast<GruFcModel<T>&>(model);
  for (const auto& tv : tensor_views(m))
    detail::put_typed(tf, tv.name, tv.data, tv.rows, tv.cols);
  tf.put_bytes("meta.kind", kKindPa);
  tf.put_scalar("meta.format", 1.0);
  tf.put_scalar("meta.hidden", double(model.gru.hidden_size()));
  tf.put_scalar("meta.input", double(model.gru.input_size()));
}

template <typename T>
GruFcModel<T> read_pa_model(const TensorFile& tf) {
  if (tf.get_bytes("meta.kind") != kKindPa)
    throw std::runtime_error("checkpoint: not a PA model file");
  const Index hidden = Index(tf.get_scalar("meta.hidden"));
  std::mt19937_64 rng(0);
  GruFcModel<T> m = init_pa_model<T>(hidden, rng);
  for (auto& tv : tensor_views(m)) {
    const Mat<T> t = detail::get_typed<T>(tf, tv.name);
    if (t.rows() != tv.rows || t.cols() != tv.cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + tv.name);
    std::copy(t.data(), t.data() + t.size(), tv.data);
  }
  return m;
}

void write_quantized_model(TensorFile& tf, const QuantizedModel& qm);
QuantizedModel read_quantized_model(const TensorFile& tf);

template <typename T>
void save_model(const std::filesystem::path& path, const TResDeltaGruModel<T>& m) {
  TensorFile tf;
  write_model(tf, m);
  tf.save(path);
}

template <typename T>
TResDeltaGruModel<T> load_model(const std::filesystem::path& path) {
  return read_model<T>(TensorFile::load(path));
}

template <typename T>
void save_pa_model(const std::filesystem::path& path, const GruFcModel<T>& m) {
  TensorFile tf;
  write_pa_model(tf, m);
  tf.save(path);
}

template <typename T>
GruFcModel<T> load_pa_model(const std::filesystem::path& path) {
  return read_pa_model<T>(TensorFile::load(path));
}

void save_quantized_model(const std::filesystem::path& path, const QuantizedModel& qm);
QuantizedModel load_quantized_model(const std::filesystem::path& path);

}  // namespace dpd
