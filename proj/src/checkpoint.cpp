#include "dpd/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dpd {

namespace {

constexpr char kMagic[8] = {'D', 'P', 'D', 'T', 'N', 'S', 'R', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f32: return 4;
    case Dtype::f64: return 8;
    case Dtype::i32: return 4;
    case Dtype::u8: return 1;
  }
  throw std::runtime_error("checkpoint: bad dtype");
}

}  // namespace

std::vector<std::string> TensorFile::keys() const {
  std::vector<std::string> out;
  out.reserve(blobs_.size());
  for (const auto& [k, v] : blobs_) out.push_back(k);
  return out;
}

void TensorFile::put_f64(const std::string& name, const double* data, Index rows,
                         Index cols) {
  TensorBlob b;
  b.dtype = Dtype::f64;
  b.rows = rows;
  b.cols = cols;
  b.raw.resize(size_t(rows) * size_t(cols) * 8);
  std::memcpy(b.raw.data(), data, b.raw.size());
  blobs_[name] = std::move(b);
}

void TensorFile::put_f32(const std::string& name, const float* data, Index rows,
                         Index cols) {
  TensorBlob b;
  b.dtype = Dtype::f32;
  b.rows = rows;
  b.cols = cols;
  b.raw.resize(size_t(rows) * size_t(cols) * 4);
  std::memcpy(b.raw.data(), data, b.raw.size());
  blobs_[name] = std::move(b);
}

void TensorFile::put_i32(const std::string& name, const std::int32_t* data,
                         Index rows, Index cols) {
  TensorBlob b;
  b.dtype = Dtype::i32;
  b.rows = rows;
  b.cols = cols;
  b.raw.resize(size_t(rows) * size_t(cols) * 4);
  std::memcpy(b.raw.data(), data, b.raw.size());
  blobs_[name] = std::move(b);
}

void TensorFile::put_bytes(const std::string& name, const std::string& bytes) {
  TensorBlob b;
  b.dtype = Dtype::u8;
  b.rows = Index(bytes.size());
  b.cols = 1;
  b.raw.assign(bytes.begin(), bytes.end());
  blobs_[name] = std::move(b);
}

const TensorBlob& TensorFile::get(const std::string& name) const {
  auto it = blobs_.find(name);
  if (it == blobs_.end())
    throw std::runtime_error("checkpoint: missing tensor " + name);
  return it->second;
}

Mat<double> TensorFile::get_f64(const std::string& name) const {
  const TensorBlob& b = get(name);
  if (b.dtype != Dtype::f64)
    throw std::runtime_error("checkpoint: " + name + " is not f64");
  Mat<double> m(b.rows, b.cols);
  std::memcpy(m.data(), b.raw.data(), b.raw.size());
  return m;
}

Mat<float> TensorFile::get_f32(const std::string& name) const {
  const TensorBlob& b = get(name);
  if (b.dtype != Dtype::f32)
    throw std::runtime_error("checkpoint: " + name + " is not f32");
  Mat<float> m(b.rows, b.cols);
  std::memcpy(m.data(), b.raw.data(), b.raw.size());
  return m;
}

Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> TensorFile::get_i32(
    const std::string& name) const {
  const TensorBlob& b = get(name);
  if (b.dtype != Dtype::i32)
    throw std::runtime_error("checkpoint: " + name + " is not i32");
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> m(b.rows, b.cols);
  std::memcpy(m.data(), b.raw.data(), b.raw.size());
  return m;
}

std::string TensorFile::get_bytes(const std::string& name) const {
  const TensorBlob& b = get(name);
  if (b.dtype != Dtype::u8)
    throw std::runtime_error("checkpoint: " + name + " is not bytes");
  return std::string(b.raw.begin(), b.raw.end());
}

double TensorFile::get_scalar(const std::string& name) const {
  const Mat<double> m = get_f64(name);
  if (m.size() != 1) throw std::runtime_error("checkpoint: " + name + " not scalar");
  return m(0, 0);
}

std::vector<double> TensorFile::get_vector(const std::string& name) const {
  const Mat<double> m = get_f64(name);
  return std::vector<double>(m.data(), m.data() + m.size());
}

void TensorFile::save(const std::filesystem::path& path) const {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint64_t>(out, blobs_.size());
    for (const auto& [name, b] : blobs_) {
      write_pod<std::uint32_t>(out, std::uint32_t(name.size()));
      out.write(name.data(), std::streamsize(name.size()));
      write_pod<std::uint32_t>(out, std::uint32_t(b.dtype));
      write_pod<std::uint64_t>(out, std::uint64_t(b.rows));
      write_pod<std::uint64_t>(out, std::uint64_t(b.cols));
      write_pod<std::uint64_t>(out, std::uint64_t(b.raw.size()));
      out.write(reinterpret_cast<const char*>(b.raw.data()),
                std::streamsize(b.raw.size()));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorFile TensorFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  const auto count = read_pod<std::uint64_t>(in);
  TensorFile tf;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    TensorBlob b;
    b.dtype = static_cast<Dtype>(read_pod<std::uint32_t>(in));
    b.rows = Index(read_pod<std::uint64_t>(in));
    b.cols = Index(read_pod<std::uint64_t>(in));
    const auto nbytes = read_pod<std::uint64_t>(in);
    if (nbytes != std::uint64_t(b.rows) * std::uint64_t(b.cols) * dtype_size(b.dtype))
      throw std::runtime_error("checkpoint: inconsistent size for " + name);
    b.raw.resize(nbytes);
    in.read(reinterpret_cast<char*>(b.raw.data()), std::streamsize(nbytes));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
    tf.blobs_[name] = std::move(b);
  }
  return tf;
}

void write_quantized_model(TensorFile& tf, const QuantizedModel& qm) {
  tf.put_bytes("meta.kind", kKindQuant);
  tf.put_scalar("meta.format", double(QuantizedModel::kFormatVersion));
  tf.put_scalar("meta.hidden", double(qm.hidden));
  tf.put_scalar("meta.weight_bits", double(qm.cfg.weight_bits));
  tf.put_scalar("meta.activation_bits", double(qm.cfg.activation_bits));
  tf.put_scalar("meta.theta_phi", qm.thresholds.theta_phi);
  tf.put_scalar("meta.theta_h", qm.thresholds.theta_h);
  tf.put_vector("meta.tcn",
                {double(qm.tcn_c_in), double(qm.tcn_c_mid), double(qm.tcn_c_out),
                 double(qm.tcn_kernel1), double(qm.tcn_dilation1)});
  for (const auto& [name, t] : qm.weights) {
    tf.put_i32("q." + name, t.q.data(), t.q.rows(), t.q.cols());
    const std::int32_t meta[2] = {t.n_bits, t.scale_exp};
    tf.put_i32("qmeta." + name, meta, 2, 1);
  }
  for (const auto& [name, spec] : qm.acts) {
    const std::int32_t meta[2] = {spec.n_bits, spec.scale_exp()};
    tf.put_i32("aspec." + name, meta, 2, 1);
  }
}

QuantizedModel read_quantized_model(const TensorFile& tf) {
  if (tf.get_bytes("meta.kind") != kKindQuant)
    throw std::runtime_error("checkpoint: not a quantized model file");
  QuantizedModel qm;
  qm.hidden = Index(tf.get_scalar("meta.hidden"));
  qm.cfg.weight_bits = int(tf.get_scalar("meta.weight_bits"));
  qm.cfg.activation_bits = int(tf.get_scalar("meta.activation_bits"));
  qm.thresholds.theta_phi = tf.get_scalar("meta.theta_phi");
  qm.thresholds.theta_h = tf.get_scalar("meta.theta_h");
  const std::vector<double> dims = tf.get_vector("meta.tcn");
  qm.tcn_c_in = int(dims.at(0));
  qm.tcn_c_mid = int(dims.at(1));
  qm.tcn_c_out = int(dims.at(2));
  qm.tcn_kernel1 = int(dims.at(3));
  qm.tcn_dilation1 = int(dims.at(4));
  for (const auto& key : tf.keys()) {
    if (key.rfind("q.", 0) == 0) {
      const std::string name = key.substr(2);
      QuantizedTensor t;
      t.q = tf.get_i32(key);
      const auto meta = tf.get_i32("qmeta." + name);
      t.n_bits = meta(0, 0);
      t.scale_exp = meta(1, 0);
      qm.weights[name] = std::move(t);
    } else if (key.rfind("aspec.", 0) == 0) {
      const std::string name = key.substr(6);
      const auto meta = tf.get_i32(key);
      QuantSpec spec;
      spec.n_bits = meta(0, 0);
      spec.scale = std::ldexp(1.0, meta(1, 0));
      spec.target = QuantSpec::Target::activations;
      qm.acts[name] = spec;
    }
  }
  return qm;
}

void save_quantized_model(const std::filesystem::path& path, const QuantizedModel& qm) {
  TensorFile tf;
  write_quantized_model(tf, qm);
  tf.save(path);
}

QuantizedModel load_quantized_model(const std::filesystem::path& path) {
  return read_quantized_model(TensorFile::load(path));
}

}  // namespace dpd
