#pragma once

#include "dpd/model.hpp"

#include <string>
#include <vector>

namespace dpd {

/// Flat view of one named parameter tensor (column-major storage).
template <typename T>
struct TensorView {
  std::string name;
  T* data = nullptr;
  Index rows = 0, cols = 0;

  Index size() const { return rows * cols; }
};

template <typename T>
void append_views(const std::string& prefix, GruParams<T>& g,
                  std::vector<TensorView<T>>& out) {
  auto add = [&](const char* n, auto& m) {
    out.push_back({prefix + n, m.data(), m.rows(), m.cols()});
  };
  add("W_ir", g.W_ir);
  add("W_iz", g.W_iz);
  add("W_in", g.W_in);
  add("W_hr", g.W_hr);
  add("W_hz", g.W_hz);
  add("W_hn", g.W_hn);
  add("b_ir", g.b_ir);
  add("b_iz", g.b_iz);
  add("b_in", g.b_in);
  add("b_hn", g.b_hn);
}

template <typename T>
void append_views(const std::string& prefix, FcParams<T>& fc,
                  std::vector<TensorView<T>>& out) {
  out.push_back({prefix + "W", fc.W.data(), fc.W.rows(), fc.W.cols()});
  out.push_back({prefix + "b", fc.b.data(), fc.b.rows(), fc.b.cols()});
}

template <typename T>
void append_views(const std::string& prefix, TcnParams<T>& tcn,
                  std::vector<TensorView<T>>& out) {
  for (size_t a = 0; a < tcn.w1.size(); ++a)
    out.push_back({prefix + "w1." + std::to_string(a), tcn.w1[a].data(),
                   tcn.w1[a].rows(), tcn.w1[a].cols()});
  out.push_back({prefix + "b1", tcn.b1.data(), tcn.b1.rows(), tcn.b1.cols()});
  out.push_back({prefix + "w2", tcn.w2.data(), tcn.w2.rows(), tcn.w2.cols()});
  out.push_back({prefix + "b2", tcn.b2.data(), tcn.b2.rows(), tcn.b2.cols()});
}

template <typename T>
std::vector<TensorView<T>> tensor_views(TResDeltaGruModel<T>& m) {
  std::vector<TensorView<T>> out;
  append_views("gru.", m.gru, out);
  append_views("fc.", m.fc, out);
  append_views("tcn.", m.tcn, out);
  return out;
}

template <typename T>
std::vector<TensorView<T>> tensor_views(GruFcModel<T>& m) {
  std::vector<TensorView<T>> out;
  append_views("gru.", m.gru, out);
  append_views("fc.", m.fc, out);
  return out;
}

template <typename T>
std::vector<TensorView<const T>> tensor_views(const TResDeltaGruModel<T>& m) {
  std::vector<TensorView<T>> views = tensor_views(const_cast<TResDeltaGruModel<T>&>(m));
  std::vector<TensorView<const T>> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back({v.name, v.data, v.rows, v.cols});
  return out;
}

template <typename T>
std::vector<TensorView<const T>> tensor_views(const GruFcModel<T>& m) {
  std::vector<TensorView<T>> views = tensor_views(const_cast<GruFcModel<T>&>(m));
  std::vector<TensorView<const T>> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back({v.name, v.data, v.rows, v.cols});
  return out;
}

template <typename T>
GruParams<T> zeros_like(const GruParams<T>& g) {
  GruParams<T> z;
  z.W_ir = Mat<T>::Zero(g.W_ir.rows(), g.W_ir.cols());
  z.W_iz = Mat<T>::Zero(g.W_iz.rows(), g.W_iz.cols());
  z.W_in = Mat<T>::Zero(g.W_in.rows(), g.W_in.cols());
  z.W_hr = Mat<T>::Zero(g.W_hr.rows(), g.W_hr.cols());
  z.W_hz = Mat<T>::Zero(g.W_hz.rows(), g.W_hz.cols());
  z.W_hn = Mat<T>::Zero(g.W_hn.rows(), g.W_hn.cols());
  z.b_ir = Vec<T>::Zero(g.b_ir.size());
  z.b_iz = Vec<T>::Zero(g.b_iz.size());
  z.b_in = Vec<T>::Zero(g.b_in.size());
  z.b_hn = Vec<T>::Zero(g.b_hn.size());
  return z;
}

template <typename T>
FcParams<T> zeros_like(const FcParams<T>& fc) {
  FcParams<T> z;
  z.W = Mat<T>::Zero(fc.W.rows(), fc.W.cols());
  z.b = Vec<T>::Zero(fc.b.size());
  return z;
}

template <typename T>
TcnParams<T> zeros_like(const TcnParams<T>& t) {
  TcnParams<T> z = t;
  for (auto& w : z.w1) w.setZero();
  z.b1.setZero();
  z.w2.setZero();
  z.b2.setZero();
  return z;
}

template <typename T>
TResDeltaGruModel<T> zeros_like(const TResDeltaGruModel<T>& m) {
  TResDeltaGruModel<T> z;
  z.gru = zeros_like(m.gru);
  z.fc = zeros_like(m.fc);
  z.tcn = zeros_like(m.tcn);
  z.thresholds = m.thresholds;
  return z;
}

template <typename T>
GruFcModel<T> zeros_like(const GruFcModel<T>& m) {
  GruFcModel<T> z;
  z.gru = zeros_like(m.gru);
  z.fc = zeros_like(m.fc);
  return z;
}

/// Convert every tensor between scalar types (f32 <-> f64).
template <typename To, typename From>
GruParams<To> cast_params(const GruParams<From>& g) {
  GruParams<To> out;
  out.W_ir = g.W_ir.template cast<To>();
  out.W_iz = g.W_iz.template cast<To>();
  out.W_in = g.W_in.template cast<To>();
  out.W_hr = g.W_hr.template cast<To>();
  out.W_hz = g.W_hz.template cast<To>();
  out.W_hn = g.W_hn.template cast<To>();
  out.b_ir = g.b_ir.template cast<To>();
  out.b_iz = g.b_iz.template cast<To>();
  out.b_in = g.b_in.template cast<To>();
  out.b_hn = g.b_hn.template cast<To>();
  return out;
}

template <typename To, typename From>
TResDeltaGruModel<To> cast_model(const TResDeltaGruModel<From>& m) {
  TResDeltaGruModel<To> out;
  out.gru = cast_params<To>(m.gru);
  out.fc.W = m.fc.W.template cast<To>();
  out.fc.b = m.fc.b.template cast<To>();
  out.tcn.c_in = m.tcn.c_in;
  out.tcn.c_mid = m.tcn.c_mid;
  out.tcn.c_out = m.tcn.c_out;
  out.tcn.kernel1 = m.tcn.kernel1;
  out.tcn.dilation1 = m.tcn.dilation1;
  out.tcn.w1.clear();
  for (const auto& w : m.tcn.w1) out.tcn.w1.push_back(w.template cast<To>());
  out.tcn.b1 = m.tcn.b1.template cast<To>();
  out.tcn.w2 = m.tcn.w2.template cast<To>();
  out.tcn.b2 = m.tcn.b2.template cast<To>();
  out.thresholds = m.thresholds;
  return out;
}

template <typename To, typename From>
GruFcModel<To> cast_model(const GruFcModel<From>& m) {
  GruFcModel<To> out;
  out.gru = cast_params<To>(m.gru);
  out.fc.W = m.fc.W.template cast<To>();
  out.fc.b = m.fc.b.template cast<To>();
  return out;
}

}  // namespace dpd
