#pragma once

#include <cmath>

namespace dpd {

template <typename T>
inline T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
inline T sigmoid_grad_from_value(T s) {
  return s * (T(1) - s);
}

template <typename T>
inline T tanh_grad_from_value(T y) {
  return T(1) - y * y;
}

/// x * clip((x+3)/6, 0, 1)
template <typename T>
inline T hardswish(T x) {
  if (x <= T(-3)) return T(0);
  if (x >= T(3)) return x;
  return x * (x + T(3)) / T(6);
}

template <typename T>
inline T hardswish_grad(T x) {
  if (x <= T(-3)) return T(0);
  if (x >= T(3)) return T(1);
  return (T(2) * x + T(3)) / T(6);
}

}  // namespace dpd
