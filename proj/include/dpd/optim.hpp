#pragma once

#include "dpd/tensors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dpd {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// One decoupled-weight-decay update on a flat parameter span. m/v are the
/// running first/second moments, t the 1-based step count.
template <typename T>
void adamw_step(T* p, const T* g, double* m, double* v, Index n, long t,
                double lr, const AdamWConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
  for (Index i = 0; i < n; ++i) {
    const double gi = double(g[i]);
    if (!std::isfinite(gi)) throw DivergenceError("adamw_step: non-finite gradient");
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    const double upd = mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * double(p[i]);
    p[i] = static_cast<T>(double(p[i]) - lr * upd);
  }
}

/// AdamW over a named tensor list; moment buffers are allocated on first use
/// and keyed by position, so the same parameter layout must be passed every
/// step.
template <typename T>
class AdamW {
 public:
  explicit AdamW(const AdamWConfig& cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<TensorView<T>>& params,
            const std::vector<TensorView<T>>& grads, double lr) {
    if (params.size() != grads.size())
      throw std::invalid_argument("AdamW: params/grads mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    ++t_;
    for (size_t i = 0; i < params.size(); ++i) {
      if (params[i].size() != grads[i].size() ||
          params[i].size() != Index(m_[i].size()))
        throw std::invalid_argument("AdamW: tensor shape changed between steps");
      adamw_step(params[i].data, grads[i].data, m_[i].data(), v_[i].data(),
                 params[i].size(), t_, lr, cfg_);
    }
  }

  long steps_taken() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

  // flat serialization of the moment state
  std::vector<double> state() const {
    std::vector<double> out;
    out.push_back(double(t_));
    for (const auto& m : m_) out.insert(out.end(), m.begin(), m.end());
    for (const auto& v : v_) out.insert(out.end(), v.begin(), v.end());
    return out;
  }
  void restore(const std::vector<TensorView<T>>& params,
               const std::vector<double>& flat) {
    m_.clear();
    v_.clear();
    size_t pos = 0;
    t_ = static_cast<long>(flat.at(pos++));
    for (const auto& p : params) {
      m_.emplace_back(flat.begin() + pos, flat.begin() + pos + p.size());
      pos += size_t(p.size());
    }
    for (const auto& p : params) {
      v_.emplace_back(flat.begin() + pos, flat.begin() + pos + p.size());
      pos += size_t(p.size());
    }
    if (pos != flat.size()) throw std::invalid_argument("AdamW: bad state blob");
  }

 private:
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

struct PlateauConfig {
  double factor = 0.5;
  int patience = 10;
  double tolerance = 1e-4;
  double min_lr = 1e-5;
};

/// Learning-rate decay after `patience` epochs without the monitored metric
/// improving by more than `tolerance`.
class ReduceOnPlateau {
 public:
  ReduceOnPlateau(double initial_lr, const PlateauConfig& cfg = {})
      : cfg_(cfg), lr_(initial_lr) {}

  double observe(double metric) {
    if (!std::isfinite(metric)) throw DivergenceError("scheduler: non-finite metric");
    if (metric < best_ - cfg_.tolerance) {
      best_ = metric;
      bad_epochs_ = 0;
    } else {
      ++bad_epochs_;
      if (bad_epochs_ >= cfg_.patience) {
        lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
        bad_epochs_ = 0;
      }
    }
    return lr_;
  }

  double lr() const { return lr_; }

  std::vector<double> state() const {
    return {lr_, best_, double(bad_epochs_)};
  }
  void restore(const std::vector<double>& s) {
    lr_ = s.at(0);
    best_ = s.at(1);
    bad_epochs_ = static_cast<int>(s.at(2));
  }

 private:
  PlateauConfig cfg_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

}  // namespace dpd
