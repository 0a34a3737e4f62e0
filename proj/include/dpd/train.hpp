#pragma once

#include "dpd/autograd.hpp"
#include "dpd/checkpoint.hpp"
#include "dpd/metrics.hpp"
#include "dpd/optim.hpp"
#include "dpd/qat.hpp"
#include "dpd/signal.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>

namespace dpd {

struct TrainConfig {
  int epochs = 240;
  double lr = 5e-3;
  int batch_size = 64;
  Index frame_length = 100;
  Index frame_stride = 50;
  Index warmup = 20;  // steps at the head of each frame excluded from the loss
  AdamWConfig adamw;
  PlateauConfig plateau;
  double scale_lr_ratio = 0.05;  // quantizer scale lr = lr * ratio
  unsigned long long seed = 1;

  void validate() const {
    if (epochs < 0) throw std::invalid_argument("train: epochs >= 0");
    if (!(lr > 0)) throw std::invalid_argument("train: lr > 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size >= 1");
    if (frame_length < 2) throw std::invalid_argument("train: frame_length >= 2");
    if (frame_stride < 1) throw std::invalid_argument("train: frame_stride >= 1");
    if (warmup < 0 || warmup >= frame_length)
      throw std::invalid_argument("train: warmup must be < frame_length");
  }
};

struct CascadeConfig {
  cplx target_gain{1.0, 0.0};

  void validate() const {
    if (!(std::abs(target_gain) > 0))
      throw std::invalid_argument("cascade: |G| must be > 0");
  }
};

struct EpochLog {
  int epoch = 0;
  double train_mse = 0;
  double val_mse = 0;
  double val_acpr = 0;  // NaN when not applicable
  double lr = 0;
  double gamma = 0;
};
using TrainLog = std::vector<EpochLog>;

/// Equal-length overlapping frames; the tail that does not fill a whole
/// frame is dropped.
inline std::vector<Index> frame_starts(Index total_len, Index frame_len,
                                       Index stride) {
  if (frame_len > total_len)
    throw std::invalid_argument("frame_starts: frame longer than sequence");
  std::vector<Index> starts;
  for (Index s = 0; s + frame_len <= total_len; s += stride) starts.push_back(s);
  return starts;
}

/// Gathers per-step (rows x B) batch matrices from a (rows x T) sequence for
/// the given frame starts.
template <typename T>
BatchSeq<T> gather_frames(const Mat<T>& seq, const std::vector<Index>& starts,
                          Index frame_len) {
  BatchSeq<T> out(static_cast<size_t>(frame_len));
  const Index b = static_cast<Index>(starts.size());
  for (Index t = 0; t < frame_len; ++t) {
    Mat<T>& m = out[static_cast<size_t>(t)];
    m.resize(seq.rows(), b);
    for (Index j = 0; j < b; ++j) m.col(j) = seq.col(starts[size_t(j)] + t);
  }
  return out;
}

template <typename T>
Mat<T> complex_rows(const IQSequence& x, cplx gain = cplx(1, 0)) {
  Mat<T> out(2, x.size());
  for (Index t = 0; t < x.size(); ++t) {
    const cplx v = gain * x.samples[t];
    out(0, t) = static_cast<T>(v.real());
    out(1, t) = static_cast<T>(v.imag());
  }
  return out;
}

template <typename T>
IQSequence to_iq(const Mat<T>& rows, double fs) {
  VecXcd s(rows.cols());
  for (Index t = 0; t < rows.cols(); ++t)
    s[t] = cplx(double(rows(0, t)), double(rows(1, t)));
  return IQSequence(std::move(s), fs);
}

template <typename T>
std::vector<TensorView<T>> tensor_views_of_grads(GruFcGrads<T>& g) {
  std::vector<TensorView<T>> out;
  append_views("gru.", g.gru, out);
  append_views("fc.", g.fc, out);
  return out;
}

/// Whole-sequence forward through GRU+FC (dense or delta per thresholds),
/// returned as a 2 x T output matrix. Used for validation passes.
template <typename T>
Mat<T> seq_forward(const GruParams<T>& gru, const FcParams<T>& fc,
                   const DeltaThresholds& th, const Mat<T>& feats) {
  BatchSeq<T> phi(static_cast<size_t>(feats.cols()));
  for (Index t = 0; t < feats.cols(); ++t) phi[size_t(t)] = feats.col(t);
  RecurrentCache<T> cache;
  const BatchSeq<T> out = gru_fc_forward_cached(gru, fc, th, phi, cache);
  Mat<T> res(2, feats.cols());
  for (Index t = 0; t < feats.cols(); ++t) res.col(t) = out[size_t(t)].col(0);
  return res;
}

namespace detail {

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream ss(s);
  ss >> rng;
  return rng;
}

template <typename T>
std::vector<Index> shuffled(std::vector<Index> v, std::mt19937_64& rng) {
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage 1: behavioral PA model
// ---------------------------------------------------------------------------

template <typename T>
struct PaTrainResult {
  GruFcModel<T> model;  // best validation checkpoint
  TrainLog log;
};

/// Resumable PA-model training session: one call to run_epoch() per epoch;
/// save_state/load_state round-trip mid-run (same data and config required).
template <typename T>
class PaTrainerSession {
 public:
  PaTrainerSession(const IQSequence& train_x, const IQSequence& train_y,
                   const IQSequence& val_x, const IQSequence& val_y, Index hidden,
                   const TrainConfig& cfg)
      : cfg_(cfg),
        rng_(cfg.seed),
        opt_(cfg.adamw),
        sched_(cfg.lr, cfg.plateau),
        feats_train_(build_features<T>(train_x).phi),
        feats_val_(build_features<T>(val_x).phi),
        y_train_(complex_rows<T>(train_y)),
        y_val_(complex_rows<T>(val_y)),
        starts_(frame_starts(train_x.size(), cfg.frame_length, cfg.frame_stride)),
        val_starts_(frame_starts(val_x.size(), cfg.frame_length, cfg.frame_stride)) {
    cfg.validate();
    model_ = init_pa_model<T>(hidden, rng_);
    best_ = model_;
  }

  EpochLog run_epoch() {
    const DeltaThresholds dense{};
    const auto order = detail::shuffled<T>(starts_, rng_);
    double train_loss = 0;
    Index batches = 0;
    for (size_t base = 0; base < order.size(); base += size_t(cfg_.batch_size)) {
      const std::vector<Index> chunk(
          order.begin() + base,
          order.begin() + std::min(order.size(), base + size_t(cfg_.batch_size)));
      const BatchSeq<T> phi = gather_frames(feats_train_, chunk, cfg_.frame_length);
      const BatchSeq<T> tgt = gather_frames(y_train_, chunk, cfg_.frame_length);

      RecurrentCache<T> cache;
      const BatchSeq<T> out =
          gru_fc_forward_cached(model_.gru, model_.fc, dense, phi, cache);
      BatchSeq<T> dOut;
      const double loss = mse_loss(out, tgt, cfg_.warmup, &dOut);
      if (!std::isfinite(loss)) throw DivergenceError("train_pa_model: loss diverged");
      train_loss += loss;
      ++batches;

      GruFcGrads<T> grads = zero_grads(model_.gru, model_.fc);
      gru_fc_backward(model_.gru, model_.fc, cache, dOut, &grads, nullptr);
      opt_.step(tensor_views(model_), tensor_views_of_grads(grads), sched_.lr());
    }

    EpochLog row;
    row.epoch = ++epoch_;
    row.train_mse = train_loss / double(std::max<Index>(batches, 1));
    row.val_mse = val_mse();
    row.val_acpr = std::numeric_limits<double>::quiet_NaN();
    row.gamma = 0;
    row.lr = sched_.observe(row.val_mse);
    if (row.val_mse < best_metric_) {
      best_metric_ = row.val_mse;
      best_ = model_;
    }
    return row;
  }

  double val_mse() {
    const DeltaThresholds dense{};
    double total = 0;
    Index count = 0;
    for (size_t base = 0; base < val_starts_.size(); base += size_t(cfg_.batch_size)) {
      const std::vector<Index> chunk(
          val_starts_.begin() + base,
          val_starts_.begin() +
              std::min(val_starts_.size(), base + size_t(cfg_.batch_size)));
      RecurrentCache<T> cache;
      const BatchSeq<T> phi = gather_frames(feats_val_, chunk, cfg_.frame_length);
      const BatchSeq<T> out =
          gru_fc_forward_cached(model_.gru, model_.fc, dense, phi, cache);
      const BatchSeq<T> tgt = gather_frames(y_val_, chunk, cfg_.frame_length);
      total += mse_loss(out, tgt, cfg_.warmup, nullptr) * double(chunk.size());
      count += Index(chunk.size());
    }
    return total / double(count);
  }

  int epoch() const { return epoch_; }
  const GruFcModel<T>& current() const { return model_; }
  const GruFcModel<T>& best() const { return best_; }

  void save_state(TensorFile& tf) const {
    write_pa_model(tf, model_);
    auto& b = const_cast<GruFcModel<T>&>(best_);
    for (const auto& tv : tensor_views(b))
      detail::put_typed(tf, "best." + tv.name, tv.data, tv.rows, tv.cols);
    tf.put_vector("trainer.adam", opt_.state());
    tf.put_vector("trainer.sched", sched_.state());
    tf.put_bytes("trainer.rng", detail::rng_to_string(rng_));
    tf.put_scalar("trainer.epoch", double(epoch_));
    tf.put_scalar("trainer.best_metric", best_metric_);
  }

  void load_state(const TensorFile& tf) {
    model_ = read_pa_model<T>(tf);
    for (auto& tv : tensor_views(best_)) {
      const Mat<T> t = detail::get_typed<T>(tf, "best." + tv.name);
      std::copy(t.data(), t.data() + t.size(), tv.data);
    }
    opt_.restore(tensor_views(model_), tf.get_vector("trainer.adam"));
    sched_.restore(tf.get_vector("trainer.sched"));
    rng_ = detail::rng_from_string(tf.get_bytes("trainer.rng"));
    epoch_ = int(tf.get_scalar("trainer.epoch"));
    best_metric_ = tf.get_scalar("trainer.best_metric");
  }

 private:
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  AdamW<T> opt_;
  ReduceOnPlateau sched_;
  Mat<T> feats_train_, feats_val_, y_train_, y_val_;
  std::vector<Index> starts_, val_starts_;
  GruFcModel<T> model_, best_;
  double best_metric_ = std::numeric_limits<double>::infinity();
  int epoch_ = 0;
};

template <typename T>
PaTrainResult<T> train_pa_model(const IQSequence& train_x, const IQSequence& train_y,
                                const IQSequence& val_x, const IQSequence& val_y,
                                Index hidden, const TrainConfig& cfg,
                                const std::function<void(const EpochLog&)>& on_epoch = {}) {
  PaTrainerSession<T> session(train_x, train_y, val_x, val_y, hidden, cfg);
  PaTrainResult<T> result;
  for (int e = 0; e < cfg.epochs; ++e) {
    const EpochLog row = session.run_epoch();
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.model = cfg.epochs > 0 ? session.best() : session.current();
  return result;
}

// ---------------------------------------------------------------------------
// Stage 2: cascaded predistorter learning through the frozen PA model
// ---------------------------------------------------------------------------

template <typename T>
struct DpdTrainResult {
  TResDeltaGruModel<T> model;  // best validation-ACPR checkpoint
  TrainLog log;
};

/// Cascade forward/backward for one batch; returns the loss. Parameter
/// gradients accumulate into dpd_grads/tcn_grads; the PA model is read-only.
template <typename T>
double cascade_batch(const TResDeltaGruModel<T>& dpd, const GruFcModel<T>& pa,
                     const BatchSeq<T>& phi_x, const BatchSeq<T>& x_iq,
                     const BatchSeq<T>& target, Index warmup,
                     std::type_identity_t<GruFcGrads<T>*> dpd_grads,
                     std::type_identity_t<TcnParams<T>*> tcn_grads) {
  RecurrentCache<T> dpd_cache;
  const BatchSeq<T> uhat =
      gru_fc_forward_cached(dpd.gru, dpd.fc, dpd.thresholds, phi_x, dpd_cache);
  TcnCache<T> tcn_cache;
  const BatchSeq<T> res = tcn_forward_cached(dpd.tcn, x_iq, tcn_cache);
  BatchSeq<T> u(uhat.size());
  for (size_t t = 0; t < uhat.size(); ++t) u[t] = uhat[t] + res[t];

  const BatchSeq<T> phi_u = features_from_u(u);
  RecurrentCache<T> pa_cache;
  const DeltaThresholds dense{};
  const BatchSeq<T> y_hat =
      gru_fc_forward_cached(pa.gru, pa.fc, dense, phi_u, pa_cache);

  BatchSeq<T> dY;
  const double loss = mse_loss(y_hat, target, warmup, &dY);
  if (dpd_grads == nullptr && tcn_grads == nullptr) return loss;

  BatchSeq<T> dPhiU;
  gru_fc_backward(pa.gru, pa.fc, pa_cache, dY, nullptr, &dPhiU);
  BatchSeq<T> dU;
  features_from_u_backward(u, dPhiU, dU);
  gru_fc_backward(dpd.gru, dpd.fc, dpd_cache, dU, dpd_grads, nullptr);
  tcn_backward(dpd.tcn, x_iq, tcn_cache, dU, tcn_grads, nullptr);
  return loss;
}

/// Cascade output over a whole sequence (validation / evaluation path).
template <typename T>
IQSequence dpd_apply_seq(const TResDeltaGruModel<T>& dpd, const IQSequence& x) {
  const Mat<T> feats = build_features<T>(x).phi;
  BatchSeq<T> phi(size_t(x.size())), x_iq(size_t(x.size()));
  const Mat<T> xr = complex_rows<T>(x);
  for (Index t = 0; t < x.size(); ++t) {
    phi[size_t(t)] = feats.col(t);
    x_iq[size_t(t)] = xr.col(t);
  }
  RecurrentCache<T> c1;
  const BatchSeq<T> uhat =
      gru_fc_forward_cached(dpd.gru, dpd.fc, dpd.thresholds, phi, c1);
  TcnCache<T> c2;
  const BatchSeq<T> res = tcn_forward_cached(dpd.tcn, x_iq, c2);
  Mat<T> u(2, x.size());
  for (Index t = 0; t < x.size(); ++t)
    u.col(t) = uhat[size_t(t)].col(0) + res[size_t(t)].col(0);
  return to_iq(u, x.sample_rate_hz);
}

template <typename T>
IQSequence pa_model_apply_seq(const GruFcModel<T>& pa, const IQSequence& x) {
  const Mat<T> y =
      seq_forward(pa.gru, pa.fc, DeltaThresholds{}, build_features<T>(x).phi);
  return to_iq(y, x.sample_rate_hz);
}

/// Validation metric for model selection: average ACPR of the simulated
/// cascade output.
template <typename T>
double cascade_val_acpr(const TResDeltaGruModel<T>& dpd, const GruFcModel<T>& pa,
                        const IQSequence& val_x, double occupied_bw_hz) {
  const IQSequence u = dpd_apply_seq(dpd, val_x);
  const IQSequence y = pa_model_apply_seq(pa, u);
  const Index seg = welch_segment_for(val_x.sample_rate_hz, occupied_bw_hz, y.size());
  return acpr(psd_welch(y, seg), AcprConfig::for_bandwidth(occupied_bw_hz)).avg_dbc;
}

template <typename T>
class CascadeTrainerSession {
 public:
  CascadeTrainerSession(const GruFcModel<T>& pa_frozen, TResDeltaGruModel<T> dpd,
                        const CascadeConfig& cascade, const IQSequence& train_x,
                        const IQSequence& val_x, double occupied_bw_hz,
                        const TrainConfig& cfg)
      : cfg_(cfg),
        pa_(pa_frozen),
        model_(std::move(dpd)),
        rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL),
        opt_(cfg.adamw),
        sched_(cfg.lr, cfg.plateau),
        val_x_(val_x),
        occupied_bw_hz_(occupied_bw_hz),
        feats_train_(build_features<T>(train_x).phi),
        x_rows_(complex_rows<T>(train_x)),
        target_rows_(complex_rows<T>(train_x, cascade.target_gain)),
        starts_(frame_starts(train_x.size(), cfg.frame_length, cfg.frame_stride)) {
    cfg.validate();
    cascade.validate();
    pa_.validate();
    model_.validate();
    best_ = model_;
  }

  EpochLog run_epoch() {
    const auto order = detail::shuffled<T>(starts_, rng_);
    double train_loss = 0;
    Index batches = 0;
    for (size_t base = 0; base < order.size(); base += size_t(cfg_.batch_size)) {
      const std::vector<Index> chunk(
          order.begin() + base,
          order.begin() + std::min(order.size(), base + size_t(cfg_.batch_size)));
      const BatchSeq<T> phi = gather_frames(feats_train_, chunk, cfg_.frame_length);
      const BatchSeq<T> x_iq = gather_frames(x_rows_, chunk, cfg_.frame_length);
      const BatchSeq<T> tgt = gather_frames(target_rows_, chunk, cfg_.frame_length);

      GruFcGrads<T> grads = zero_grads(model_.gru, model_.fc);
      TcnParams<T> tgrads = zeros_like(model_.tcn);
      const double loss = cascade_batch(model_, pa_, phi, x_iq, tgt, cfg_.warmup,
                                        &grads, &tgrads);
      if (!std::isfinite(loss))
        throw DivergenceError("train_dpd_cascade: loss diverged");
      train_loss += loss;
      ++batches;

      std::vector<TensorView<T>> params = tensor_views(model_);
      std::vector<TensorView<T>> gviews = tensor_views_of_grads(grads);
      append_views("tcn.", tgrads, gviews);
      opt_.step(params, gviews, sched_.lr());
    }

    EpochLog row;
    row.epoch = ++epoch_;
    row.train_mse = train_loss / double(std::max<Index>(batches, 1));
    row.val_mse = std::numeric_limits<double>::quiet_NaN();
    row.val_acpr = cascade_val_acpr(model_, pa_, val_x_, occupied_bw_hz_);
    row.gamma = model_forward(model_, val_x_).sparsity.gamma();
    row.lr = sched_.observe(row.val_acpr);
    if (row.val_acpr < best_metric_) {
      best_metric_ = row.val_acpr;
      best_ = model_;
    }
    return row;
  }

  int epoch() const { return epoch_; }
  const TResDeltaGruModel<T>& current() const { return model_; }
  const TResDeltaGruModel<T>& best() const { return best_; }

  void save_state(TensorFile& tf) const {
    write_model(tf, model_);
    auto& b = const_cast<TResDeltaGruModel<T>&>(best_);
    for (const auto& tv : tensor_views(b))
      detail::put_typed(tf, "best." + tv.name, tv.data, tv.rows, tv.cols);
    tf.put_vector("trainer.adam", opt_.state());
    tf.put_vector("trainer.sched", sched_.state());
    tf.put_bytes("trainer.rng", detail::rng_to_string(rng_));
    tf.put_scalar("trainer.epoch", double(epoch_));
    tf.put_scalar("trainer.best_metric", best_metric_);
  }

  void load_state(const TensorFile& tf) {
    model_ = read_model<T>(tf);
    for (auto& tv : tensor_views(best_)) {
      const Mat<T> t = detail::get_typed<T>(tf, "best." + tv.name);
      std::copy(t.data(), t.data() + t.size(), tv.data);
    }
    opt_.restore(tensor_views(model_), tf.get_vector("trainer.adam"));
    sched_.restore(tf.get_vector("trainer.sched"));
    rng_ = detail::rng_from_string(tf.get_bytes("trainer.rng"));
    epoch_ = int(tf.get_scalar("trainer.epoch"));
    best_metric_ = tf.get_scalar("trainer.best_metric");
  }

 private:
  TrainConfig cfg_;
  GruFcModel<T> pa_;
  TResDeltaGruModel<T> model_, best_;
  std::mt19937_64 rng_;
  AdamW<T> opt_;
  ReduceOnPlateau sched_;
  IQSequence val_x_;
  double occupied_bw_hz_;
  Mat<T> feats_train_, x_rows_, target_rows_;
  std::vector<Index> starts_;
  double best_metric_ = std::numeric_limits<double>::infinity();
  int epoch_ = 0;
};

template <typename T>
DpdTrainResult<T> train_dpd_cascade(
    const GruFcModel<T>& pa_frozen, TResDeltaGruModel<T> dpd,
    const CascadeConfig& cascade, const IQSequence& train_x, const IQSequence& val_x,
    double occupied_bw_hz, const TrainConfig& cfg,
    const std::function<void(const EpochLog&)>& on_epoch = {}) {
  CascadeTrainerSession<T> session(pa_frozen, std::move(dpd), cascade, train_x,
                                   val_x, occupied_bw_hz, cfg);
  DpdTrainResult<T> result;
  for (int e = 0; e < cfg.epochs; ++e) {
    const EpochLog row = session.run_epoch();
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.model = cfg.epochs > 0 ? session.best() : session.current();
  return result;
}

// ---------------------------------------------------------------------------
// Stage 3: quantization-aware fine-tuning
// ---------------------------------------------------------------------------

struct QatTrainResult {
  QuantizedModel qmodel;
  TrainLog log;
};

template <typename T>
QatTrainResult train_qat(const GruFcModel<T>& pa_frozen, TResDeltaGruModel<T> dpd,
                         const QuantModelConfig& qcfg, const CascadeConfig& cascade,
                         const IQSequence& train_x, const IQSequence& val_x,
                         double occupied_bw_hz, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  qcfg.validate();
  cascade.validate();

  // calibration on the head of the training split
  const Index calib_len = std::min<Index>(train_x.size(), 16384);
  const IQSequence calib(train_x.samples.head(calib_len), train_x.sample_rate_hz);
  ScaleTable table = calibrate_scales(cast_model<double>(dpd), calib, qcfg);
  QatPoints pts = QatPoints::from_table(table, qcfg);

  const Mat<T> feats_train = build_features<T>(train_x).phi;
  const Mat<T> x_rows = complex_rows<T>(train_x);
  const Mat<T> target_rows = complex_rows<T>(train_x, cascade.target_gain);
  const auto starts = frame_starts(train_x.size(), cfg.frame_length, cfg.frame_stride);

  std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
  AdamW<T> opt(cfg.adamw);
  ReduceOnPlateau sched(cfg.lr, cfg.plateau);

  QatTrainResult result;
  auto freeze = [&]() {
    QatPoints snapped = pts;
    snapped.snap_all();
    return quantize_model(cast_model<double>(dpd), snapped.to_table(), qcfg);
  };

  auto log_quantized = [&](const QuantizedModel& qm, int epoch, double train_mse,
                           double lr) {
    const QuantForwardResult fq = fakequant_forward(qm, val_x);
    const IQSequence y = pa_model_apply_seq(pa_frozen, fq.u);
    const Index seg =
        welch_segment_for(val_x.sample_rate_hz, occupied_bw_hz, y.size());
    EpochLog row;
    row.epoch = epoch;
    row.train_mse = train_mse;
    row.val_mse = std::numeric_limits<double>::quiet_NaN();
    row.val_acpr =
        acpr(psd_welch(y, seg), AcprConfig::for_bandwidth(occupied_bw_hz)).avg_dbc;
    row.lr = lr;
    row.gamma = fq.sparsity.gamma();
    return row;
  };

  result.qmodel = freeze();
  double best_acpr = std::numeric_limits<double>::infinity();

  if (cfg.epochs == 0) {
    // pure post-training quantization: calibration only
    const EpochLog row = log_quantized(result.qmodel, 0,
                                       std::numeric_limits<double>::quiet_NaN(), 0);
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
    return result;
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<Index> order = starts;
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0;
    Index batches = 0;
    for (size_t base = 0; base < order.size(); base += size_t(cfg.batch_size)) {
      const std::vector<Index> chunk(
          order.begin() + base,
          order.begin() + std::min(order.size(), base + size_t(cfg.batch_size)));
      const BatchSeq<T> phi = gather_frames(feats_train, chunk, cfg.frame_length);
      const BatchSeq<T> x_iq = gather_frames(x_rows, chunk, cfg.frame_length);
      const BatchSeq<T> tgt = gather_frames(target_rows, chunk, cfg.frame_length);

      QatCache<T> qcache;
      const BatchSeq<T> u = qat_forward_cached(dpd, pts, phi, x_iq, qcache);
      const BatchSeq<T> phi_u = features_from_u(u);
      RecurrentCache<T> pa_cache;
      const BatchSeq<T> y_hat = gru_fc_forward_cached(
          pa_frozen.gru, pa_frozen.fc, DeltaThresholds{}, phi_u, pa_cache);
      BatchSeq<T> dY;
      const double loss = mse_loss(y_hat, tgt, cfg.warmup, &dY);
      if (!std::isfinite(loss)) throw DivergenceError("train_qat: loss diverged");
      train_loss += loss;
      ++batches;

      BatchSeq<T> dPhiU;
      gru_fc_backward(pa_frozen.gru, pa_frozen.fc, pa_cache, dY, nullptr, &dPhiU);
      BatchSeq<T> dU;
      features_from_u_backward(u, dPhiU, dU);

      GruFcGrads<T> grads = zero_grads(dpd.gru, dpd.fc);
      TcnParams<T> tgrads = zeros_like(dpd.tcn);
      ScaleGrads sgrads;
      qat_backward(dpd, pts, qcache, dU, &grads, &tgrads, &sgrads);

      std::vector<TensorView<T>> params = tensor_views(dpd);
      std::vector<TensorView<T>> gviews = tensor_views_of_grads(grads);
      append_views("tcn.", tgrads, gviews);
      opt.step(params, gviews, sched.lr());

      // plain gradient descent on the quantizer scales
      const double slr = sched.lr() * cfg.scale_lr_ratio;
      ScaleTable current = pts.to_table();
      for (auto& [name, scale] : current) {
        auto it = sgrads.g.find(name);
        if (it == sgrads.g.end()) continue;
        scale = std::max(scale - slr * it->second, 1e-12);
      }
      pts = QatPoints::from_table(current, qcfg);
    }

    pts.snap_all();  // power-of-two projection at each epoch boundary

    const QuantizedModel snapshot = freeze();
    EpochLog row = log_quantized(snapshot, epoch,
                                 train_loss / double(std::max<Index>(batches, 1)),
                                 sched.lr());
    row.lr = sched.observe(row.val_acpr);
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
    if (row.val_acpr < best_acpr) {
      best_acpr = row.val_acpr;
      result.qmodel = snapshot;
    }
  }
  return result;
}

}  // namespace dpd
