#include "dpd/pipeline.hpp"

#include "dpd/quant.hpp"

#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include <fstream>
#include <iostream>

namespace dpd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p))
    throw MissingPrerequisite("missing " + p.string() + " (run '" + producer +
                              "' first)");
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << header << "\n";
  char buf[64];
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.12g", row[i]);
      out << buf << (i + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
}

IQSequence denormalize(const IQSequence& u, double scale) {
  return IQSequence(u.samples * scale, u.sample_rate_hz);
}

struct EvalMetrics {
  AcprResult acpr;
  double evm = 0, nmse = 0;
};

EvalMetrics signal_metrics(const IQSequence& ref, const IQSequence& sig,
                           double occupied_bw_hz, Index segment_len) {
  const Index seg = segment_len > 0
                        ? segment_len
                        : welch_segment_for(sig.sample_rate_hz, occupied_bw_hz,
                                            sig.size());
  EvalMetrics m;
  m.acpr = acpr(psd_welch(sig, seg), AcprConfig::for_bandwidth(occupied_bw_hz));
  m.evm = evm_db(ref, sig);
  m.nmse = nmse_db(ref, sig);
  return m;
}

json metrics_to_json(const EvalMetrics& m) {
  return json{{"acpr_lower_dbc", m.acpr.lower_dbc},
              {"acpr_upper_dbc", m.acpr.upper_dbc},
              {"acpr_avg_dbc", m.acpr.avg_dbc},
              {"evm_db", m.evm},
              {"nmse_db", m.nmse}};
}

void write_psd_csv(const fs::path& path, const IQSequence& sig,
                   double occupied_bw_hz) {
  const Index seg =
      welch_segment_for(sig.sample_rate_hz, occupied_bw_hz, sig.size());
  const Spectrum sp = psd_welch(sig, seg);
  std::vector<std::vector<double>> rows;
  rows.reserve(size_t(sp.freq_hz.size()));
  for (Index i = 0; i < sp.freq_hz.size(); ++i)
    rows.push_back({sp.freq_hz[i], sp.psd_db[i]});
  write_csv(path, "freq_hz,psd_db", rows);
}

void write_am_csv(const fs::path& path, const IQSequence& x, const IQSequence& y) {
  const AmCurves c = extract_am_curves(x, y, 64);
  std::vector<std::vector<double>> rows;
  for (Index b = 0; b < c.bin_centers.size(); ++b)
    if (c.occupied[size_t(b)])
      rows.push_back({c.bin_centers[b], c.gain[b], c.phase_rad[b]});
  write_csv(path, "input_mag,gain,phase_rad", rows);
}

/// Demodulate symbol-aligned OFDM blocks back to occupied-bin symbols.
std::vector<cplx> demod_ofdm(const IQSequence& sig, const OfdmConfig& ofdm,
                             Index abs_offset, Index max_points) {
  const Index nfft = ofdm.fft_size();
  const Index skip = (nfft - abs_offset % nfft) % nfft;
  const int n_occ = ofdm.occupied_bins();
  std::vector<int> bins;
  const int half = n_occ / 2;
  for (int k = -half; k <= n_occ - half; ++k) {
    if (k == 0) continue;
    if (int(bins.size()) == n_occ) break;
    bins.push_back(k < 0 ? k + int(nfft) : k);
  }
  Eigen::FFT<double> fft;
  std::vector<cplx> in(static_cast<size_t>(nfft));
  std::vector<cplx> out, points;
  for (Index base = skip; base + nfft <= sig.size(); base += nfft) {
    for (Index i = 0; i < nfft; ++i) in[size_t(i)] = sig.samples[base + i];
    fft.fwd(out, in);
    for (int b : bins) {
      points.push_back(out[size_t(b)]);
      if (Index(points.size()) >= max_points) return points;
    }
  }
  return points;
}

}  // namespace

MemoryPolynomialPA oracle_pa_from_config(const ExperimentConfig& cfg,
                                         const StagePaths& paths,
                                         bool with_noise) {
  MemoryPolynomialPA pa;
  if (!cfg.pa.coeff_csv.empty())
    pa = load_pa_coeffs(cfg.pa.coeff_csv);
  else if (fs::exists(paths.pa_coeffs()))
    pa = load_pa_coeffs(paths.pa_coeffs());
  else
    pa = default_test_pa(cfg.seed);
  pa.noise_seed = cfg.seed;
  pa.output_noise_dbc = with_noise ? cfg.pa.noise_dbc : std::nullopt;
  return pa;
}

LoadedDataset load_dataset(const ExperimentConfig& cfg, const StagePaths& paths) {
  fs::path in_csv, out_csv;
  if (cfg.dataset.mode == "files") {
    in_csv = cfg.dataset.input_csv;
    out_csv = cfg.dataset.output_csv;
    require_file(in_csv, "gen-data");
    require_file(out_csv, "gen-data");
  } else {
    in_csv = paths.input_csv();
    out_csv = paths.output_csv();
    require_file(in_csv, "gen-data");
    require_file(out_csv, "gen-data");
  }
  const double fs_hz = cfg.sample_rate_hz();
  IQSequence x = load_iq_csv(in_csv, fs_hz);
  IQSequence y = load_iq_csv(out_csv, fs_hz);

  LoadedDataset data;
  data.sample_rate_hz = fs_hz;
  if (cfg.dataset.normalize) {
    NormalizedPair np = normalize_pair(x, y);
    x = np.x;
    y = np.y;
    data.scale_x = np.scale_x;
    data.scale_y = np.scale_y;
  }
  data.split = split_dataset(x, y, cfg.dataset.split);
  data.test_offset = data.split.train_in.size() + data.split.val_in.size();
  return data;
}

void run_gen_data(const ExperimentConfig& cfg) {
  const StagePaths paths{cfg.out_dir};
  fs::create_directories(paths.dir);

  IQSequence x = generate_ofdm(cfg.ofdm);
  // drive level: unit peak puts the crest into the amplifier compression
  const double peak = x.samples.cwiseAbs().maxCoeff();
  x = IQSequence(x.samples / peak, x.sample_rate_hz);

  IQSequence y = x;
  if (cfg.pa.enabled) {
    MemoryPolynomialPA pa;
    if (!cfg.pa.coeff_csv.empty())
      pa = load_pa_coeffs(cfg.pa.coeff_csv);
    else
      pa = default_test_pa(cfg.seed);
    pa.noise_seed = cfg.seed;
    pa.output_noise_dbc = cfg.pa.noise_dbc;
    y = pa_apply(pa, x);
    save_pa_coeffs(paths.pa_coeffs(), pa);
  }
  save_iq_csv(paths.input_csv(), x);
  save_iq_csv(paths.output_csv(), y);
}

void save_train_log(const fs::path& path, const TrainLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "epoch,train_mse,val_mse,val_acpr,lr,gamma\n";
  char buf[160];
  for (const EpochLog& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch,
                  r.train_mse, r.val_mse, r.val_acpr, r.lr, r.gamma);
    out << buf;
  }
}

void run_train_pa(const ExperimentConfig& cfg) {
  const StagePaths paths{cfg.out_dir};
  const LoadedDataset data = load_dataset(cfg, paths);

  TrainConfig tc = cfg.train_pa;
  tc.seed ^= cfg.seed;
  const PaTrainResult<float> res =
      train_pa_model<float>(data.split.train_in, data.split.train_out,
                            data.split.val_in, data.split.val_out,
                            cfg.model.hidden_size, tc);
  save_pa_model(paths.pa_model(), res.model);
  save_train_log(paths.pa_log(), res.log);
}

void run_train_dpd(const ExperimentConfig& cfg) {
  const StagePaths paths{cfg.out_dir};
  require_file(paths.pa_model(), "train-pa");
  const LoadedDataset data = load_dataset(cfg, paths);
  const GruFcModel<float> pa = load_pa_model<float>(paths.pa_model());

  TrainConfig tc = cfg.dpd.train;
  tc.seed ^= cfg.seed;
  std::mt19937_64 rng(cfg.seed * 0x100000001b3ULL + 7);

  TrainLog log;
  TResDeltaGruModel<float> dpd;
  if (cfg.dpd.warm_start && (cfg.model.thresholds.theta_phi > 0 ||
                             cfg.model.thresholds.theta_h > 0)) {
    // dense pre-training, then fine-tuning with the thresholds active
    TResDeltaGruModel<float> dense =
        init_model<float>(cfg.model.hidden_size, DeltaThresholds{}, rng);
    DpdTrainResult<float> stage1 =
        train_dpd_cascade(pa, std::move(dense), cfg.cascade, data.split.train_in,
                          data.split.val_in, cfg.occupied_bw_hz(), tc);
    log = stage1.log;
    stage1.model.thresholds = cfg.model.thresholds;
    TrainConfig ft = tc;
    ft.epochs = cfg.dpd.warm_start_epochs > 0 ? cfg.dpd.warm_start_epochs
                                              : std::max(1, tc.epochs / 4);
    DpdTrainResult<float> stage2 = train_dpd_cascade(
        pa, std::move(stage1.model), cfg.cascade, data.split.train_in,
        data.split.val_in, cfg.occupied_bw_hz(), ft);
    log.insert(log.end(), stage2.log.begin(), stage2.log.end());
    dpd = stage2.model;
  } else {
    TResDeltaGruModel<float> init =
        init_model<float>(cfg.model.hidden_size, cfg.model.thresholds, rng);
    DpdTrainResult<float> res =
        train_dpd_cascade(pa, std::move(init), cfg.cascade, data.split.train_in,
                          data.split.val_in, cfg.occupied_bw_hz(), tc);
    log = res.log;
    dpd = res.model;
  }
  save_model(paths.dpd_model(), dpd);
  save_train_log(paths.dpd_log(), log);
}

void run_qat(const ExperimentConfig& cfg) {
  const StagePaths paths{cfg.out_dir};
  require_file(paths.pa_model(), "train-pa");
  require_file(paths.dpd_model(), "train-dpd");
  const LoadedDataset data = load_dataset(cfg, paths);
  const GruFcModel<float> pa = load_pa_model<float>(paths.pa_model());
  TResDeltaGruModel<float> dpd = load_model<float>(paths.dpd_model());

  TrainConfig tc = cfg.qat.train;
  tc.seed ^= cfg.seed;
  const QatTrainResult res =
      train_qat(pa, std::move(dpd), cfg.qat.quant, cfg.cascade,
                data.split.train_in, data.split.val_in, cfg.occupied_bw_hz(), tc);
  save_quantized_model(paths.quant_model(), res.qmodel);
  save_train_log(paths.qat_log(), res.log);
}

void run_evaluate(const ExperimentConfig& cfg) {
  const StagePaths paths{cfg.out_dir};
  require_file(paths.dpd_model(), "train-dpd");
  require_file(paths.pa_model(), "train-pa");
  const LoadedDataset data = load_dataset(cfg, paths);
  const GruFcModel<float> pa_model = load_pa_model<float>(paths.pa_model());
  const TResDeltaGruModel<float> dpd = load_model<float>(paths.dpd_model());

  const IQSequence& x_test = data.split.test_in;
  const IQSequence& y_test = data.split.test_out;
  const double bw = cfg.occupied_bw_hz();

  json report;
  report["config"] = {{"occupied_bw_hz", bw},
                      {"sample_rate_hz", data.sample_rate_hz},
                      {"test_samples", (long long)x_test.size()}};

  // reference path without predistortion
  const EvalMetrics no_dpd =
      signal_metrics(x_test, y_test, bw, cfg.metrics.segment_len);
  report["no_dpd"] = metrics_to_json(no_dpd);
  report["no_dpd"]["papr_db"] = papr_db(x_test);

  // predistorted path through the oracle amplifier
  ModelForwardResult<float> fwd = model_forward(dpd, x_test);
  const bool have_oracle = cfg.pa.enabled && (fs::exists(paths.pa_coeffs()) ||
                                              !cfg.pa.coeff_csv.empty());
  IQSequence y_dpd = y_test;
  if (have_oracle) {
    const MemoryPolynomialPA oracle = oracle_pa_from_config(cfg, paths, true);
    const IQSequence u_raw = denormalize(fwd.u, data.scale_x);
    y_dpd = pa_apply(oracle, u_raw);
    const EvalMetrics with_dpd =
        signal_metrics(x_test, y_dpd, bw, cfg.metrics.segment_len);
    report["with_dpd_oracle"] = metrics_to_json(with_dpd);
  }

  // predistorted path through the learned behavioral model (simulation)
  {
    const IQSequence y_sim = pa_model_apply_seq(pa_model, fwd.u);
    const EvalMetrics sim = signal_metrics(x_test, y_sim, bw, cfg.metrics.segment_len);
    report["with_dpd_pa_model"] = metrics_to_json(sim);
  }

  if (fs::exists(paths.quant_model())) {
    const QuantizedModel qm = load_quantized_model(paths.quant_model());
    const QuantForwardResult qf = fakequant_forward(qm, x_test);
    if (have_oracle) {
      const MemoryPolynomialPA oracle = oracle_pa_from_config(cfg, paths, true);
      const IQSequence yq = pa_apply(oracle, denormalize(qf.u, data.scale_x));
      report["with_dpd_quantized_oracle"] =
          metrics_to_json(signal_metrics(x_test, yq, bw, cfg.metrics.segment_len));
    }
    report["quantized_gamma"] = qf.sparsity.gamma();
  }

  report["sparsity"] = {{"gamma_phi", fwd.sparsity.gamma_phi},
                        {"gamma_h", fwd.sparsity.gamma_h},
                        {"gamma", fwd.sparsity.gamma()}};
  report["active_params"] =
      count_active_params(dpd, fwd.sparsity.gamma());

  write_psd_csv(paths.psd_no_dpd(), y_test, bw);
  write_psd_csv(paths.psd_dpd(), y_dpd, bw);
  write_am_csv(paths.am_no_dpd(), x_test, y_test);
  write_am_csv(paths.am_dpd(), x_test, y_dpd);

  // constellation plot data: demodulated when the grid is known
  {
    std::vector<std::vector<double>> rows;
    if (cfg.dataset.mode == "synthetic") {
      const auto ref = demod_ofdm(x_test, cfg.ofdm, data.test_offset, 4000);
      const auto rx = demod_ofdm(y_dpd, cfg.ofdm, data.test_offset, 4000);
      cplx g(0, 0);
      double p = 0;
      const size_t n = std::min(ref.size(), rx.size());
      for (size_t i = 0; i < n; ++i) {
        g += rx[i] * std::conj(ref[i]);
        p += std::norm(ref[i]);
      }
      if (p > 0) g /= p;
      if (g == cplx(0, 0)) g = 1;
      for (size_t i = 0; i < n; ++i) {
        const cplx eq = rx[i] / g;
        rows.push_back({ref[i].real(), ref[i].imag(), eq.real(), eq.imag()});
      }
    } else {
      cplx g(0, 0);
      for (Index t = 0; t < x_test.size(); ++t)
        g += y_dpd.samples[t] * std::conj(x_test.samples[t]);
      g /= x_test.samples.squaredNorm();
      if (g == cplx(0, 0)) g = 1;
      for (Index t = 0; t < std::min<Index>(x_test.size(), 4000); ++t) {
        const cplx eq = y_dpd.samples[t] / g;
        rows.push_back({x_test.samples[t].real(), x_test.samples[t].imag(),
                        eq.real(), eq.imag()});
      }
    }
    write_csv(paths.constellation(), "ref_i,ref_q,rx_i,rx_q", rows);
  }

  std::ofstream out(paths.metrics_json());
  out << report.dump(2) << "\n";
}

void run_sweep_thresholds(const ExperimentConfig& cfg,
                          const std::vector<double>& theta_phis,
                          const std::vector<double>& theta_hs) {
  if (theta_phis.empty() || theta_hs.empty())
    throw ConfigError("sweep-thresholds: empty grid");
  const StagePaths paths{cfg.out_dir};
  require_file(paths.dpd_model(), "train-dpd");
  const LoadedDataset data = load_dataset(cfg, paths);
  TResDeltaGruModel<float> dpd = load_model<float>(paths.dpd_model());
  const double bw = cfg.occupied_bw_hz();
  const bool have_oracle = cfg.pa.enabled;
  const MemoryPolynomialPA oracle = oracle_pa_from_config(cfg, paths, true);

  std::vector<std::vector<double>> rows;
  for (double tp : theta_phis)
    for (double thh : theta_hs) {
      dpd.thresholds = DeltaThresholds{tp, thh};
      const ModelForwardResult<float> fwd = model_forward(dpd, data.split.test_in);
      double acpr_avg = std::numeric_limits<double>::quiet_NaN();
      double acpr_lo = acpr_avg, acpr_hi = acpr_avg, evm = acpr_avg;
      if (have_oracle) {
        const IQSequence y =
            pa_apply(oracle, denormalize(fwd.u, data.scale_x));
        const EvalMetrics m =
            signal_metrics(data.split.test_in, y, bw, cfg.metrics.segment_len);
        acpr_avg = m.acpr.avg_dbc;
        acpr_lo = m.acpr.lower_dbc;
        acpr_hi = m.acpr.upper_dbc;
        evm = m.evm;
      }
      rows.push_back({tp, thh, fwd.sparsity.gamma_phi, fwd.sparsity.gamma_h,
                      fwd.sparsity.gamma(),
                      count_active_params(dpd, fwd.sparsity.gamma()), acpr_avg,
                      acpr_lo, acpr_hi, evm});
    }
  write_csv(paths.sweep_thresholds(),
            "theta_phi,theta_h,gamma_phi,gamma_h,gamma,active_params,"
            "acpr_avg_dbc,acpr_lower_dbc,acpr_upper_dbc,evm_db",
            rows);
}

void run_sweep_precision(const ExperimentConfig& cfg,
                         const std::vector<std::string>& precisions) {
  if (precisions.empty()) throw ConfigError("sweep-precision: empty list");
  const StagePaths paths{cfg.out_dir};
  require_file(paths.dpd_model(), "train-dpd");
  require_file(paths.pa_model(), "train-pa");
  const LoadedDataset data = load_dataset(cfg, paths);
  const GruFcModel<float> pa_model = load_pa_model<float>(paths.pa_model());
  const TResDeltaGruModel<float> dpd = load_model<float>(paths.dpd_model());
  const double bw = cfg.occupied_bw_hz();
  const MemoryPolynomialPA oracle = oracle_pa_from_config(cfg, paths, true);
  const EnergyTable& table = cfg.energy.table;

  auto parse_bits = [](const std::string& s) -> std::pair<int, int> {
    if (s == "fp32") return {32, 32};
    if (s.size() >= 2 && (s[0] == 'W' || s[0] == 'w')) {
      const auto a = s.find('A');
      const auto a2 = a == std::string::npos ? s.find('a') : a;
      if (a2 == std::string::npos)
        throw ConfigError("sweep-precision: bad token " + s);
      return {std::stoi(s.substr(1, a2 - 1)), std::stoi(s.substr(a2 + 1))};
    }
    const int b = std::stoi(s);
    return {b, b};
  };

  std::vector<std::vector<double>> rows;
  for (const std::string& tok : precisions) {
    const auto [wb, ab] = parse_bits(tok);
    IQSequence u = data.split.test_in;  // placeholder
    double gamma = 0;
    if (wb == 32) {
      const ModelForwardResult<float> fwd = model_forward(dpd, data.split.test_in);
      u = fwd.u;
      gamma = fwd.sparsity.gamma();
    } else {
      QuantModelConfig qc;
      qc.weight_bits = wb;
      qc.activation_bits = ab;
      TrainConfig tc = cfg.qat.train;
      tc.seed ^= cfg.seed;
      TResDeltaGruModel<float> seed_model = dpd;
      const QatTrainResult res =
          train_qat(pa_model, std::move(seed_model), qc, cfg.cascade,
                    data.split.train_in, data.split.val_in, bw, tc);
      const QuantForwardResult qf = fakequant_forward(res.qmodel, data.split.test_in);
      u = qf.u;
      gamma = qf.sparsity.gamma();
    }
    double acpr_avg = std::numeric_limits<double>::quiet_NaN();
    double evm = acpr_avg;
    if (cfg.pa.enabled) {
      const IQSequence y = pa_apply(oracle, denormalize(u, data.scale_x));
      const EvalMetrics m =
          signal_metrics(data.split.test_in, y, bw, cfg.metrics.segment_len);
      acpr_avg = m.acpr.avg_dbc;
      evm = m.evm;
    }
    const Precision prec = wb == 32 ? Precision::fp32 : precision_from_bits(ab);
    const OpCounts dense = count_forward_ops(dpd.dims(), 0, 0);
    const EnergyBreakdown ef =
        scale_energy(dense, table, EnergyScaling{width_factor(prec, table), gamma},
                     prec);
    rows.push_back({double(wb), double(ab), gamma, acpr_avg, evm, ef.total()});
  }
  write_csv(paths.sweep_precision(),
            "weight_bits,activation_bits,gamma,acpr_avg_dbc,evm_db,ef_joules", rows);
}

void run_energy_report(const ExperimentConfig& cfg) {
  const StagePaths paths{cfg.out_dir};
  require_file(paths.dpd_model(), "train-dpd");
  const LoadedDataset data = load_dataset(cfg, paths);
  const TResDeltaGruModel<float> dpd = load_model<float>(paths.dpd_model());

  const ModelForwardResult<float> fwd = model_forward(dpd, data.split.test_in);
  const Precision prec = precision_from_name(cfg.energy.precision);
  const EnergyReport rep =
      energy_report(count_params(dpd), dpd.dims(), fwd.sparsity, prec,
                    cfg.energy.table, cfg.energy.scenario);

  // instrumented totals vs the analytical formula, as a cross-check
  const OpCounts analytic = count_forward_ops_total(
      dpd.dims(), fwd.sparsity.phi_total / size_t(kFeatureWidth),
      fwd.sparsity.phi_total - fwd.sparsity.phi_skipped,
      fwd.sparsity.h_total - fwd.sparsity.h_skipped);
  const OpCounts::Cat inst = fwd.ops.total();
  const OpCounts::Cat ana = analytic.total();

  auto cat_json = [](const OpCounts::Cat& c) {
    return json{{"muls", c.muls},
                {"adds", c.adds},
                {"activations", c.activations},
                {"reads", c.reads},
                {"writes", c.writes}};
  };
  auto breakdown_json = [](const EnergyBreakdown& b) {
    return json{{"e_mul_j", b.e_mul},
                {"e_add_j", b.e_add},
                {"e_act_j", b.e_act},
                {"e_mem_j", b.e_mem},
                {"e_total_j", b.total()},
                {"mul_factor", b.mul_factor},
                {"add_factor", b.add_factor},
                {"mem_factor", b.mem_factor}};
  };

  json out;
  out["note"] = "arithmetic + D-cache analytical estimate";
  out["precision"] = precision_name(rep.precision);
  out["sparsity"] = {{"gamma_phi", rep.gamma_phi},
                     {"gamma_h", rep.gamma_h},
                     {"gamma", rep.gamma}};
  out["active_params"] = rep.active_params;
  out["per_step_dense_counts"] = {
      {"gru_input", cat_json(rep.dense_per_step.gru_input)},
      {"gru_hidden", cat_json(rep.dense_per_step.gru_hidden)},
      {"gru_state", cat_json(rep.dense_per_step.gru_state)},
      {"encode", cat_json(rep.dense_per_step.encode)},
      {"fc", cat_json(rep.dense_per_step.fc)},
      {"tcn", cat_json(rep.dense_per_step.tcn)},
      {"macs_per_step", rep.dense_per_step.macs()}};
  out["instrumented_totals"] = cat_json(inst);
  out["analytical_totals"] = cat_json(ana);
  out["ef"] = breakdown_json(rep.ef);
  out["ef_fp32_dense"] = breakdown_json(rep.ef_fp32_dense);
  out["reduction_vs_fp32_dense"] = rep.reduction_vs_fp32_dense;
  out["power"] = {{"p_inf_w", rep.power.p_inf},
                  {"p_sam_w", rep.power.p_sam},
                  {"p_ada_w", rep.power.p_ada},
                  {"p_total_w", rep.power.p_total}};

  std::ofstream f(paths.energy_json());
  f << out.dump(2) << "\n";
}

}  // namespace dpd
