#pragma once

#include "dpd/config.hpp"
#include "dpd/checkpoint.hpp"
#include "dpd/metrics.hpp"
#include "dpd/pa.hpp"

#include <filesystem>

namespace dpd {

/// File layout of one experiment directory. Stages communicate only through
/// these paths.
struct StagePaths {
  std::filesystem::path dir;

  explicit StagePaths(const std::filesystem::path& d) : dir(d) {}

  std::filesystem::path input_csv() const { return dir / "input.csv"; }
  std::filesystem::path output_csv() const { return dir / "output.csv"; }
  std::filesystem::path pa_coeffs() const { return dir / "pa_coeffs.csv"; }
  std::filesystem::path pa_model() const { return dir / "pa_model.bin"; }
  std::filesystem::path dpd_model() const { return dir / "dpd_model.bin"; }
  std::filesystem::path quant_model() const { return dir / "dpd_quant.bin"; }
  std::filesystem::path pa_log() const { return dir / "pa_train_log.csv"; }
  std::filesystem::path dpd_log() const { return dir / "dpd_train_log.csv"; }
  std::filesystem::path qat_log() const { return dir / "qat_train_log.csv"; }
  std::filesystem::path metrics_json() const { return dir / "metrics.json"; }
  std::filesystem::path psd_no_dpd() const { return dir / "psd_no_dpd.csv"; }
  std::filesystem::path psd_dpd() const { return dir / "psd_dpd.csv"; }
  std::filesystem::path am_no_dpd() const { return dir / "am_no_dpd.csv"; }
  std::filesystem::path am_dpd() const { return dir / "am_dpd.csv"; }
  std::filesystem::path constellation() const { return dir / "constellation.csv"; }
  std::filesystem::path sweep_thresholds() const {
    return dir / "sweep_thresholds.csv";
  }
  std::filesystem::path sweep_precision() const { return dir / "sweep_precision.csv"; }
  std::filesystem::path energy_json() const { return dir / "energy.json"; }
};

MemoryPolynomialPA oracle_pa_from_config(const ExperimentConfig& cfg,
                                         const StagePaths& paths,
                                         bool with_noise);

struct LoadedDataset {
  DatasetSplit split;   // normalized (or raw when normalization is off)
  double scale_x = 1.0, scale_y = 1.0;
  double sample_rate_hz = 1.0;
  Index test_offset = 0;  // absolute start of the test split in the file order
};

LoadedDataset load_dataset(const ExperimentConfig& cfg, const StagePaths& paths);

void run_gen_data(const ExperimentConfig& cfg);
void run_train_pa(const ExperimentConfig& cfg);
void run_train_dpd(const ExperimentConfig& cfg);
void run_qat(const ExperimentConfig& cfg);
void run_evaluate(const ExperimentConfig& cfg);
void run_sweep_thresholds(const ExperimentConfig& cfg,
                          const std::vector<double>& theta_phis,
                          const std::vector<double>& theta_hs);
void run_sweep_precision(const ExperimentConfig& cfg,
                         const std::vector<std::string>& precisions);
void run_energy_report(const ExperimentConfig& cfg);

void save_train_log(const std::filesystem::path& path, const TrainLog& log);

}  // namespace dpd
