#pragma once

#include "dpd/energy.hpp"
#include "dpd/pa.hpp"
#include "dpd/quant.hpp"
#include "dpd/signal.hpp"
#include "dpd/train.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace dpd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingPrerequisite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  std::string mode = "synthetic";  // "synthetic" | "files"
  std::string input_csv, output_csv;
  double sample_rate_hz = 0;  // 0 in synthetic mode: derived from the generator
  bool normalize = true;
  SplitRatios split;
};

struct PaConfig {
  bool enabled = true;  // disabled: loopback, output = input
  std::optional<double> noise_dbc;
  std::string coeff_csv;  // empty: the committed default amplifier
};

struct ModelConfig {
  Index hidden_size = 15;
  DeltaThresholds thresholds;
};

struct DpdStageConfig {
  TrainConfig train;
  bool warm_start = false;  // train dense first, then fine-tune with thresholds
  int warm_start_epochs = 0;  // 0: reuse train.epochs for the dense stage
};

struct QatStageConfig {
  TrainConfig train;
  QuantModelConfig quant;
};

struct MetricsConfig {
  double occupied_bw_hz = 0;  // 0: derived from the generator config
  Index segment_len = 0;      // 0: picked from the bandwidth rule
};

struct EnergyConfig {
  PowerScenario scenario;
  EnergyTable table;
  std::string precision = "int16";
};

struct ExperimentConfig {
  unsigned long long seed = 1;
  std::string out_dir = "out";
  DatasetConfig dataset;
  OfdmConfig ofdm;
  PaConfig pa;
  ModelConfig model;
  TrainConfig train_pa;
  DpdStageConfig dpd;
  QatStageConfig qat;
  CascadeConfig cascade;
  MetricsConfig metrics;
  EnergyConfig energy;

  double occupied_bw_hz() const {
    return metrics.occupied_bw_hz > 0 ? metrics.occupied_bw_hz
                                      : ofdm.occupied_bw_hz();
  }
  double sample_rate_hz() const {
    return dataset.sample_rate_hz > 0 ? dataset.sample_rate_hz
                                      : ofdm.sample_rate_hz();
  }

  /// Full fail-fast validation: anything a later stage would reject is
  /// rejected here.
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

}  // namespace dpd
