// Command-line front end: dataset generation, the three training stages,
// evaluation, sweeps, and energy reports, all driven by one JSON experiment
// config. Stages communicate only through files in the output directory.

#include "dpd/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_override;
  long long seed_override = -1;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--out", args.out_override, "output directory override");
  cmd->add_option("--seed", args.seed_override, "seed override");
  cmd->add_flag("--deterministic", args.deterministic,
                "single-threaded bit-reproducible execution (always on; flag "
                "kept for script compatibility)");
}

dpd::ExperimentConfig load_cfg(const CommonArgs& args) {
  dpd::ExperimentConfig cfg = dpd::load_experiment_config(args.config_path);
  if (!args.out_override.empty()) cfg.out_dir = args.out_override;
  if (args.seed_override >= 0) {
    cfg.seed = static_cast<unsigned long long>(args.seed_override);
    cfg.ofdm.seed = cfg.seed;
  }
  return cfg;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::string tok;
  std::istringstream ss(csv);
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<std::string> parse_tokens(const std::string& csv) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ss(csv);
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural digital predistortion laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string theta_phi_list = "0,0.002,0.005,0.01,0.02,0.04";
  std::string theta_h_list = "0,0.02,0.05,0.1,0.2,0.4";
  std::string precision_list = "fp32,W16A16,W12A12";

  CLI::App* gen = app.add_subcommand("gen-data", "synthesize the dataset files");
  add_common(gen, args);
  CLI::App* tpa = app.add_subcommand("train-pa", "train the behavioral PA model");
  add_common(tpa, args);
  CLI::App* tdpd =
      app.add_subcommand("train-dpd", "train the predistorter through the frozen PA");
  add_common(tdpd, args);
  CLI::App* tqat = app.add_subcommand("qat", "quantization-aware fine-tuning");
  add_common(tqat, args);
  CLI::App* eval = app.add_subcommand("evaluate", "metrics and plot data");
  add_common(eval, args);
  CLI::App* sth = app.add_subcommand("sweep-thresholds",
                                     "delta-threshold grid: sparsity vs quality");
  add_common(sth, args);
  sth->add_option("--theta-phi", theta_phi_list, "comma-separated input thresholds");
  sth->add_option("--theta-h", theta_h_list, "comma-separated hidden thresholds");
  CLI::App* spr = app.add_subcommand("sweep-precision",
                                     "precision scan (fp32, W16A16, 12, ...)");
  add_common(spr, args);
  spr->add_option("--precision", precision_list, "comma-separated precision tokens");
  CLI::App* ener = app.add_subcommand("energy-report", "analytical energy report");
  add_common(ener, args);

  CLI11_PARSE(app, argc, argv);

  try {
    const dpd::ExperimentConfig cfg = load_cfg(args);
    if (gen->parsed()) dpd::run_gen_data(cfg);
    if (tpa->parsed()) dpd::run_train_pa(cfg);
    if (tdpd->parsed()) dpd::run_train_dpd(cfg);
    if (tqat->parsed()) dpd::run_qat(cfg);
    if (eval->parsed()) dpd::run_evaluate(cfg);
    if (sth->parsed())
      dpd::run_sweep_thresholds(cfg, parse_list(theta_phi_list),
                                parse_list(theta_h_list));
    if (spr->parsed()) dpd::run_sweep_precision(cfg, parse_tokens(precision_list));
    if (ener->parsed()) dpd::run_energy_report(cfg);
    return 0;
  } catch (const dpd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dpd::MissingPrerequisite& e) {
    std::cerr << "missing prerequisite: " << e.what() << "\n";
    return 3;
  } catch (const dpd::DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
