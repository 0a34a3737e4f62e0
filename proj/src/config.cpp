#include "dpd/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace dpd {

namespace {

using nlohmann::json;

/// Object view that rejects unknown keys once parsing finishes.
class StrictObj {
 public:
  StrictObj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError("config: " + path_ + " must be an object");
  }

  ~StrictObj() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key))
        throw ConfigError("config: unknown key '" + path_ + key + "'");
  }

  bool has(const std::string& key) {
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + path_ + key + "': " + e.what());
    }
  }

  std::optional<double> get_optional(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    return j_.at(key).get<double>();
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

TrainConfig parse_train(const json& j, const std::string& path, TrainConfig base) {
  StrictObj o(j, path);
  base.epochs = o.get("epochs", base.epochs);
  base.lr = o.get("lr", base.lr);
  base.batch_size = o.get("batch_size", base.batch_size);
  base.frame_length = o.get("frame_length", (long long)base.frame_length);
  base.frame_stride = o.get("frame_stride", (long long)base.frame_stride);
  base.warmup = o.get("warmup", (long long)base.warmup);
  base.seed = o.get("seed", base.seed);
  base.scale_lr_ratio = o.get("scale_lr_ratio", base.scale_lr_ratio);
  if (const json* a = o.sub("adamw")) {
    StrictObj ao(*a, path + "adamw.");
    base.adamw.beta1 = ao.get("beta1", base.adamw.beta1);
    base.adamw.beta2 = ao.get("beta2", base.adamw.beta2);
    base.adamw.eps = ao.get("eps", base.adamw.eps);
    base.adamw.weight_decay = ao.get("weight_decay", base.adamw.weight_decay);
  }
  if (const json* p = o.sub("plateau")) {
    StrictObj po(*p, path + "plateau.");
    base.plateau.factor = po.get("factor", base.plateau.factor);
    base.plateau.patience = po.get("patience", base.plateau.patience);
    base.plateau.tolerance = po.get("tolerance", base.plateau.tolerance);
    base.plateau.min_lr = po.get("min_lr", base.plateau.min_lr);
  }
  return base;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }

  ExperimentConfig cfg;
  StrictObj o(root, "");
  cfg.seed = o.get("seed", cfg.seed);
  cfg.out_dir = o.get("out_dir", cfg.out_dir);

  if (const json* d = o.sub("dataset")) {
    StrictObj od(*d, "dataset.");
    cfg.dataset.mode = od.get<std::string>("mode", cfg.dataset.mode);
    cfg.dataset.input_csv = od.get<std::string>("input_csv", "");
    cfg.dataset.output_csv = od.get<std::string>("output_csv", "");
    cfg.dataset.sample_rate_hz = od.get("sample_rate_hz", cfg.dataset.sample_rate_hz);
    cfg.dataset.normalize = od.get("normalize", cfg.dataset.normalize);
    if (const json* s = od.sub("split")) {
      StrictObj os(*s, "dataset.split.");
      cfg.dataset.split.train = os.get("train", cfg.dataset.split.train);
      cfg.dataset.split.val = os.get("val", cfg.dataset.split.val);
      cfg.dataset.split.test = os.get("test", cfg.dataset.split.test);
    }
  }

  if (const json* f = o.sub("ofdm")) {
    StrictObj of(*f, "ofdm.");
    cfg.ofdm.num_channels = of.get("num_channels", cfg.ofdm.num_channels);
    cfg.ofdm.channel_bw_hz = of.get("channel_bw_hz", cfg.ofdm.channel_bw_hz);
    cfg.ofdm.subcarrier_spacing_hz =
        of.get("subcarrier_spacing_hz", cfg.ofdm.subcarrier_spacing_hz);
    cfg.ofdm.qam_order = of.get("qam_order", cfg.ofdm.qam_order);
    cfg.ofdm.num_symbols = of.get("num_symbols", cfg.ofdm.num_symbols);
    cfg.ofdm.oversample_ratio = of.get("oversample_ratio", cfg.ofdm.oversample_ratio);
    cfg.ofdm.seed = of.get("seed", cfg.seed);
  } else {
    cfg.ofdm.seed = cfg.seed;
  }

  if (const json* p = o.sub("pa")) {
    StrictObj op(*p, "pa.");
    cfg.pa.enabled = op.get("enabled", cfg.pa.enabled);
    cfg.pa.noise_dbc = op.get_optional("noise_dbc");
    cfg.pa.coeff_csv = op.get<std::string>("coeff_csv", "");
  }

  if (const json* m = o.sub("model")) {
    StrictObj om(*m, "model.");
    cfg.model.hidden_size = om.get("hidden_size", (long long)cfg.model.hidden_size);
    cfg.model.thresholds.theta_phi = om.get("theta_phi", 0.0);
    cfg.model.thresholds.theta_h = om.get("theta_h", 0.0);
  }

  cfg.train_pa.epochs = 60;
  if (const json* t = o.sub("train_pa"))
    cfg.train_pa = parse_train(*t, "train_pa.", cfg.train_pa);
  cfg.dpd.train.epochs = 80;
  if (const json* t = o.sub("train_dpd")) {
    StrictObj ot(*t, "train_dpd.");
    cfg.dpd.warm_start = ot.get("warm_start", cfg.dpd.warm_start);
    cfg.dpd.warm_start_epochs = ot.get("warm_start_epochs", cfg.dpd.warm_start_epochs);
    if (const json* inner = ot.sub("train"))
      cfg.dpd.train = parse_train(*inner, "train_dpd.train.", cfg.dpd.train);
  }
  cfg.qat.train.epochs = 10;
  if (const json* q = o.sub("qat")) {
    StrictObj oq(*q, "qat.");
    cfg.qat.quant.weight_bits = oq.get("weight_bits", cfg.qat.quant.weight_bits);
    cfg.qat.quant.activation_bits =
        oq.get("activation_bits", cfg.qat.quant.activation_bits);
    if (const json* inner = oq.sub("train"))
      cfg.qat.train = parse_train(*inner, "qat.train.", cfg.qat.train);
  }

  if (const json* c = o.sub("cascade")) {
    StrictObj oc(*c, "cascade.");
    cfg.cascade.target_gain =
        cplx(oc.get("target_gain_re", 1.0), oc.get("target_gain_im", 0.0));
  }

  if (const json* m = o.sub("metrics")) {
    StrictObj om(*m, "metrics.");
    cfg.metrics.occupied_bw_hz = om.get("occupied_bw_hz", 0.0);
    cfg.metrics.segment_len = om.get("segment_len", (long long)0);
  }

  if (const json* e = o.sub("energy")) {
    StrictObj oe(*e, "energy.");
    cfg.energy.scenario.f_s_hz = oe.get("f_s_hz", cfg.energy.scenario.f_s_hz);
    cfg.energy.scenario.t_dpd_s = oe.get("t_dpd_s", cfg.energy.scenario.t_dpd_s);
    cfg.energy.scenario.p_adc_w = oe.get("p_adc_w", cfg.energy.scenario.p_adc_w);
    cfg.energy.scenario.n_sam = oe.get("n_sam", cfg.energy.scenario.n_sam);
    cfg.energy.scenario.n_epo = oe.get("n_epo", cfg.energy.scenario.n_epo);
    cfg.energy.scenario.backward_cost_ratio =
        oe.get("backward_cost_ratio", cfg.energy.scenario.backward_cost_ratio);
    cfg.energy.precision = oe.get<std::string>("precision", cfg.energy.precision);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

void ExperimentConfig::validate() const {
  try {
    if (dataset.mode != "synthetic" && dataset.mode != "files")
      throw ConfigError("config: dataset.mode must be 'synthetic' or 'files'");
    if (dataset.mode == "files") {
      if (dataset.input_csv.empty() || dataset.output_csv.empty())
        throw ConfigError("config: files mode needs input_csv and output_csv");
      if (!(dataset.sample_rate_hz > 0))
        throw ConfigError("config: files mode needs sample_rate_hz > 0");
    } else {
      ofdm.validate();
    }
    const double rsum = dataset.split.train + dataset.split.val + dataset.split.test;
    if (std::abs(rsum - 1.0) > 1e-9)
      throw ConfigError("config: split ratios must sum to 1");
    if (model.hidden_size < 1) throw ConfigError("config: hidden_size >= 1");
    model.thresholds.validate();
    train_pa.validate();
    dpd.train.validate();
    qat.train.validate();
    qat.quant.validate();
    cascade.validate();
    energy.table.validate();
    energy.scenario.validate();
    (void)precision_from_name(energy.precision);
    if (!pa.coeff_csv.empty() && !std::filesystem::exists(pa.coeff_csv))
      throw ConfigError("config: pa.coeff_csv not found: " + pa.coeff_csv);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace dpd
