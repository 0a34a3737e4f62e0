#include "dpd/energy.hpp"

namespace dpd {

void EnergyTable::validate() const {
  for (double v : {fp32_add, fp32_mul, int16_add, int16_mul, int12_add, int12_mul,
                   l1_access, dram_access, width_fp32, width_int16, width_int12})
    if (!(v > 0)) throw std::invalid_argument("EnergyTable: entries must be positive");
}

Precision precision_from_name(const std::string& name) {
  if (name == "fp32") return Precision::fp32;
  if (name == "int16") return Precision::int16;
  if (name == "int12") return Precision::int12;
  if (name == "int8") return Precision::int8;
  throw std::invalid_argument("unknown precision: " + name);
}

std::string precision_name(Precision p) {
  switch (p) {
    case Precision::fp32: return "fp32";
    case Precision::int16: return "int16";
    case Precision::int12: return "int12";
    case Precision::int8: return "int8";
  }
  throw std::invalid_argument("unknown precision");
}

Precision precision_from_bits(int bits) {
  switch (bits) {
    case 32: return Precision::fp32;
    case 16: return Precision::int16;
    case 12: return Precision::int12;
    case 8: return Precision::int8;
  }
  throw std::invalid_argument("unsupported bit width: " + std::to_string(bits));
}

double width_factor(Precision p, const EnergyTable& t) {
  switch (p) {
    case Precision::fp32: return t.width_fp32;
    case Precision::int16: return t.width_int16;
    case Precision::int12: return t.width_int12;
    case Precision::int8: return 0.25;
  }
  throw std::invalid_argument("unknown precision");
}

void EnergyScaling::validate() const {
  if (!(alpha > 0 && alpha <= 1))
    throw std::invalid_argument("EnergyScaling: alpha in (0,1]");
  if (!(gamma >= 0 && gamma <= 1))
    throw std::invalid_argument("EnergyScaling: gamma in [0,1]");
}

EnergyBreakdown scale_energy(const OpCounts& dense_counts, const EnergyTable& table,
                             const EnergyScaling& scaling, Precision precision) {
  table.validate();
  scaling.validate();
  const double a = scaling.alpha;
  const double keep = 1.0 - scaling.gamma;

  double e_mul_op, e_add_op;
  if (precision == Precision::fp32) {
    e_mul_op = table.fp32_mul;
    e_add_op = table.fp32_add;
  } else {
    e_mul_op = a * a * table.int32_mul();
    e_add_op = a * table.int32_add();
  }
  const double e_mem_op = a * table.l1_access;

  auto cat_energy = [&](const OpCounts::Cat& c, double sparsity_keep,
                        EnergyBreakdown& b) {
    b.e_mul += sparsity_keep * c.muls * e_mul_op;
    b.e_add += sparsity_keep * c.adds * e_add_op;
    b.e_act += sparsity_keep * c.activations * (e_mul_op + 2 * e_add_op);
    b.e_mem += sparsity_keep * (c.reads + c.writes) * e_mem_op;
  };

  EnergyBreakdown b;
  b.mul_factor = keep * a * a;
  b.add_factor = keep * a;
  b.mem_factor = keep * a;
  cat_energy(dense_counts.gru_input, keep, b);
  cat_energy(dense_counts.gru_hidden, keep, b);
  cat_energy(dense_counts.gru_state, 1.0, b);
  cat_energy(dense_counts.encode, 1.0, b);
  cat_energy(dense_counts.fc, 1.0, b);
  cat_energy(dense_counts.tcn, 1.0, b);
  return b;
}

void PowerScenario::validate() const {
  if (!(e_f_j > 0 && f_s_hz > 0 && t_dpd_s > 0 && p_adc_w > 0))
    throw std::invalid_argument("PowerScenario: rates and energies must be positive");
  if (n_sam < 0 || n_epo < 0 || backward_cost_ratio < 0)
    throw std::invalid_argument("PowerScenario: counts must be nonnegative");
  if (n_sam > 0 && !(t_dpd_s > n_sam / f_s_hz))
    throw std::invalid_argument(
        "PowerScenario: adaptation period shorter than the sampling burst");
}

PowerBreakdown power_breakdown(const PowerScenario& s) {
  s.validate();
  PowerBreakdown p;
  p.p_inf = s.e_f_j * s.f_s_hz;
  p.p_sam = s.p_adc_w * s.n_sam / (s.t_dpd_s * s.f_s_hz);
  p.p_ada = (1.0 + s.backward_cost_ratio) * s.e_f_j * s.n_epo * s.n_sam / s.t_dpd_s;
  p.p_total = p.p_inf + p.p_sam + p.p_ada;
  return p;
}

EnergyReport energy_report(const ParamCount& params, const ModelDims& dims,
                           const SparsityReport& sparsity, Precision precision,
                           const EnergyTable& table, PowerScenario scenario) {
  EnergyReport r;
  r.precision = precision;
  r.gamma = sparsity.gamma();
  r.gamma_phi = sparsity.gamma_phi;
  r.gamma_h = sparsity.gamma_h;
  r.dense_per_step = count_forward_ops(dims, 0.0, 0.0);

  EnergyScaling scaled{width_factor(precision, table), r.gamma};
  r.ef = scale_energy(r.dense_per_step, table, scaled, precision);
  r.ef_fp32_dense =
      scale_energy(r.dense_per_step, table, EnergyScaling{1.0, 0.0}, Precision::fp32);
  r.reduction_vs_fp32_dense = r.ef_fp32_dense.total() / r.ef.total();

  r.active_params = double(params.gru_params) * (1.0 - r.gamma) +
                    double(params.fc_params) + double(params.tcn_params);

  scenario.e_f_j = r.ef.total();
  r.power = power_breakdown(scenario);
  return r;
}

}  // namespace dpd
