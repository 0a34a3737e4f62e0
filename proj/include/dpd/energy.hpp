#pragma once

#include "dpd/model.hpp"
#include "dpd/opcount.hpp"

#include <string>

namespace dpd {

/// Per-operation energies for a 7 nm node (joules) plus data-width scaling
/// factors. The INT32 baselines are derived from the INT16 entries under the
/// quadratic (multiply) / linear (add) bit-width scaling laws; the published
/// INT12 entries are the rounded values of the same laws.
struct EnergyTable {
  double fp32_add = 0.38e-12;
  double fp32_mul = 1.31e-12;
  double int16_add = 0.015e-12;
  double int16_mul = 0.37e-12;
  double int12_add = 0.011e-12;
  double int12_mul = 0.21e-12;
  double l1_access = 7.5e-12;
  double dram_access = 1.3e-9;  // excluded from E_F; initialization traffic only
  double width_fp32 = 1.0;
  double width_int16 = 0.5;
  double width_int12 = 0.375;

  double int32_add() const { return int16_add / width_int16; }
  double int32_mul() const { return int16_mul / (width_int16 * width_int16); }

  void validate() const;
};

enum class Precision { fp32, int16, int12, int8 };

Precision precision_from_name(const std::string& name);
std::string precision_name(Precision p);
Precision precision_from_bits(int bits);

/// Bit-width ratio alpha versus 32 bits.
double width_factor(Precision p, const EnergyTable& t);

struct EnergyScaling {
  double alpha = 1.0;  // in (0, 1]
  double gamma = 0.0;  // temporal sparsity in [0, 1]

  void validate() const;
};

/// Forward-pass energy with the committed factor structure: multiplies scale
/// by (1-gamma)*alpha^2, adds and memory by (1-gamma)*alpha. gamma applies
/// to the delta-skippable GRU matrix work (gru_input + gru_hidden); the
/// per-step gate, FC, TCN and encode terms carry only the width scaling.
/// Activation-function evaluations are costed as one multiply plus two adds.
struct EnergyBreakdown {
  double e_mul = 0, e_add = 0, e_act = 0, e_mem = 0;  // joules
  double mul_factor = 1, add_factor = 1, mem_factor = 1;

  double total() const { return e_mul + e_add + e_act + e_mem; }
};

EnergyBreakdown scale_energy(const OpCounts& dense_counts, const EnergyTable& table,
                             const EnergyScaling& scaling, Precision precision);

struct PowerScenario {
  double e_f_j = 10e-9;    // energy per forward pass
  double f_s_hz = 1e9;     // sample rate
  double t_dpd_s = 1e-3;   // adaptation period
  double p_adc_w = 1.0;    // observation-path ADC power
  double n_sam = 6600;     // samples collected per adaptation cycle
  double n_epo = 10;       // adaptation epochs
  double backward_cost_ratio = 3.0;  // E_B ~ 3 E_F, so E_F + E_B = 4 E_F

  void validate() const;
};

struct PowerBreakdown {
  double p_inf = 0, p_sam = 0, p_ada = 0, p_total = 0;
};

/// P_inf = E_F f_s;  P_sam = P_adc N_sam / (T f_s);
/// P_ada = (1 + r) E_F N_epo N_sam / T.
PowerBreakdown power_breakdown(const PowerScenario& s);

struct EnergyReport {
  Precision precision = Precision::fp32;
  double gamma = 0, gamma_phi = 0, gamma_h = 0;
  OpCounts dense_per_step;
  EnergyBreakdown ef;             // at measured sparsity and chosen precision
  EnergyBreakdown ef_fp32_dense;  // reference point
  double reduction_vs_fp32_dense = 1.0;
  double active_params = 0;
  PowerBreakdown power;  // scenario with e_f replaced by the computed E_F
};

EnergyReport energy_report(const ParamCount& params, const ModelDims& dims,
                           const SparsityReport& sparsity, Precision precision,
                           const EnergyTable& table, PowerScenario scenario);

}  // namespace dpd
