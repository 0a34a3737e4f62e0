#pragma once

#include "dpd/iq.hpp"

#include <cstdint>

namespace dpd {

/// Structural dimensions that determine per-step work.
struct ModelDims {
  Index hidden = 15;
  Index input = 6;
  Index tcn_c_in = 2, tcn_c_mid = 3, tcn_c_out = 2;
  Index tcn_k1 = 3;

  Index tcn_macs() const { return tcn_k1 * tcn_c_mid * tcn_c_in + tcn_c_out * tcn_c_mid; }
};

/// Forward-pass operation and memory-access counts, split by submodule.
///
/// Counting convention (mirrored exactly by the instrumented engine):
///  - gru_input / gru_hidden: one mul + one add + one weight read per MAC;
///    a delta element that fires touches a 3H-row column in three matrices.
///    Skipped columns contribute nothing.
///  - encode: F (+H after the first step) compare-subtractions and buffer
///    reads per step; one buffer write per fired element.
///  - gru_state: per-step gate math on the four accumulators: 3H elementwise
///    muls/adds, 3H activation evaluations, 5H reads (M + h_prev) and
///    5H writes (M + h).
///  - fc: 2H MACs, bias adds, output write.
///  - tcn: fixed 24 MACs per step (zero-padded edges are executed MACs),
///    biases, Hardswish evaluations, the 2 residual adds into the output.
struct OpCounts {
  struct Cat {
    double muls = 0, adds = 0, activations = 0, reads = 0, writes = 0;

    Cat& operator+=(const Cat& o) {
      muls += o.muls;
      adds += o.adds;
      activations += o.activations;
      reads += o.reads;
      writes += o.writes;
      return *this;
    }
  };

  Cat gru_input, gru_hidden, gru_state, encode, fc, tcn;

  Cat total() const {
    Cat t;
    t += gru_input;
    t += gru_hidden;
    t += gru_state;
    t += encode;
    t += fc;
    t += tcn;
    return t;
  }

  double gru_macs() const { return gru_input.muls + gru_hidden.muls; }
  double macs() const { return gru_macs() + fc.muls + tcn.muls; }
};

/// Expected per-step counts at steady state given skip fractions
/// gamma_phi, gamma_h in [0,1].
inline OpCounts count_forward_ops(const ModelDims& d, double gamma_phi,
                                  double gamma_h) {
  if (gamma_phi < 0 || gamma_phi > 1 || gamma_h < 0 || gamma_h > 1)
    throw std::invalid_argument("count_forward_ops: gamma outside [0,1]");
  const double h = double(d.hidden), f = double(d.input);
  OpCounts c;

  const double n_phi = f * (1.0 - gamma_phi);  // fired input elements
  c.gru_input.muls = 3 * h * n_phi;
  c.gru_input.adds = 3 * h * n_phi;
  c.gru_input.reads = 3 * h * n_phi;

  const double n_h = h * (1.0 - gamma_h);
  c.gru_hidden.muls = 3 * h * n_h;
  c.gru_hidden.adds = 3 * h * n_h;
  c.gru_hidden.reads = 3 * h * n_h;

  c.encode.adds = f + h;
  c.encode.reads = 2 * (f + h);
  c.encode.writes = n_phi + n_h;

  c.gru_state.muls = 3 * h;
  c.gru_state.adds = 3 * h;
  c.gru_state.activations = 3 * h;
  c.gru_state.reads = 5 * h;
  c.gru_state.writes = 5 * h;

  c.fc.muls = 2 * h;
  c.fc.adds = 2 * h + 2;
  c.fc.reads = 3 * h + 2;
  c.fc.writes = 2;

  const double tmacs = double(d.tcn_macs());
  c.tcn.muls = tmacs;
  c.tcn.adds = tmacs + double(d.tcn_c_mid + d.tcn_c_out) + double(d.tcn_c_out);
  c.tcn.activations = double(d.tcn_c_mid + d.tcn_c_out);
  c.tcn.reads = tmacs + double(d.tcn_k1 * d.tcn_c_in) + double(d.tcn_c_mid) +
                double(d.tcn_c_mid + d.tcn_c_out);
  c.tcn.writes = double(d.tcn_c_mid + d.tcn_c_out);
  return c;
}

/// Exact totals over a run of `steps` samples in which phi_fired /
/// h_fired delta elements crossed their thresholds. The hidden encode only
/// runs from the second step on.
inline OpCounts count_forward_ops_total(const ModelDims& d, std::uint64_t steps,
                                        std::uint64_t phi_fired,
                                        std::uint64_t h_fired) {
  const double h = double(d.hidden), f = double(d.input);
  const double t = double(steps), t1 = steps > 0 ? double(steps - 1) : 0.0;
  OpCounts c;

  c.gru_input.muls = 3 * h * double(phi_fired);
  c.gru_input.adds = c.gru_input.muls;
  c.gru_input.reads = c.gru_input.muls;

  c.gru_hidden.muls = 3 * h * double(h_fired);
  c.gru_hidden.adds = c.gru_hidden.muls;
  c.gru_hidden.reads = c.gru_hidden.muls;

  c.encode.adds = f * t + h * t1;
  c.encode.reads = 2 * (f * t + h * t1);
  c.encode.writes = double(phi_fired) + double(h_fired);

  c.gru_state.muls = 3 * h * t;
  c.gru_state.adds = 3 * h * t;
  c.gru_state.activations = 3 * h * t;
  c.gru_state.reads = 5 * h * t;
  c.gru_state.writes = 5 * h * t;

  c.fc.muls = 2 * h * t;
  c.fc.adds = (2 * h + 2) * t;
  c.fc.reads = (3 * h + 2) * t;
  c.fc.writes = 2 * t;

  const double tmacs = double(d.tcn_macs());
  c.tcn.muls = tmacs * t;
  c.tcn.adds = (tmacs + double(d.tcn_c_mid + d.tcn_c_out) + double(d.tcn_c_out)) * t;
  c.tcn.activations = double(d.tcn_c_mid + d.tcn_c_out) * t;
  c.tcn.reads = (tmacs + double(d.tcn_k1 * d.tcn_c_in) + double(d.tcn_c_mid) +
                 double(d.tcn_c_mid + d.tcn_c_out)) *
                t;
  c.tcn.writes = double(d.tcn_c_mid + d.tcn_c_out) * t;
  return c;
}

}  // namespace dpd
