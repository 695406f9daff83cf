#pragma once

#include <algorithm>
#include <span>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/flcore.hpp"
#include "fedsim/model.hpp"
#include "fedsim/overheads.hpp"

namespace fedsim {

// C1/C3: FLOPs per input (time and load proxies); C2/C4: parameter count
// (one model download + upload per participant).
struct CostConstants {
  double c1 = 1;
  double c2 = 1;
  double c3 = 1;
  double c4 = 1;

  static CostConstants from_descriptor(const ModelDescriptor& d) {
    return {d.flops_per_input, d.num_params, d.flops_per_input, d.num_params};
  }

  void validate() const {
    if (!(c1 > 0 && c2 > 0 && c3 > 0 && c4 > 0))
      throw ConfigError("cost constants must all be > 0");
  }
};

// The slowest participant bounds the round's computation time.
inline double round_comp_time(double c1, double passes,
                              std::span<const long long> selected_nk) {
  if (selected_nk.empty())
    throw AccountingFault("computation time of a round with no participants");
  long long max_nk = *std::max_element(selected_nk.begin(), selected_nk.end());
  return c1 * passes * static_cast<double>(max_nk);
}

// One download plus one upload per participant, all in parallel: a round's
// transmission time is constant and independent of M.
inline double round_trans_time(double c2) { return c2; }

inline double round_comp_load(double c3, double passes,
                              std::span<const long long> selected_nk) {
  if (selected_nk.empty())
    throw AccountingFault("computation load of a round with no participants");
  long long sum = 0;
  for (long long nk : selected_nk) sum += nk;
  return c3 * passes * static_cast<double>(sum);
}

inline double round_trans_load(double c4, int participants) {
  if (participants < 1)
    throw AccountingFault("transmission load of a round with no participants");
  return c4 * static_cast<double>(participants);
}

inline Overheads price_round(const CostConstants& c, double passes,
                             std::span<const long long> selected_nk,
                             int participants) {
  return {round_comp_time(c.c1, passes, selected_nk), round_trans_time(c.c2),
          round_comp_load(c.c3, passes, selected_nk),
          round_trans_load(c.c4, participants)};
}

// Cumulative overheads plus the number of rounds accrued so far.
struct OverheadLedger {
  Overheads total;
  int rounds = 0;
};

inline OverheadLedger accrue(OverheadLedger ledger, const RoundRecord& record) {
  const Overheads& o = record.round_overheads;
  if (o.comp_time < 0 || o.trans_time < 0 || o.comp_load < 0 || o.trans_load < 0)
    throw AccountingFault("negative per-round overhead");
  ledger.total += o;
  ledger.rounds += 1;
  return ledger;
}

}  // namespace fedsim
