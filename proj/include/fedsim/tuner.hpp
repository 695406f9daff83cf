#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "fedsim/errors.hpp"
#include "fedsim/flcore.hpp"
#include "fedsim/overheads.hpp"

namespace fedsim {

// Application weights over (CompT, TransT, CompL, TransL); must sum to 1.
struct Preference {
  double comp_time = 0;
  double trans_time = 0;
  double comp_load = 0;
  double trans_load = 0;

  void validate() const {
    for (double w : {comp_time, trans_time, comp_load, trans_load})
      if (!(w >= 0.0 && w <= 1.0))
        throw ConfigError("preference weights must lie in [0,1]");
    double sum = comp_time + trans_time + comp_load + trans_load;
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("preference weights must sum to 1");
  }
};

// Weighted relative overhead change between two hyper-parameter sets.
// Negative means s2 is better.
inline double compare_overheads(const Overheads& s1, const Overheads& s2,
                                const Preference& pref) {
  if (!s1.all_positive())
    throw ComparisonFault("comparison baseline overheads must be strictly positive");
  return pref.comp_time * (s2.comp_time - s1.comp_time) / s1.comp_time +
         pref.trans_time * (s2.trans_time - s1.trans_time) / s1.trans_time +
         pref.comp_load * (s2.comp_load - s1.comp_load) / s1.comp_load +
         pref.trans_load * (s2.trans_load - s1.trans_load) / s1.trans_load;
}

// Baseline-vs-tuned score as a percentage; positive = overhead reduction.
inline double overall_improvement_percent(const Overheads& baseline,
                                          const Overheads& tuned,
                                          const Preference& pref) {
  return -compare_overheads(baseline, tuned, pref) * 100.0;
}

// Per-overhead linear-extrapolation coefficients: one set for participant
// moves (eta), one for pass moves (zeta). All start at 1.
struct SlopeSet {
  double comp_time = 1.0;
  double trans_time = 1.0;
  double comp_load = 1.0;
  double trans_load = 1.0;
};

namespace detail {

inline double slope_term(double weight, double slope, double cur, double prv) {
  if (cur == 0) throw TunerFault("zero current overhead in decision estimate");
  return weight * slope * std::abs(cur - prv) / cur;
}

}  // namespace detail

// Estimated objective derivative w.r.t. the participant count. CompT and
// TransT favor more participants, CompL and TransL favor fewer.
inline double delta_participants(const Overheads& cur, const Overheads& prv,
                                 const SlopeSet& eta, const Preference& pref) {
  return detail::slope_term(pref.comp_time, eta.comp_time, cur.comp_time, prv.comp_time) +
         detail::slope_term(pref.trans_time, eta.trans_time, cur.trans_time, prv.trans_time) -
         detail::slope_term(pref.comp_load, eta.comp_load, cur.comp_load, prv.comp_load) -
         detail::slope_term(pref.trans_load, eta.trans_load, cur.trans_load, prv.trans_load);
}

// Same for the pass count. TransT and TransL favor more passes, CompT and
// CompL favor fewer.
inline double delta_passes(const Overheads& cur, const Overheads& prv,
                           const SlopeSet& zeta, const Preference& pref) {
  return -detail::slope_term(pref.comp_time, zeta.comp_time, cur.comp_time, prv.comp_time) +
         detail::slope_term(pref.trans_time, zeta.trans_time, cur.trans_time, prv.trans_time) -
         detail::slope_term(pref.comp_load, zeta.comp_load, cur.comp_load, prv.comp_load) +
         detail::slope_term(pref.trans_load, zeta.trans_load, cur.trans_load, prv.trans_load);
}

struct TunerOptions {
  Preference preference;
  double min_gain = 0.01;    // activation threshold on accuracy improvement
  double penalty = 10.0;     // multiplier for slopes opposing a bad decision
  int min_participants = 1;
  int max_participants = 1;
  int min_passes = 1;
  int max_passes = 50;

  void validate() const {
    preference.validate();
    if (!(min_gain > 0)) throw ConfigError("tuner.min_gain must be > 0");
    if (!(penalty >= 1)) throw ConfigError("tuner.penalty must be >= 1");
    if (max_participants < min_participants || min_participants < 1)
      throw ConfigError("tuner participant bounds invalid");
    if (max_passes < min_passes || min_passes < 1)
      throw ConfigError("tuner pass bounds invalid");
  }
};

// Accuracy level plus the interval overheads normalized by the accuracy
// gained in that interval.
struct IntervalSnapshot {
  double accuracy = 0;
  Overheads per_gain;
};

struct TunerDecision {
  double delta_m = 0;
  double delta_e = 0;
  double comparison = 0;  // I(S_prv, S_cur); positive = the last move was bad
  SlopeSet eta;
  SlopeSet zeta;
  HyperParams next;
};

// Online controller for (M, E). Feed it every round's accrued overheads and
// the post-round accuracy; it emits a new hyper-parameter pair whenever the
// accuracy has improved by more than min_gain since the last decision point.
class FedTune {
 public:
  FedTune(const TunerOptions& opts, HyperParams initial)
      : opts_(opts), prev_hp_(initial), cur_hp_(initial) {
    opts_.validate();
    if (initial.participants < opts_.min_participants ||
        initial.participants > opts_.max_participants)
      throw ConfigError("initial participants outside tuner bounds");
    double e = initial.passes;
    if (!(e >= opts_.min_passes && e <= opts_.max_passes) || e != std::floor(e))
      throw ConfigError("tuned passes must be an integer within tuner bounds");
  }

  std::optional<TunerDecision> step(double accuracy, const Overheads& round_overheads) {
    interval_ += round_overheads;
    double gain = accuracy - prev_accuracy_;
    if (!(gain > opts_.min_gain)) return std::nullopt;

    Overheads cur = interval_ / gain;
    if (!cur.all_finite())
      throw TunerFault("non-finite normalized interval overheads");

    if (!prv_) {
      // First activation: no earlier interval to compare against, so just
      // record the snapshot and keep the current hyper-parameters.
      prv_ = IntervalSnapshot{accuracy, cur};
      prev_accuracy_ = accuracy;
      prev_hp_ = cur_hp_;
      interval_ = {};
      return std::nullopt;
    }

    const Overheads& prv = prv_->per_gain;
    double cmp = compare_overheads(prv, cur, opts_.preference);

    // Refresh the slopes that favor the last move's direction; a bad move
    // (cmp > 0) additionally penalizes the slopes that opposed it.
    bool m_grew = cur_hp_.participants > prev_hp_.participants;
    if (m_grew) {
      if (prvprv_) {
        eta_.comp_time = refreshed_slope(cur.comp_time, prv.comp_time,
                                         prvprv_->per_gain.comp_time);
        eta_.trans_time = refreshed_slope(cur.trans_time, prv.trans_time,
                                          prvprv_->per_gain.trans_time);
      }
      if (cmp > 0) {
        eta_.comp_load *= opts_.penalty;
        eta_.trans_load *= opts_.penalty;
      }
    } else {
      if (prvprv_) {
        eta_.comp_load = refreshed_slope(cur.comp_load, prv.comp_load,
                                         prvprv_->per_gain.comp_load);
        eta_.trans_load = refreshed_slope(cur.trans_load, prv.trans_load,
                                          prvprv_->per_gain.trans_load);
      }
      if (cmp > 0) {
        eta_.comp_time *= opts_.penalty;
        eta_.trans_time *= opts_.penalty;
      }
    }
    bool e_grew = cur_hp_.passes > prev_hp_.passes;
    if (e_grew) {
      if (prvprv_) {
        zeta_.trans_time = refreshed_slope(cur.trans_time, prv.trans_time,
                                           prvprv_->per_gain.trans_time);
        zeta_.trans_load = refreshed_slope(cur.trans_load, prv.trans_load,
                                           prvprv_->per_gain.trans_load);
      }
      if (cmp > 0) {
        zeta_.comp_time *= opts_.penalty;
        zeta_.comp_load *= opts_.penalty;
      }
    } else {
      if (prvprv_) {
        zeta_.comp_time = refreshed_slope(cur.comp_time, prv.comp_time,
                                          prvprv_->per_gain.comp_time);
        zeta_.comp_load = refreshed_slope(cur.comp_load, prv.comp_load,
                                          prvprv_->per_gain.comp_load);
      }
      if (cmp > 0) {
        zeta_.trans_time *= opts_.penalty;
        zeta_.trans_load *= opts_.penalty;
      }
    }

    TunerDecision d;
    d.delta_m = delta_participants(cur, prv, eta_, opts_.preference);
    d.delta_e = delta_passes(cur, prv, zeta_, opts_.preference);
    d.comparison = cmp;
    d.eta = eta_;
    d.zeta = zeta_;
    d.next.participants =
        std::clamp(cur_hp_.participants + (d.delta_m > 0 ? 1 : -1),
                   opts_.min_participants, opts_.max_participants);
    d.next.passes =
        std::clamp(cur_hp_.passes + (d.delta_e > 0 ? 1.0 : -1.0),
                   static_cast<double>(opts_.min_passes),
                   static_cast<double>(opts_.max_passes));

    prvprv_ = prv_;
    prv_ = IntervalSnapshot{accuracy, cur};
    prev_accuracy_ = accuracy;
    prev_hp_ = cur_hp_;
    cur_hp_ = d.next;
    interval_ = {};
    return d;
  }

  const HyperParams& current() const { return cur_hp_; }
  const HyperParams& previous() const { return prev_hp_; }
  const SlopeSet& eta() const { return eta_; }
  const SlopeSet& zeta() const { return zeta_; }
  const std::optional<IntervalSnapshot>& last_snapshot() const { return prv_; }

  // Test hooks: place the controller in a mid-run state directly.
  void set_snapshots(std::optional<IntervalSnapshot> prv,
                     std::optional<IntervalSnapshot> prvprv, double prev_accuracy) {
    prv_ = std::move(prv);
    prvprv_ = std::move(prvprv);
    prev_accuracy_ = prev_accuracy;
  }
  void set_hyper(HyperParams prev, HyperParams cur) {
    prev_hp_ = prev;
    cur_hp_ = cur;
  }
  void set_slopes(SlopeSet eta, SlopeSet zeta) {
    eta_ = eta;
    zeta_ = zeta;
  }

 private:
  // Slope refresh: ratio of the latest overhead change to the one before,
  // clamped so a near-zero denominator cannot blow up the slope.
  static double refreshed_slope(double cur, double prv, double prvprv) {
    double num = std::abs(cur - prv);
    double den = std::abs(prv - prvprv);
    double ratio = den == 0 ? kSlopeMax : num / den;
    return std::clamp(ratio, kSlopeMin, kSlopeMax);
  }

  static constexpr double kSlopeMin = 1e-3;
  static constexpr double kSlopeMax = 1e3;

  TunerOptions opts_;
  HyperParams prev_hp_;
  HyperParams cur_hp_;
  SlopeSet eta_;   // d/dM
  SlopeSet zeta_;  // d/dE
  std::optional<IntervalSnapshot> prv_;
  std::optional<IntervalSnapshot> prvprv_;
  Overheads interval_;
  double prev_accuracy_ = 0;
};

}  // namespace fedsim
