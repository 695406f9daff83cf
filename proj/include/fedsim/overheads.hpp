#pragma once

#include <cmath>

namespace fedsim {

// The four system overheads: computation time, transmission time,
// computation load, transmission load. Dimensionless proxies (FLOPs and
// parameter counts), usable both per-round and as cumulative totals.
struct Overheads {
  double comp_time = 0;
  double trans_time = 0;
  double comp_load = 0;
  double trans_load = 0;

  Overheads& operator+=(const Overheads& o) {
    comp_time += o.comp_time;
    trans_time += o.trans_time;
    comp_load += o.comp_load;
    trans_load += o.trans_load;
    return *this;
  }

  Overheads operator/(double x) const {
    return {comp_time / x, trans_time / x, comp_load / x, trans_load / x};
  }

  bool all_finite() const {
    return std::isfinite(comp_time) && std::isfinite(trans_time) &&
           std::isfinite(comp_load) && std::isfinite(trans_load);
  }

  bool all_positive() const {
    return comp_time > 0 && trans_time > 0 && comp_load > 0 && trans_load > 0;
  }
};

}  // namespace fedsim
