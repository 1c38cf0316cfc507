// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MAVIS_PRETRAIN_SCHEDULES_HPP
#define MAVIS_PRETRAIN_SCHEDULES_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace mavis::pretrain {

// Teacher momentum: tau(k) = 1 - (1 - tau0) * (cos(pi*k/K) + 1) / 2.
// Starts at tau0, rises monotonically on a cosine to exactly 1 at k = K.
inline double tau_schedule(int64_t step, int64_t total_steps, double tau0 = 0.999) {
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("tau_schedule: step out of [0, total_steps]");
  if (total_steps == 0) return 1.0;
  double c = std::cos(M_PI * double(step) / double(total_steps));
  return 1.0 - (1.0 - tau0) * (c + 1.0) / 2.0;
}

// Linear warm-up to the peak, then cosine decay to zero at total_epochs.
struct LRSchedule {
  double peak = 3e-3;
  double warmup_epochs = 40.0;
  double total_epochs = 150.0;
};

inline double lr_at(const LRSchedule& s, double epoch_fraction) {
  if (epoch_fraction < 0.0 || epoch_fraction > s.total_epochs)
    throw std::invalid_argument("lr_at: epoch fraction out of schedule range");
  if (s.warmup_epochs > 0.0 && epoch_fraction < s.warmup_epochs)
    return s.peak * epoch_fraction / s.warmup_epochs;
  if (epoch_fraction <= s.warmup_epochs) return s.peak;
  double span = s.total_epochs - s.warmup_epochs;
  double x = (epoch_fraction - s.warmup_epochs) / span;
  return s.peak * (std::cos(M_PI * x) + 1.0) / 2.0;
}

}  // namespace mavis::pretrain

#endif  // MAVIS_PRETRAIN_SCHEDULES_HPP
