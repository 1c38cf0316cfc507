// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MAVIS_OPTIM_HPP
#define MAVIS_OPTIM_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mavis/nn.hpp"

namespace mavis {

// AdamW with decoupled weight decay. Decay skips parameters flagged
// no_decay (biases, norm affines, positional embeddings, mask tokens).
// First/second moments mirror the target stores so they can be checkpointed
// as ordinary parameter sections.
class AdamW {
 public:
  struct Group {
    std::string name;
    ParamStore* store = nullptr;
    // Per-parameter learning-rate multiplier (layer-wise decay); 1 if unset.
    std::function<double(const Param&)> lr_scale;
  };

  AdamW(std::vector<Group> groups, double beta1, double beta2, double weight_decay,
        double eps = 1e-8);

  void step(double lr);
  int64_t step_count() const { return step_count_; }
  void set_step_count(int64_t c) { step_count_ = c; }

  const std::vector<Group>& groups() const { return groups_; }
  ParamStore& moments_m(size_t group_index) { return *m_[group_index]; }
  ParamStore& moments_v(size_t group_index) { return *v_[group_index]; }

 private:
  std::vector<Group> groups_;
  std::vector<std::unique_ptr<ParamStore>> m_, v_;
  double beta1_, beta2_, weight_decay_, eps_;
  int64_t step_count_ = 0;
};

// Scales gradients so their global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(const std::vector<ParamStore*>& stores, double max_norm);

}  // namespace mavis

#endif  // MAVIS_OPTIM_HPP
