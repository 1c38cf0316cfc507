// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/optim.hpp"

#include <cmath>

namespace mavis {

AdamW::AdamW(std::vector<Group> groups, double beta1, double beta2, double weight_decay,
             double eps)
    : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay),
      eps_(eps) {
  for (auto& g : groups_) {
    auto m = std::make_unique<ParamStore>(g.store->clone());
    auto v = std::make_unique<ParamStore>(g.store->clone());
    for (auto& p : m->params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    for (auto& p : v->params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    m_.push_back(std::move(m));
    v_.push_back(std::move(v));
  }
}

void AdamW::step(double lr) {
  ++step_count_;
  double bc1 = 1.0 - std::pow(beta1_, double(step_count_));
  double bc2 = 1.0 - std::pow(beta2_, double(step_count_));
  for (size_t gi = 0; gi < groups_.size(); ++gi) {
    auto& group = groups_[gi];
    for (size_t pi = 0; pi < group.store->params().size(); ++pi) {
      Param& p = *group.store->params()[pi];
      if (p.grad.data.empty()) continue;  // never touched by any backward pass
      Tensor& m = m_[gi]->params()[pi]->value;
      Tensor& v = v_[gi]->params()[pi]->value;
      double scale = group.lr_scale ? group.lr_scale(p) : 1.0;
      double plr = lr * scale;
      for (size_t i = 0; i < p.value.data.size(); ++i) {
        double g = p.grad.data[i];
        m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
        v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
        double mhat = m.data[i] / bc1;
        double vhat = v.data[i] / bc2;
        p.value.data[i] -= plr * mhat / (std::sqrt(vhat) + eps_);
        if (!p.no_decay && weight_decay_ != 0.0)
          p.value.data[i] -= plr * weight_decay_ * p.value.data[i];
      }
    }
  }
}

double clip_global_norm(const std::vector<ParamStore*>& stores, double max_norm) {
  double sq = 0.0;
  for (ParamStore* s : stores)
    for (const auto& p : s->params())
      for (double g : p->grad.data) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (ParamStore* s : stores)
      for (auto& p : s->params())
        for (auto& g : p->grad.data) g *= scale;
  }
  return norm;
}

}  // namespace mavis
