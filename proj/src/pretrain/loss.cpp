// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/pretrain/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace mavis::pretrain {

double cosine_sim(const Tensor& p, const Tensor& e, double eps) {
  if (p.shape != e.shape || p.ndim() != 2)
    throw std::invalid_argument("cosine_sim: need equal [T,D] shapes");
  int64_t rows = p.dim(0), d = p.dim(1);
  double acc = 0.0;
  for (int64_t i = 0; i < rows; ++i) {
    double pp = 0.0, ee = 0.0, pe = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      double a = p.at2(i, j), b = e.at2(i, j);
      pp += a * a;
      ee += b * b;
      pe += a * b;
    }
    if (eps == 0.0 && (pp == 0.0 || ee == 0.0))
      throw std::invalid_argument("cosine_sim: zero-norm vector without epsilon guard");
    acc += pe / (std::sqrt(pp + eps * eps) * std::sqrt(ee + eps * eps));
  }
  return acc / double(rows);
}

Var cosine_sim_var(Tape& t, Var p, Var e, double eps,
                   const std::optional<std::vector<int64_t>>& rows) {
  const Tensor& P = t.val(p);
  const Tensor& E = t.val(e);
  if (P.shape != E.shape || P.ndim() != 2)
    throw std::invalid_argument("cosine_sim: need equal [T,D] shapes");
  if (eps == 0.0) {
    for (int64_t i = 0; i < P.dim(0); ++i) {
      double pp = 0.0, ee = 0.0;
      for (int64_t j = 0; j < P.dim(1); ++j) {
        pp += P.at2(i, j) * P.at2(i, j);
        ee += E.at2(i, j) * E.at2(i, j);
      }
      if (pp == 0.0 || ee == 0.0)
        throw std::invalid_argument("cosine_sim: zero-norm vector without epsilon guard");
    }
  }
  Var pe = t.rowwise_dot(p, e);
  Var np = t.sqrt_eps(t.rowwise_dot(p, p), eps * eps);
  Var ne = t.sqrt_eps(t.rowwise_dot(e, e), eps * eps);
  Var sim = t.div(pe, t.mul(np, ne));
  if (rows) {
    if (rows->empty())
      throw std::invalid_argument("cosine_sim: masked-only support with an empty mask");
    sim = t.gather(sim, *rows);
  }
  return t.mean(sim);
}

RavenLossVars raven_loss(Tape& t, const LossInputs& in, LossSupport support,
                         const std::vector<int64_t>& video_masked_frames,
                         const std::vector<int64_t>& audio_masked_frames, double eps) {
  if (t.requires_grad(in.e_t_v) || t.requires_grad(in.e_t_a))
    throw std::invalid_argument("raven_loss: teacher encodings must be stop-gradient constants");
  std::optional<std::vector<int64_t>> a_rows, v_rows;
  if (support == LossSupport::kMaskedOnly) {
    a_rows = audio_masked_frames;
    v_rows = video_masked_frames;
  }
  RavenLossVars out;
  out.term_av = cosine_sim_var(t, in.p_a_to_v, in.e_t_v, eps, a_rows);
  out.term_va = cosine_sim_var(t, in.p_v_to_a, in.e_t_a, eps, v_rows);
  out.term_aa = cosine_sim_var(t, in.p_a_to_a, in.e_t_a, eps, a_rows);
  out.total = t.add(t.add(out.term_av, out.term_va), out.term_aa);
  return out;
}

LossBreakdown read_breakdown(const Tape& t, const RavenLossVars& v) {
  LossBreakdown b;
  b.term_av = t.val(v.term_av).data[0];
  b.term_va = t.val(v.term_va).data[0];
  b.term_aa = t.val(v.term_aa).data[0];
  b.total = t.val(v.total).data[0];
  return b;
}

}  // namespace mavis::pretrain
