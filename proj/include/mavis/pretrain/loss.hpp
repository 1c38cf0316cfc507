// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pre-training objective: summed cosine similarities between student
// predictions and stop-gradient teacher targets,
//   sim(p_a->v, sg(e_v)) + sim(p_v->a, sg(e_a)) + sim(p_a->a, sg(e_a)),
// maximized by minimizing its negation.

#ifndef MAVIS_PRETRAIN_LOSS_HPP
#define MAVIS_PRETRAIN_LOSS_HPP

#include <optional>
#include <vector>

#include "mavis/autograd.hpp"

namespace mavis::pretrain {

// Mean over positions of <p_t,e_t>/(|p_t||e_t|) on plain tensors. With
// eps = 0 a zero-norm vector on either side is an error; with eps > 0 norms
// are smoothed as sqrt(|x|^2 + eps^2).
double cosine_sim(const Tensor& p, const Tensor& e, double eps = 1e-8);

// Differentiable version; `rows` restricts the positional average (the
// masked-only loss support), empty optional means all positions.
Var cosine_sim_var(Tape& t, Var p, Var e, double eps = 1e-8,
                   const std::optional<std::vector<int64_t>>& rows = std::nullopt);

enum class LossSupport { kAllPositions, kMaskedOnly };

struct LossBreakdown {
  double term_av = 0.0;  // audio student -> video targets
  double term_va = 0.0;  // video student -> audio targets
  double term_aa = 0.0;  // audio student -> audio targets
  double total = 0.0;
};

struct RavenLossVars {
  Var term_av = kNoVar;
  Var term_va = kNoVar;
  Var term_aa = kNoVar;
  Var total = kNoVar;
};

struct LossInputs {
  Var p_a_to_v = kNoVar;  // audio-student prediction of video targets
  Var p_v_to_a = kNoVar;  // video-student prediction of audio targets
  Var p_a_to_a = kNoVar;  // audio-student prediction of audio targets
  Var e_t_v = kNoVar;     // teacher video encodings (constants on the tape)
  Var e_t_a = kNoVar;     // teacher audio encodings (constants on the tape)
};

// Builds the three terms and their sum. Teacher encodings must be gradient
// detached (constants); the training objective is the negated total. With
// masked-only support each term averages over the PREDICTING student's
// masked frame positions.
RavenLossVars raven_loss(Tape& t, const LossInputs& in, LossSupport support,
                         const std::vector<int64_t>& video_masked_frames,
                         const std::vector<int64_t>& audio_masked_frames, double eps = 1e-8);

LossBreakdown read_breakdown(const Tape& t, const RavenLossVars& v);

}  // namespace mavis::pretrain

#endif  // MAVIS_PRETRAIN_LOSS_HPP
