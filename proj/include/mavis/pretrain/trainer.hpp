// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Masked-student / unmasked-teacher pre-training loop. Students and
// predictors take one AdamW step on the negated similarity objective, then
// teachers follow by EMA on the cosine momentum schedule. All per-step
// randomness (shuffling, augmentation, masks) is a pure function of
// (seed, step, clip id), so interrupted runs resume bit-exactly.

#ifndef MAVIS_PRETRAIN_TRAINER_HPP
#define MAVIS_PRETRAIN_TRAINER_HPP

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mavis/corpus/manifest.hpp"
#include "mavis/datapipe.hpp"
#include "mavis/model/models.hpp"
#include "mavis/optim.hpp"
#include "mavis/pretrain/loss.hpp"
#include "mavis/pretrain/schedules.hpp"

namespace mavis::pretrain {

struct MaskConfig {
  double start_prob = 0.2;
  int64_t span = 3;
  int64_t audio_scale = 640;
};

struct PretrainConfig {
  model::EncoderConfig video_encoder = model::video_encoder_desk();
  model::EncoderConfig audio_encoder = model::audio_encoder_desk();
  model::PredictorConfig predictor = model::predictor_desk();
  int64_t epochs = 150;
  int64_t batch_size = 2;
  LRSchedule lr{};  // peak 3e-3, warm-up 40 epochs, decay to zero
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double weight_decay = 0.04;
  double tau0 = 0.999;
  MaskConfig mask{};
  LossSupport loss_support = LossSupport::kAllPositions;
  uint64_t seed = 0;
  int64_t checkpoint_every_steps = 0;  // 0: final checkpoint only
  double split_max_duration_s = 24.0;
};

void to_json(nlohmann::json& j, const PretrainConfig& c);
void from_json(const nlohmann::json& j, PretrainConfig& c);

// Student weights, their EMA teachers, the three predictors
// (audio->video, video->audio, audio->audio) and the step counter.
class PretrainState {
 public:
  explicit PretrainState(const PretrainConfig& cfg);

  ParamStore& student_video_store() { return sv_store_; }
  ParamStore& student_audio_store() { return sa_store_; }
  ParamStore& teacher_video_store() { return tv_store_; }
  ParamStore& teacher_audio_store() { return ta_store_; }
  ParamStore& predictor_store(const std::string& which);  // "a2v" | "v2a" | "a2a"

  const model::VideoEncoder& student_video() const { return *sv_; }
  const model::AudioEncoder& student_audio() const { return *sa_; }
  const model::VideoEncoder& teacher_video() const { return *tv_; }
  const model::AudioEncoder& teacher_audio() const { return *ta_; }
  const model::Predictor& predictor_a2v() const { return *p_a2v_; }
  const model::Predictor& predictor_v2a() const { return *p_v2a_; }
  const model::Predictor& predictor_a2a() const { return *p_a2a_; }

  int64_t step = 0;
  int64_t total_steps = 0;
  double tau0 = 0.999;

 private:
  ParamStore sv_store_, sa_store_, tv_store_, ta_store_;
  ParamStore pav_store_, pva_store_, paa_store_;
  std::optional<model::VideoEncoder> sv_, tv_;
  std::optional<model::AudioEncoder> sa_, ta_;
  std::optional<model::Predictor> p_a2v_, p_v2a_, p_a2a_;
};

// Teacher update xi <- tau*xi + (1-tau)*theta for both modalities.
void ema_update(PretrainState& state, double tau);

struct StepResult {
  LossBreakdown loss;
  double tau = 0.0;
  double lr = 0.0;
};

class PretrainTrainer {
 public:
  explicit PretrainTrainer(const PretrainConfig& cfg);

  PretrainState& state() { return state_; }
  const PretrainConfig& config() const { return cfg_; }
  AdamW& optimizer() { return opt_; }

  // Must be called before step(): defines the lr/tau horizons.
  void set_horizon(int64_t steps_per_epoch, int64_t total_steps);

  // One optimizer step over a batch of preprocessed clips. Aborts with a
  // diagnostic dump of the three terms on a non-finite loss.
  StepResult step(const std::vector<datapipe::LoadedClip>& batch);

  void save(const std::filesystem::path& path) const;
  // Restores weights, optimizer moments and step from a checkpoint written
  // by save(); refuses on config mismatch.
  void restore(const std::filesystem::path& path);

 private:
  PretrainConfig cfg_;
  PretrainState state_;
  AdamW opt_;
  int64_t steps_per_epoch_ = 0;
};

// Executes the configured number of epochs over the manifest, persisting
// checkpoints ("pretrain_step<N>.<config fingerprint>.ckpt"), corpus stats
// and a line-delimited metrics log (step, the three loss terms, total, tau,
// lr). Resumes from the newest compatible checkpoint in out_dir. Returns the
// final checkpoint path.
std::filesystem::path run_pretraining(const PretrainConfig& cfg,
                                      const corpus::CorpusManifest& manifest,
                                      const std::filesystem::path& out_dir);

}  // namespace mavis::pretrain

#endif  // MAVIS_PRETRAIN_TRAINER_HPP
