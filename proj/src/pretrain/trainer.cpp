// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/pretrain/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mavis/model/checkpoint.hpp"

namespace mavis::pretrain {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const PretrainConfig& c) {
  j = nlohmann::json{
      {"video_encoder", c.video_encoder},
      {"audio_encoder", c.audio_encoder},
      {"predictor", c.predictor},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"lr", {{"peak", c.lr.peak}, {"warmup_epochs", c.lr.warmup_epochs},
              {"total_epochs", c.lr.total_epochs}}},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"weight_decay", c.weight_decay},
      {"tau0", c.tau0},
      {"mask", {{"start_prob", c.mask.start_prob}, {"span", c.mask.span},
                {"audio_scale", c.mask.audio_scale}}},
      {"loss_support", c.loss_support == LossSupport::kAllPositions ? "all" : "masked_only"},
      {"seed", c.seed},
      {"checkpoint_every_steps", c.checkpoint_every_steps},
      {"split_max_duration_s", c.split_max_duration_s}};
}

void from_json(const nlohmann::json& j, PretrainConfig& c) {
  j.at("video_encoder").get_to(c.video_encoder);
  j.at("audio_encoder").get_to(c.audio_encoder);
  j.at("predictor").get_to(c.predictor);
  j.at("epochs").get_to(c.epochs);
  j.at("batch_size").get_to(c.batch_size);
  c.lr.peak = j.at("lr").at("peak").get<double>();
  c.lr.warmup_epochs = j.at("lr").at("warmup_epochs").get<double>();
  c.lr.total_epochs = j.at("lr").at("total_epochs").get<double>();
  j.at("adam_beta1").get_to(c.adam_beta1);
  j.at("adam_beta2").get_to(c.adam_beta2);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("tau0").get_to(c.tau0);
  c.mask.start_prob = j.at("mask").at("start_prob").get<double>();
  c.mask.span = j.at("mask").at("span").get<int64_t>();
  c.mask.audio_scale = j.at("mask").at("audio_scale").get<int64_t>();
  c.loss_support = j.at("loss_support").get<std::string>() == "all"
                       ? LossSupport::kAllPositions
                       : LossSupport::kMaskedOnly;
  j.at("seed").get_to(c.seed);
  j.at("checkpoint_every_steps").get_to(c.checkpoint_every_steps);
  j.at("split_max_duration_s").get_to(c.split_max_duration_s);
}

namespace {

model::PredictorConfig predictor_for(const PretrainConfig& cfg, int64_t input_dim,
                                     int64_t target_dim) {
  model::PredictorConfig p = cfg.predictor;
  p.attention_dim = input_dim;  // predictor sits on the student's outputs
  p.target_dim = target_dim;
  return p;
}

}  // namespace

PretrainState::PretrainState(const PretrainConfig& cfg) {
  tau0 = cfg.tau0;
  Rng root(cfg.seed);
  Rng rv = root.child("init/video");
  Rng ra = root.child("init/audio");
  Rng rp1 = root.child("init/pred_a2v");
  Rng rp2 = root.child("init/pred_v2a");
  Rng rp3 = root.child("init/pred_a2a");
  sv_.emplace(sv_store_, cfg.video_encoder, rv);
  sa_.emplace(sa_store_, cfg.audio_encoder, ra);
  int64_t vdim = cfg.video_encoder.attention_dim;
  int64_t adim = cfg.audio_encoder.attention_dim;
  p_a2v_.emplace(pav_store_, predictor_for(cfg, adim, vdim), rp1);
  p_v2a_.emplace(pva_store_, predictor_for(cfg, vdim, adim), rp2);
  p_a2a_.emplace(paa_store_, predictor_for(cfg, adim, adim), rp3);

  // Teachers start as exact copies of their students.
  Rng rt = root.child("init/teachers");
  tv_.emplace(tv_store_, cfg.video_encoder, rt);
  ta_.emplace(ta_store_, cfg.audio_encoder, rt);
  ema_update_store(tv_store_, sv_store_, 0.0);
  ema_update_store(ta_store_, sa_store_, 0.0);
}

ParamStore& PretrainState::predictor_store(const std::string& which) {
  if (which == "a2v") return pav_store_;
  if (which == "v2a") return pva_store_;
  if (which == "a2a") return paa_store_;
  throw std::invalid_argument("predictor_store: unknown predictor " + which);
}

void ema_update(PretrainState& state, double tau) {
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("ema_update: tau must lie in [0, 1]");
  ema_update_store(state.teacher_video_store(), state.student_video_store(), tau);
  ema_update_store(state.teacher_audio_store(), state.student_audio_store(), tau);
}

PretrainTrainer::PretrainTrainer(const PretrainConfig& cfg)
    : cfg_(cfg), state_(cfg),
      opt_({{"student_video", &state_.student_video_store(), nullptr},
            {"student_audio", &state_.student_audio_store(), nullptr},
            {"predictor_a2v", &state_.predictor_store("a2v"), nullptr},
            {"predictor_v2a", &state_.predictor_store("v2a"), nullptr},
            {"predictor_a2a", &state_.predictor_store("a2a"), nullptr}},
           cfg.adam_beta1, cfg.adam_beta2, cfg.weight_decay) {}

void PretrainTrainer::set_horizon(int64_t steps_per_epoch, int64_t total_steps) {
  steps_per_epoch_ = steps_per_epoch;
  state_.total_steps = total_steps;
}

StepResult PretrainTrainer::step(const std::vector<datapipe::LoadedClip>& batch) {
  if (batch.empty()) throw std::invalid_argument("pretrain step: empty batch");
  if (steps_per_epoch_ <= 0 || state_.total_steps <= 0)
    throw std::logic_error("pretrain step: horizon not configured");

  for (const auto& g : opt_.groups()) g.store->zero_grad();
  Rng root(cfg_.seed);
  LossBreakdown acc;
  double inv_b = 1.0 / double(batch.size());

  for (const auto& clip : batch) {
    int64_t T = clip.video.length();
    Rng aug_rng =
        root.child(strfmt("aug/%lld/%s", (long long)state_.step, clip.video.source_id.c_str()));
    datapipe::VideoClip view = datapipe::augment(clip.video, aug_rng);

    Rng vmask_rng =
        root.child(strfmt("vmask/%lld/%s", (long long)state_.step, clip.video.source_id.c_str()));
    datapipe::MaskSpec vmask =
        datapipe::sample_frame_mask(T, cfg_.mask.start_prob, cfg_.mask.span, vmask_rng);
    Rng amask_rng =
        root.child(strfmt("amask/%lld/%s", (long long)state_.step, clip.video.source_id.c_str()));
    datapipe::MaskSpec amask_frames =
        datapipe::sample_frame_mask(T, cfg_.mask.start_prob, cfg_.mask.span, amask_rng);
    datapipe::MaskSpec amask = datapipe::derive_audio_mask(amask_frames, cfg_.mask.audio_scale);

    datapipe::VideoClip masked_video = datapipe::apply_mask(view, vmask);
    datapipe::AudioClip masked_audio = datapipe::apply_mask(clip.audio, amask);

    Tape t;
    // Teachers see the same view, unmasked, with gradients off (sg).
    t.set_grad_enabled(false);
    Var e_v = state_.teacher_video().forward(t, view.frames);
    Var e_a = state_.teacher_audio().forward(t, clip.audio.samples);
    t.set_grad_enabled(true);

    Var h_v = state_.student_video().forward(t, masked_video.frames);
    Var h_a = state_.student_audio().forward(t, masked_audio.samples);
    LossInputs in;
    in.p_a_to_v = state_.predictor_a2v().forward(t, h_a, amask_frames.masked_indices);
    in.p_v_to_a = state_.predictor_v2a().forward(t, h_v, vmask.masked_indices);
    in.p_a_to_a = state_.predictor_a2a().forward(t, h_a, amask_frames.masked_indices);
    in.e_t_v = e_v;
    in.e_t_a = e_a;
    RavenLossVars lv = raven_loss(t, in, cfg_.loss_support, vmask.masked_indices,
                                  amask_frames.masked_indices);
    LossBreakdown b = read_breakdown(t, lv);
    if (!std::isfinite(b.total))
      throw std::runtime_error(
          strfmt("pretrain step %lld: non-finite loss on clip %s "
                 "(term_av=%g term_va=%g term_aa=%g)",
                 (long long)state_.step, clip.video.source_id.c_str(), b.term_av, b.term_va,
                 b.term_aa));
    acc.term_av += b.term_av * inv_b;
    acc.term_va += b.term_va * inv_b;
    acc.term_aa += b.term_aa * inv_b;
    acc.total += b.total * inv_b;

    // objective: minimize the negated similarity sum
    Var objective = t.scale(lv.total, -inv_b);
    t.backward(objective);
  }

  double epoch_fraction = double(state_.step + 1) / double(steps_per_epoch_);
  double lr = lr_at(cfg_.lr, std::min(epoch_fraction, cfg_.lr.total_epochs));
  opt_.step(lr);

  double tau = tau_schedule(state_.step + 1, state_.total_steps, cfg_.tau0);
  ema_update(state_, tau);
  state_.step += 1;
  return {acc, tau, lr};
}

void PretrainTrainer::save(const fs::path& path) const {
  nlohmann::json cfg_json = cfg_;
  nlohmann::json extra;
  extra["step"] = state_.step;
  extra["total_steps"] = state_.total_steps;
  extra["adam_steps"] = opt_.step_count();
  extra["steps_per_epoch"] = steps_per_epoch_;
  std::vector<std::pair<std::string, const ParamStore*>> sections = {
      {"student_video", &const_cast<PretrainState&>(state_).student_video_store()},
      {"student_audio", &const_cast<PretrainState&>(state_).student_audio_store()},
      {"teacher_video", &const_cast<PretrainState&>(state_).teacher_video_store()},
      {"teacher_audio", &const_cast<PretrainState&>(state_).teacher_audio_store()},
      {"predictor_a2v", &const_cast<PretrainState&>(state_).predictor_store("a2v")},
      {"predictor_v2a", &const_cast<PretrainState&>(state_).predictor_store("v2a")},
      {"predictor_a2a", &const_cast<PretrainState&>(state_).predictor_store("a2a")},
  };
  auto& opt = const_cast<AdamW&>(opt_);
  for (size_t i = 0; i < opt.groups().size(); ++i) {
    sections.emplace_back("opt_m." + opt.groups()[i].name, &opt.moments_m(i));
    sections.emplace_back("opt_v." + opt.groups()[i].name, &opt.moments_v(i));
  }
  model::save_checkpoint(path, "pretrain", sections, cfg_json, extra);
}

void PretrainTrainer::restore(const fs::path& path) {
  model::CheckpointData data = model::load_checkpoint(path);
  if (data.kind != "pretrain") throw UserError("not a pretrain checkpoint: " + path.string());
  nlohmann::json cfg_json = cfg_;
  model::require_config_match(data.config, cfg_json, "pretrain config");
  model::apply_section(state_.student_video_store(), data, "student_video");
  model::apply_section(state_.student_audio_store(), data, "student_audio");
  model::apply_section(state_.teacher_video_store(), data, "teacher_video");
  model::apply_section(state_.teacher_audio_store(), data, "teacher_audio");
  model::apply_section(state_.predictor_store("a2v"), data, "predictor_a2v");
  model::apply_section(state_.predictor_store("v2a"), data, "predictor_v2a");
  model::apply_section(state_.predictor_store("a2a"), data, "predictor_a2a");
  for (size_t i = 0; i < opt_.groups().size(); ++i) {
    model::apply_section(opt_.moments_m(i), data, "opt_m." + opt_.groups()[i].name);
    model::apply_section(opt_.moments_v(i), data, "opt_v." + opt_.groups()[i].name);
  }
  state_.step = data.extra.at("step").get<int64_t>();
  state_.total_steps = data.extra.at("total_steps").get<int64_t>();
  opt_.set_step_count(data.extra.at("adam_steps").get<int64_t>());
}

namespace {

fs::path checkpoint_name(const fs::path& out_dir, int64_t step, const std::string& fp) {
  return out_dir / strfmt("pretrain_step%lld.%s.ckpt", (long long)step, fp.c_str());
}

}  // namespace

fs::path run_pretraining(const PretrainConfig& cfg, const corpus::CorpusManifest& manifest,
                         const fs::path& out_dir) {
  if (manifest.empty()) throw UserError("run_pretraining: empty manifest");
  fs::create_directories(out_dir);
  corpus::CorpusManifest data = corpus::split_long_utterances(manifest, cfg.split_max_duration_s);

  fs::path stats_path = out_dir / "corpus.stats.json";
  datapipe::PreprocessStats stats;
  if (fs::exists(stats_path)) {
    stats = datapipe::load_stats(stats_path);
  } else {
    stats = datapipe::compute_corpus_stats(data);
    datapipe::save_stats(stats, stats_path);
  }

  auto n = static_cast<int64_t>(data.records.size());
  int64_t spe = (n + cfg.batch_size - 1) / cfg.batch_size;
  int64_t total_steps = spe * cfg.epochs;

  PretrainTrainer trainer(cfg);
  trainer.set_horizon(spe, total_steps);
  nlohmann::json cfg_json = cfg;
  std::string fp = model::config_fingerprint(cfg_json);

  // Resume from the newest compatible checkpoint, if any.
  int64_t resume_step = -1;
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    long long step_n = -1;
    char fp_buf[64] = {0};
    if (std::sscanf(name.c_str(), "pretrain_step%lld.%32[0-9a-f].ckpt", &step_n, fp_buf) == 2 &&
        fp == fp_buf && step_n > resume_step && step_n <= total_steps)
      resume_step = step_n;
  }
  if (resume_step >= 0) trainer.restore(checkpoint_name(out_dir, resume_step, fp));

  std::ofstream log(out_dir / "pretrain_metrics.jsonl", std::ios::app);
  if (trainer.state().step == 0) {
    nlohmann::json header;
    header["type"] = "header";
    header["config"] = cfg_json;
    header["epochs"] = cfg.epochs;
    header["warmup_epochs"] = cfg.lr.warmup_epochs;
    header["steps_per_epoch"] = spe;
    header["total_steps"] = total_steps;
    log << header.dump() << "\n";
  }

  Rng root(cfg.seed);
  std::vector<size_t> perm(data.records.size());
  int64_t perm_epoch = -1;
  while (trainer.state().step < total_steps) {
    int64_t k = trainer.state().step;
    int64_t epoch = k / spe;
    int64_t b = k % spe;
    if (epoch != perm_epoch) {
      for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      Rng shuffle_rng = root.child(strfmt("shuffle/%lld", (long long)epoch));
      shuffle_rng.shuffle(perm);
      perm_epoch = epoch;
    }
    std::vector<datapipe::LoadedClip> batch;
    for (int64_t i = b * cfg.batch_size; i < std::min(n, (b + 1) * cfg.batch_size); ++i)
      batch.push_back(datapipe::load_record(data.records[perm[static_cast<size_t>(i)]], stats));
    StepResult res = trainer.step(batch);

    nlohmann::json line;
    line["step"] = trainer.state().step;
    line["term_av"] = res.loss.term_av;
    line["term_va"] = res.loss.term_va;
    line["term_aa"] = res.loss.term_aa;
    line["total"] = res.loss.total;
    line["tau"] = res.tau;
    line["lr"] = res.lr;
    log << line.dump() << "\n";

    if (cfg.checkpoint_every_steps > 0 &&
        trainer.state().step % cfg.checkpoint_every_steps == 0 &&
        trainer.state().step < total_steps)
      trainer.save(checkpoint_name(out_dir, trainer.state().step, fp));
  }
  fs::path final_path = checkpoint_name(out_dir, total_steps, fp);
  trainer.save(final_path);
  return final_path;
}

}  // namespace mavis::pretrain
