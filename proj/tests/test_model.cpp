// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mavis/model/checkpoint.hpp"
#include "mavis/model/models.hpp"

using namespace mavis;
using namespace mavis::model;
namespace fs = std::filesystem;

namespace {

Tensor rand_frames(Rng& rng, int64_t t) {
  Tensor x({t, 88, 88});
  x.fill_normal(rng, 0.0, 1.0);
  return x;
}

Tensor rand_audio(Rng& rng, int64_t n) {
  Tensor x({n});
  x.fill_normal(rng, 0.0, 0.1);
  return x;
}

}  // namespace

TEST_CASE("video encoder shape contract (desk preset)") {
  Rng rng(1);
  ParamStore ps;
  VideoEncoder enc(ps, video_encoder_desk(), rng);
  Tape t;
  Rng drng(2);
  Var y = enc.forward(t, rand_frames(drng, 12));
  CHECK(t.val(y).dim(0) == 12);
  CHECK(t.val(y).dim(1) == 64);

  Tape t1;
  Var y1 = enc.forward(t1, rand_frames(drng, 1));
  CHECK(t1.val(y1).dim(0) == 1);
  CHECK(t1.val(y1).dim(1) == 64);
}

TEST_CASE("video encoder shape contract (paper preset)") {
  Rng rng(3);
  ParamStore ps;
  VideoEncoder enc(ps, video_encoder_paper(), rng);
  CHECK(ps.total_params() > 10'000'000);
  Tape t;
  t.set_grad_enabled(false);
  Rng drng(4);
  Var y = enc.forward(t, rand_frames(drng, 25));
  CHECK(t.val(y).dim(0) == 25);
  CHECK(t.val(y).dim(1) == 512);
  for (double v : t.val(y).data) CHECK(std::isfinite(v));
}

TEST_CASE("audio encoder shape contract and length error") {
  Rng rng(5);
  ParamStore ps;
  AudioEncoder enc(ps, audio_encoder_desk(), rng);
  Rng drng(6);
  Tape t;
  Var y = enc.forward(t, rand_audio(drng, 640 * 12));
  CHECK(t.val(y).dim(0) == 12);
  CHECK(t.val(y).dim(1) == 64);

  Tape t1;
  Var y1 = enc.forward(t1, rand_audio(drng, 640));
  CHECK(t1.val(y1).dim(0) == 1);

  Tape t2;
  CHECK_THROWS(enc.forward(t2, rand_audio(drng, 641)));
}

TEST_CASE("encoder forward is bitwise deterministic") {
  Rng rng(7);
  ParamStore ps;
  VideoEncoder enc(ps, video_encoder_micro(), rng);
  Rng drng(8);
  Tensor x = rand_frames(drng, 3);
  Tape t1, t2;
  Var a = enc.forward(t1, x);
  Var b = enc.forward(t2, x);
  CHECK(t1.val(a).data == t2.val(b).data);
}

TEST_CASE("encoder output depends on frame order (positions active)") {
  Rng rng(9);
  ParamStore ps;
  VideoEncoder enc(ps, video_encoder_micro(), rng);
  Rng drng(10);
  Tensor x = rand_frames(drng, 4);
  Tensor perm = x;
  // swap frames 0 and 2
  for (int64_t i = 0; i < 88 * 88; ++i)
    std::swap(perm.data[i], perm.data[2 * 88 * 88 + i]);
  Tape t1, t2;
  Var a = enc.forward(t1, x);
  Var b = enc.forward(t2, perm);
  double diff = 0.0;
  for (size_t i = 0; i < t1.val(a).data.size(); ++i)
    diff = std::max(diff, std::fabs(t1.val(a).data[i] - t2.val(b).data[i]));
  CHECK(diff > 1e-8);
}

TEST_CASE("predictor: shape, full-mask independence, paper parameter count") {
  Rng rng(11);
  ParamStore ps;
  Predictor pred(ps, predictor_desk(), rng);
  Rng drng(12);
  Tensor seq({6, 64});
  seq.fill_normal(drng, 0.0, 1.0);
  Tape t;
  Var y = pred.forward(t, t.input(seq, false), {1, 3});
  CHECK(t.val(y).dim(0) == 6);
  CHECK(t.val(y).dim(1) == 64);

  // fully masked input: output is a function of mask tokens + positions only
  Tensor other({6, 64});
  other.fill_normal(drng, 0.0, 1.0);
  std::vector<int64_t> all{0, 1, 2, 3, 4, 5};
  Tape t1, t2;
  Var y1 = pred.forward(t1, t1.input(seq, false), all);
  Var y2 = pred.forward(t2, t2.input(other, false), all);
  CHECK(t1.val(y1).data == t2.val(y2).data);

  ParamStore ps_paper;
  Rng rng2(13);
  Predictor paper(ps_paper, predictor_paper(), rng2);
  CHECK(ps_paper.total_params() > 0);
  CHECK(ps_paper.total_params() < 100'000'000);
}

TEST_CASE("decoder: distribution rows normalize; ctc head shapes") {
  Rng rng(14);
  ParamStore ps;
  DecoderConfig cfg = decoder_micro();
  cfg.vocab_size = 5;
  AttentionDecoder dec(ps, cfg, /*memory unprojected dim=*/6, rng);
  ParamStore ps_ctc;
  CtcHead ctc(ps_ctc, 6, 5 + 1, rng);

  Rng drng(15);
  Tensor mem({10, 6});
  mem.fill_normal(drng, 0.0, 1.0);
  Tape t;
  Var memory = dec.project_memory(t, t.input(mem, false));
  Var logits = dec.forward_logits(t, memory, {0, 2, 4});
  CHECK(t.val(logits).dim(0) == 3);
  CHECK(t.val(logits).dim(1) == 5);
  Var probs = t.softmax_rows(logits);
  for (int64_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (int64_t c = 0; c < 5; ++c) s += t.val(probs).at2(r, c);
    CHECK(std::fabs(s - 1.0) <= 1e-6);
  }

  // start-token-only step
  Var one = dec.forward_logits(t, memory, {0});
  CHECK(t.val(one).dim(0) == 1);

  // CTC head: 10-step memory, vocab 5 -> 10x6 log-probabilities
  Var lp = ctc.forward_log_probs(t, t.input(mem, false));
  CHECK(t.val(lp).dim(0) == 10);
  CHECK(t.val(lp).dim(1) == 6);
  for (int64_t r = 0; r < 10; ++r) {
    double s = 0.0;
    for (int64_t c = 0; c < 6; ++c) s += std::exp(t.val(lp).at2(r, c));
    CHECK(std::fabs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("clone_as_teacher copy semantics") {
  Rng rng(16);
  ParamStore ps;
  VideoEncoder enc(ps, video_encoder_micro(), rng);
  ParamStore teacher = clone_as_teacher(ps);
  CHECK(teacher.names() == ps.names());
  CHECK(teacher.max_param_distance(ps) == 0.0);

  // perturb the student; the teacher must not move
  ps.params()[0]->value.data[0] += 1.0;
  CHECK(teacher.max_param_distance(ps) == 1.0);

  ParamStore teacher2 = clone_as_teacher(teacher);
  CHECK(teacher2.max_param_distance(teacher) == 0.0);
}

TEST_CASE("checkpoint round-trip and mismatch refusal") {
  Rng rng(17);
  ParamStore ps;
  VideoEncoder enc(ps, video_encoder_micro(), rng);
  nlohmann::json cfg = video_encoder_micro();
  fs::path dir = fs::temp_directory_path() / "mavis-test-ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path file = dir / "model.ckpt";
  save_checkpoint(file, "pretrain", {{"student_video", &ps}}, cfg, {{"step", 3}});

  CheckpointData data = load_checkpoint(file);
  CHECK(data.kind == "pretrain");
  CHECK(data.extra.at("step") == 3);
  require_config_match(data.config, cfg, "encoder");

  // load into a fresh structurally-identical store
  Rng rng2(99);
  ParamStore ps2;
  VideoEncoder enc2(ps2, video_encoder_micro(), rng2);
  CHECK(ps2.max_param_distance(ps) > 0.0);
  apply_section(ps2, data, "student_video");
  CHECK(ps2.max_param_distance(ps) == 0.0);

  // config mismatch is refused
  nlohmann::json other_cfg = video_encoder_desk();
  CHECK_THROWS_AS(require_config_match(data.config, other_cfg, "encoder"), UserError);

  // structural mismatch is refused
  Rng rng3(5);
  ParamStore ps3;
  VideoEncoder enc3(ps3, video_encoder_desk(), rng3);
  CHECK_THROWS_AS(apply_section(ps3, data, "student_video"), UserError);
  // missing section is refused
  CHECK_THROWS_AS(apply_section(ps2, data, "student_audio"), UserError);
}

TEST_CASE("config fingerprints differ across configs") {
  nlohmann::json a = video_encoder_micro();
  nlohmann::json b = video_encoder_desk();
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 8);
}

TEST_CASE("conv-augmented encoder variant builds and runs") {
  Rng rng(21);
  EncoderConfig cfg = audio_encoder_micro();
  cfg.conv_augmented = true;
  ParamStore ps;
  AudioEncoder enc(ps, cfg, rng);
  Rng drng(22);
  Tape t;
  Var y = enc.forward(t, rand_audio(drng, 640 * 3));
  CHECK(t.val(y).dim(0) == 3);
}
