// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Loss construction against hand formulas, the optimizer, the learning-rate
// schedule, and gradient clipping.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "evidr/model.hpp"
#include "evidr/synth.hpp"
#include "evidr/training.hpp"

using namespace evidr;
using Ten = Tensor<double>;

namespace {

/// Hand-built forward pass: Lq=2, Lp=4 layout with uniform head rows, so
/// every marginal has a closed form.
struct LossRig {
  Tape<double> tape;
  ForwardPass<double> fp;
  PreparedInstance prep;

  LossRig() {
    EncodedSequence& enc = fp.enc;
    enc.Lq = 2;
    enc.Lp = 4;
    enc.L = 9;
    enc.cls_row = 0;
    enc.q_begin = 1;
    enc.q_end = 3;
    enc.sep_row = 3;
    enc.p_begin = 4;
    enc.p_end = 8;
    enc.end_row = 8;

    auto uniform_row = [&](int lo, int hi) {
      Ten t(1, enc.L);
      for (int i = lo; i < hi; ++i) t.at(0, i) = 1.0 / (hi - lo);
      return tape.leaf(std::move(t));
    };
    fp.heads.p_start = uniform_row(enc.p_begin, enc.p_end);
    fp.heads.p_end = uniform_row(enc.p_begin, enc.p_end);
    fp.heads.q_start = uniform_row(enc.q_begin, enc.q_end);
    fp.heads.q_end = uniform_row(enc.q_begin, enc.q_end);

    Ten type(1, kNumAnswerTypes);
    for (int k = 0; k < kNumAnswerTypes; ++k) type.at(0, k) = 0.2;
    fp.heads.type_probs = tape.leaf(std::move(type));

    Ten count(1, 10);
    for (int k = 0; k < 10; ++k) count.at(0, k) = 0.1;
    fp.heads.count_probs = tape.leaf(std::move(count));

    Ten bio(enc.L, 3);
    for (auto& v : bio.data) v = 1.0 / 3.0;
    fp.heads.bio_probs = tape.leaf(std::move(bio));

    fp.number_rows = {enc.passage_row(0), enc.passage_row(2)};
    Ten sign(2, 3);
    for (auto& v : sign.data) v = 1.0 / 3.0;
    fp.heads.sign_probs = tape.leaf(std::move(sign));
  }
};

}  // namespace

TEST_CASE("binary cross entropy against hand values") {
  Tape<double> tape;
  SECTION("maximum uncertainty costs ln 2") {
    int probs = tape.leaf(Ten(2, 1, {0.5, 0.5}));
    int loss = detail::bce_loss(tape, probs, {1, 0});
    CHECK(tape.value(loss).data[0] == Catch::Approx(std::log(2.0)));
  }
  SECTION("mixed labels average the two terms") {
    int probs = tape.leaf(Ten(2, 1, {0.9, 0.2}));
    int loss = detail::bce_loss(tape, probs, {1, 0});
    double expect = -(std::log(0.9) + std::log(0.8)) / 2.0;
    CHECK(tape.value(loss).data[0] == Catch::Approx(expect));
  }
  SECTION("confident hits cost almost nothing") {
    int probs = tape.leaf(Ten(1, 1, {0.9999}));
    int loss = detail::bce_loss(tape, probs, {1});
    CHECK(tape.value(loss).data[0] < 1e-3);
  }
}

TEST_CASE("span marginal sums every gold occurrence") {
  LossRig rig;
  rig.prep.ann.trainable = true;
  rig.prep.ann.feasible = {AnswerType::PassageSpan};
  rig.prep.ann.passage_spans = {{0, 0}, {2, 2}};
  TrainConfig cfg;

  LossIds<double> two = build_loss(rig.tape, rig.fp, rig.prep, cfg);
  REQUIRE(two.answer >= 0);
  // p(ans|span) = 2 * (1/4)^2; joint with p(type)=0.2.
  double expect_two = -std::log(0.2 * 2.0 / 16.0);
  CHECK(rig.tape.value(two.answer).data[0] == Catch::Approx(expect_two));

  LossRig rig1;
  rig1.prep.ann.trainable = true;
  rig1.prep.ann.feasible = {AnswerType::PassageSpan};
  rig1.prep.ann.passage_spans = {{0, 0}};
  LossIds<double> one = build_loss(rig1.tape, rig1.fp, rig1.prep, cfg);
  double gap = rig1.tape.value(one.answer).data[0] - rig.tape.value(two.answer).data[0];
  CHECK(gap == Catch::Approx(std::log(2.0)));  // second occurrence halves the NLL
}

TEST_CASE("arithmetic marginal sums every valid sign assignment") {
  LossRig rig;
  rig.prep.ann.trainable = true;
  rig.prep.ann.feasible = {AnswerType::Arithmetic};
  rig.prep.ann.expressions.assignments = {{{1, -1}}, {{-1, 1}}};
  TrainConfig cfg;
  LossIds<double> loss = build_loss(rig.tape, rig.fp, rig.prep, cfg);
  REQUIRE(loss.answer >= 0);
  // Each assignment scores (1/3)^2 over two numbers; two assignments sum.
  double expect = -std::log(0.2 * 2.0 / 9.0);
  CHECK(rig.tape.value(loss.answer).data[0] == Catch::Approx(expect));
}

TEST_CASE("count and multi-span log-likelihoods have closed forms") {
  LossRig rig;
  rig.prep.ann.trainable = true;
  rig.prep.ann.feasible = {AnswerType::Count};
  rig.prep.ann.count_label = 7;
  TrainConfig cfg;
  LossIds<double> loss = build_loss(rig.tape, rig.fp, rig.prep, cfg);
  CHECK(rig.tape.value(loss.answer).data[0] == Catch::Approx(-std::log(0.2 * 0.1)));

  LossRig rig2;
  rig2.prep.ann.trainable = true;
  rig2.prep.ann.feasible = {AnswerType::MultiSpan};
  rig2.prep.ann.bio_tags = {1, 0, 1, 0};
  LossIds<double> loss2 = build_loss(rig2.tape, rig2.fp, rig2.prep, cfg);
  // Four passage tokens, each uniform over three tags.
  CHECK(rig2.tape.value(loss2.answer).data[0] ==
        Catch::Approx(-(std::log(0.2) + 4.0 * std::log(1.0 / 3.0))));
}

TEST_CASE("feasible types compete inside one marginal") {
  LossRig rig;
  rig.prep.ann.trainable = true;
  rig.prep.ann.feasible = {AnswerType::PassageSpan, AnswerType::Count};
  rig.prep.ann.passage_spans = {{1, 1}};
  rig.prep.ann.count_label = 3;
  TrainConfig cfg;
  LossIds<double> loss = build_loss(rig.tape, rig.fp, rig.prep, cfg);
  double expect = -std::log(0.2 / 16.0 + 0.2 * 0.1);
  CHECK(rig.tape.value(loss.answer).data[0] == Catch::Approx(expect));
}

TEST_CASE("total stacks answer and weighted evidence terms") {
  LossRig rig;
  rig.prep.ann.trainable = true;
  rig.prep.ann.feasible = {AnswerType::Count};
  rig.prep.ann.count_label = 2;
  rig.prep.labels.sentence_labels = {1};
  rig.prep.labels.clause_labels = {1, 0};
  rig.fp.scores.p_sentence = rig.tape.leaf(Ten(1, 1, {0.7}));
  rig.fp.scores.p_clause = rig.tape.leaf(Ten(2, 1, {0.6, 0.3}));
  TrainConfig cfg;
  cfg.lambda_sentence = 0.2;
  cfg.lambda_clause = 0.4;

  LossIds<double> loss = build_loss(rig.tape, rig.fp, rig.prep, cfg);
  REQUIRE(loss.total >= 0);
  REQUIRE(loss.evi_sentence >= 0);
  double answer = rig.tape.value(loss.answer).data[0];
  double s = rig.tape.value(loss.evi_sentence).data[0];
  double c = rig.tape.value(loss.evi_clause).data[0];
  CHECK(s == Catch::Approx(-std::log(0.7)));
  CHECK(c == Catch::Approx(-(std::log(0.6) + std::log(0.7)) / 2.0));
  CHECK(rig.tape.value(loss.total).data[0] == Catch::Approx(answer + 0.2 * s + 0.4 * c));
}

TEST_CASE("untrainable instances keep only the evidence terms") {
  LossRig rig;
  rig.prep.ann.trainable = false;
  rig.prep.labels.sentence_labels = {0};
  rig.prep.labels.clause_labels = {0, 1};
  rig.fp.scores.p_sentence = rig.tape.leaf(Ten(1, 1, {0.2}));
  rig.fp.scores.p_clause = rig.tape.leaf(Ten(2, 1, {0.1, 0.8}));
  TrainConfig cfg;
  LossIds<double> loss = build_loss(rig.tape, rig.fp, rig.prep, cfg);
  CHECK(loss.answer == -1);
  REQUIRE(loss.total >= 0);
  double s = rig.tape.value(loss.evi_sentence).data[0];
  double c = rig.tape.value(loss.evi_clause).data[0];
  CHECK(rig.tape.value(loss.total).data[0] ==
        Catch::Approx(cfg.lambda_sentence * s + cfg.lambda_clause * c));
}

TEST_CASE("learning rate warms up linearly then decays by cosine") {
  CHECK(lr_scale(0, 100, 0.06) == 0.0);
  CHECK(lr_scale(3, 100, 0.06) == Catch::Approx(0.5));
  CHECK(lr_scale(6, 100, 0.06) == Catch::Approx(1.0));
  CHECK(lr_scale(53, 100, 0.06) == Catch::Approx(0.5));   // cosine midpoint
  CHECK(lr_scale(100, 100, 0.06) == Catch::Approx(0.0).margin(1e-12));
  CHECK(lr_scale(5, 5, 1.0) == 1.0);  // warmup swallows the whole schedule
  CHECK(lr_scale(0, 1, 0.0) == 0.0);  // warm is at least one step
}

TEST_CASE("gradient clipping rescales to the threshold") {
  ParameterStore<double> s;
  s.add("w", 1, 2, InitKind::Zero);
  s.grad("w") = Ten(1, 2, {3.0, 4.0});
  double norm = clip_gradients(s, 1.0);
  CHECK(norm == Catch::Approx(5.0));  // returns the pre-clip norm
  CHECK(s.grad("w").at(0, 0) == Catch::Approx(0.6));
  CHECK(s.grad("w").at(0, 1) == Catch::Approx(0.8));

  s.grad("w") = Ten(1, 2, {3.0, 4.0});
  clip_gradients(s, 10.0);
  CHECK(s.grad("w").at(0, 0) == 3.0);  // under the threshold: untouched

  s.grad("w") = Ten(1, 2, {3.0, 4.0});
  clip_gradients(s, 0.0);
  CHECK(s.grad("w").at(0, 0) == 3.0);  // zero disables clipping
}

TEST_CASE("optimizer at zero learning rate never moves parameters") {
  ParameterStore<double> s;
  s.rng_seed = 5;
  s.add("encoder.w", 2, 2, InitKind::Xavier);
  s.add("heads.w", 2, 2, InitKind::Xavier);
  auto before_enc = s.get("encoder.w").data;
  auto before_heads = s.get("heads.w").data;
  s.grad("encoder.w") = Ten(2, 2, {1.0, 1.0, 1.0, 1.0});
  s.grad("heads.w") = Ten(2, 2, {1.0, 1.0, 1.0, 1.0});
  AdamW<double> opt;
  opt.step(s, 0.0, 0.0, 0.5);
  CHECK(s.get("encoder.w").data == before_enc);
  CHECK(s.get("heads.w").data == before_heads);
}

TEST_CASE("optimizer routes learning rates by parameter prefix") {
  ParameterStore<double> s;
  s.rng_seed = 5;
  s.add("encoder.w", 1, 1, InitKind::One);
  s.add("heads.w", 1, 1, InitKind::One);
  s.grad("encoder.w") = Ten(1, 1, {1.0});
  s.grad("heads.w") = Ten(1, 1, {1.0});
  AdamW<double> opt;
  opt.step(s, 0.0, 0.1, 0.0);
  CHECK(s.get("encoder.w").at(0, 0) == 1.0);
  // First step: m-hat = v-hat = 1, update = 1/(1 + eps) so nearly lr.
  CHECK(s.get("heads.w").at(0, 0) == Catch::Approx(0.9).margin(1e-6));
}

TEST_CASE("decoupled weight decay shrinks parameters without gradients") {
  ParameterStore<double> s;
  s.add("heads.w", 1, 1, InitKind::One);
  s.grad("heads.w");  // zero gradient
  AdamW<double> opt;
  opt.step(s, 0.0, 0.2, 0.1);
  CHECK(s.get("heads.w").at(0, 0) == Catch::Approx(1.0 - 0.2 * 0.1));
}

TEST_CASE("training rejects impossible configurations") {
  auto [train, dev] = synthesize_splits(61, 6, 3);
  TrainConfig cfg;
  cfg.hidden_size = 8;
  cfg.max_seq_len = 256;
  Model<double> model = make_model<double>(cfg, build_vocabulary(train));
  auto prep_train = prepare_dataset(train, cfg);
  auto prep_dev = prepare_dataset(dev, cfg);
  std::ostringstream log;

  model.cfg.batch_size = 0;
  CHECK_THROWS_AS(
      train_model(model, prep_train, prep_dev, "/tmp/evidr_test_nope.ckpt", log),
      Error);
  model.cfg.batch_size = 16;
  model.cfg.epochs = 0;
  CHECK_THROWS_AS(
      train_model(model, prep_train, prep_dev, "/tmp/evidr_test_nope.ckpt", log),
      Error);
  model.cfg.epochs = 1;
  std::vector<PreparedInstance> empty;
  CHECK_THROWS_AS(train_model(model, empty, prep_dev, "/tmp/evidr_test_nope.ckpt", log),
                  Error);
}
