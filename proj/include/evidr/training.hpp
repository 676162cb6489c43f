// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// AdamW with decoupled weight decay and per-group learning rates, the
// warmup-then-cosine schedule, global-norm gradient clipping, and the
// deterministic single-threaded training loop with best-dev checkpointing.
#pragma once

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "evidr/model.hpp"

namespace evidr {

/// AdamW. Moments live beside the store, keyed by parameter name; the
/// encoder.* group uses lr_model, everything else lr_other.
template <typename T>
struct AdamW {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::map<std::string, Tensor<T>> m1, m2;
  long steps = 0;

  void step(ParameterStore<T>& store, double lr_model, double lr_other, double weight_decay) {
    ++steps;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    for (auto& [name, p] : store.params) {
      const Tensor<T>& g = store.grad(name);  // zeros when untouched
      auto moment = [&](std::map<std::string, Tensor<T>>& m) -> Tensor<T>& {
        auto it = m.find(name);
        if (it == m.end()) it = m.emplace(name, Tensor<T>(p.rows, p.cols)).first;
        return it->second;
      };
      Tensor<T>& m = moment(m1);
      Tensor<T>& v = moment(m2);
      const double lr = name.rfind("encoder.", 0) == 0 ? lr_model : lr_other;
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        double gi = static_cast<double>(g.data[i]);
        double mi = beta1 * static_cast<double>(m.data[i]) + (1.0 - beta1) * gi;
        double vi = beta2 * static_cast<double>(v.data[i]) + (1.0 - beta2) * gi * gi;
        m.data[i] = static_cast<T>(mi);
        v.data[i] = static_cast<T>(vi);
        double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps);
        p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) -
                                   lr * (update + weight_decay * static_cast<double>(p.data[i])));
      }
    }
  }
};

/// Linear warmup to the peak over max(1, round(frac * total)) steps (step 0
/// is exactly 0), then cosine decay to 0 at the final step.
inline double lr_scale(long step, long total_steps, double warmup_fraction) {
  long warm = std::max<long>(1, std::lround(warmup_fraction * static_cast<double>(total_steps)));
  if (step < warm) return static_cast<double>(step) / static_cast<double>(warm);
  if (total_steps <= warm) return 1.0;
  double progress = static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
  return 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

/// Scales all gradients so their global L2 norm is at most `clip`.
template <typename T>
double clip_gradients(ParameterStore<T>& store, double clip) {
  double sq = 0.0;
  for (const auto& [name, g] : store.grads)
    for (T v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
  double norm = std::sqrt(sq);
  if (clip > 0.0 && norm > clip) {
    T s = static_cast<T>(clip / norm);
    for (auto& [name, g] : store.grads)
      for (T& v : g.data) v *= s;
  }
  return norm;
}

struct TrainResult {
  double best_em = -1.0, best_f1 = -1.0;
  int best_epoch = -1;
  std::vector<double> loss_curve;  // mean instance loss per epoch
};

namespace detail {

inline void write_csv_header(std::ostream& os) {
  os << "epoch,train_loss,dev_em,dev_f1"
     << ",number_em,number_f1,date_em,date_f1,span_em,span_f1,count_em,count_f1"
     << ",det_sent_p,det_sent_r,det_sent_f1,det_clause_p,det_clause_r,det_clause_f1"
     << ",akr_sentence,akr_clause\n";
}

inline void write_csv_row(std::ostream& os, int epoch, double train_loss, const EvalReport& r) {
  auto bucket = [&](const char* name) -> BucketStats {
    auto it = r.per_type.find(name);
    return it == r.per_type.end() ? BucketStats{} : it->second;
  };
  os << epoch << ',' << train_loss << ',' << r.em() << ',' << r.f1();
  for (const char* name : {"number", "date", "span", "count"}) {
    BucketStats b = bucket(name);
    os << ',' << b.em() << ',' << b.f1();
  }
  os << ',' << r.det_sentence.precision() << ',' << r.det_sentence.recall() << ','
     << r.det_sentence.f1() << ',' << r.det_clause.precision() << ',' << r.det_clause.recall()
     << ',' << r.det_clause.f1() << ',' << r.akr_sentence << ',' << r.akr_clause << "\n";
}

}  // namespace detail

/// Trains in place. One instance per tape, batched gradient accumulation,
/// deterministic shuffling from the run seed, dev evaluation each epoch, and
/// the best dev-EM checkpoint (F1 breaks ties, first best wins) saved to
/// `ckpt_path` when it is non-empty. Metrics per epoch go to `log` and, when
/// `csv_path` is non-empty, to a CSV file.
template <typename T>
TrainResult train_model(Model<T>& model, const std::vector<PreparedInstance>& train,
                        const std::vector<PreparedInstance>& dev, const std::string& ckpt_path,
                        std::ostream& log, const std::string& csv_path = std::string()) {
  const TrainConfig& cfg = model.cfg;
  if (cfg.batch_size < 1) throw config_error("batch_size must be positive");
  if (cfg.epochs < 1) throw config_error("epochs must be positive");
  if (train.empty()) throw config_error("training split is empty");

  const long steps_per_epoch =
      (static_cast<long>(train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = steps_per_epoch * cfg.epochs;

  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path, std::ios::trunc);
    if (!csv) throw file_error("cannot write metrics CSV: " + csv_path);
    detail::write_csv_header(csv);
  }

  AdamW<T> opt;
  std::mt19937_64 shuffle_rng(cfg.seed * kSeedMix ^ fnv1a64("shuffle"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_deterministic(order, shuffle_rng);
    // With teacher forcing on, the first half of training feeds gold
    // evidence downstream; the second half switches to predictions.
    const bool teacher = cfg.teacher_force_evidence && epoch < cfg.epochs / 2;

    double loss_sum = 0.0;
    long loss_count = 0;
    for (std::size_t base = 0; base < order.size(); base += cfg.batch_size) {
      model.store.zero_grads();
      int contributing = 0;
      double batch_loss = 0.0;
      std::size_t hi = std::min(order.size(), base + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t k = base; k < hi; ++k) {
        const PreparedInstance& prep = train[order[k]];
        Tape<T> tape;
        try {
          ForwardPass<T> fp = run_forward(tape, model.store, model.vocab, cfg, prep, teacher);
          LossIds<T> loss = build_loss(tape, fp, prep, cfg);
          if (loss.total < 0) continue;  // nothing supervisable
          tape.backward(loss.total);
          fp.bound.accumulate_grads(tape, model.store);
          batch_loss += static_cast<double>(tape.value(loss.total).data[0]);
          ++contributing;
        } catch (const Error&) {
          throw;
        } catch (const std::exception& e) {
          throw model_error(std::string(e.what()) + " (instance " + prep.qa.query_id + ")");
        }
      }
      if (contributing > 0) {
        T inv = static_cast<T>(1.0 / contributing);
        for (auto& [name, g] : model.store.grads)
          for (T& v : g.data) v *= inv;
        clip_gradients(model.store, cfg.grad_clip);
        double s = lr_scale(global_step, total_steps, cfg.warmup_fraction);
        opt.step(model.store, cfg.lr_model * s, cfg.lr_other * s, cfg.weight_decay);
        loss_sum += batch_loss;
        loss_count += contributing;
      }
      ++global_step;
    }

    double train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    result.loss_curve.push_back(train_loss);
    EvalReport dev_rep = evaluate_model(model, dev);

    char line[256];
    std::snprintf(line, sizeof(line), "epoch %d  loss %.17g  dev_em %.2f  dev_f1 %.2f", epoch,
                  train_loss, dev_rep.em(), dev_rep.f1());
    log << line << std::endl;
    if (csv.is_open()) detail::write_csv_row(csv, epoch, train_loss, dev_rep);

    bool better = dev_rep.em() > result.best_em ||
                  (dev_rep.em() == result.best_em && dev_rep.f1() > result.best_f1);
    if (better) {
      result.best_em = dev_rep.em();
      result.best_f1 = dev_rep.f1();
      result.best_epoch = epoch;
      if (!ckpt_path.empty()) save_model(model, ckpt_path);
    }
  }
  return result;
}

}  // namespace evidr
