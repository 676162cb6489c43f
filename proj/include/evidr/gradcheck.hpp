// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient verification at 64-bit precision.
#pragma once

#include <cmath>
#include <cstring>
#include <map>
#include <string>

#include "evidr/params.hpp"
#include "evidr/tape.hpp"

namespace evidr {

struct GradEvalResult {
  double loss = 0.0;
  std::map<std::string, Tensor<double>> grads;  // filled when requested
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  double worst_ad = 0.0, worst_fd = 0.0;
  std::size_t entries_checked = 0;
};

/// fn(store, want_grads) evaluates the scalar loss from the store's current
/// parameter values and, when asked, returns analytic gradients per name.
/// The relative error metric is |g_ad - g_fd| / max(1, |g_ad| + |g_fd|).
/// Two identical forward passes must agree bitwise or the function is
/// rejected as non-deterministic.
template <typename Fn>
FiniteDiffReport finite_difference_check(ParameterStore<double>& store, Fn&& fn,
                                         double eps = 1e-4) {
  double l1 = fn(store, false).loss;
  double l2 = fn(store, false).loss;
  if (std::memcmp(&l1, &l2, sizeof(double)) != 0)
    throw model_error("finite_difference_check: loss function is non-deterministic");

  GradEvalResult base = fn(store, true);
  FiniteDiffReport report;
  for (auto& [name, p] : store.params) {
    const Tensor<double>* ad = nullptr;
    if (auto it = base.grads.find(name); it != base.grads.end()) ad = &it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double saved = p.data[i];
      p.data[i] = saved + eps;
      double lp = fn(store, false).loss;
      p.data[i] = saved - eps;
      double lm = fn(store, false).loss;
      p.data[i] = saved;
      double g_fd = (lp - lm) / (2.0 * eps);
      double g_ad = ad ? ad->data[i] : 0.0;
      double rel = std::abs(g_ad - g_fd) / std::max(1.0, std::abs(g_ad) + std::abs(g_fd));
      ++report.entries_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_ad = g_ad;
        report.worst_fd = g_fd;
      }
    }
  }
  return report;
}

}  // namespace evidr
