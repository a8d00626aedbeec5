#pragma once

// Sweep over the number of independent components: refit ICA and an IC-space
// head for each n and pick the smallest n whose validation kappa is within
// epsilon of the full-feature head.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <future>
#include <string>
#include <vector>

#include "icx/error.hpp"
#include "icx/ica.hpp"
#include "icx/metrics.hpp"
#include "icx/ordinal_head.hpp"
#include "icx/pca.hpp"
#include "icx/rng.hpp"
#include "icx/types.hpp"

namespace icx {

inline constexpr double kDefaultSelectionEpsilon = 0.015;

struct SelectionConfig {
  IcaConfig ica;  // n_components and seed are set per trial
  FitConfig head;  // seed is set per fit
  std::uint64_t master_seed = 0;
  /// Worker threads for the per-n trials; 0 runs them sequentially.
  std::size_t threads = 0;
};

struct SelectionTrial {
  std::size_t n = 0;
  double kappa = 0.0;
  bool converged = false;
};

struct SelectionReport {
  double kappa_full = 0.0;
  std::vector<SelectionTrial> per_n;
  std::size_t chosen_n = 0;
  double epsilon = kDefaultSelectionEpsilon;
  bool satisfied = false;

  const SelectionTrial* trial(std::size_t n) const {
    for (const auto& t : per_n)
      if (t.n == n) return &t;
    return nullptr;
  }
};

/// Seeds for trial n, derived from the master seed.
inline std::uint64_t trial_ica_seed(std::uint64_t master, std::size_t n) {
  return derive_seed(derive_seed(master, streams::selection), 2 * n);
}
inline std::uint64_t trial_head_seed(std::uint64_t master, std::size_t n) {
  return derive_seed(derive_seed(master, streams::selection), 2 * n + 1);
}
inline std::uint64_t full_head_seed(std::uint64_t master) { return derive_seed(master, streams::head); }

struct TrialOutcome {
  SelectionTrial trial;
  IcModel model;
  LinearHead head;
};

inline TrialOutcome run_selection_trial(const Matrix& train, const LabelVector& train_labels, const Matrix& val,
                                        const LabelVector& val_labels, std::size_t n, const SelectionConfig& cfg) {
  IcaConfig ica = cfg.ica;
  ica.n_components = n;
  ica.seed = trial_ica_seed(cfg.master_seed, n);
  FitConfig fit = cfg.head;
  fit.seed = trial_head_seed(cfg.master_seed, n);
  TrialOutcome out;
  out.model = fit_ica(train, ica);
  out.head = fit_head(transform(out.model, train), train_labels, fit, InputKind::independent_components);
  out.trial = {n, evaluate(out.head, transform(out.model, val), val_labels), out.model.converged};
  return out;
}

inline SelectionReport select_components(const Matrix& train, const LabelVector& train_labels, const Matrix& val,
                                         const LabelVector& val_labels, std::size_t n_min, std::size_t n_max,
                                         double epsilon, const SelectionConfig& cfg) {
  require(train.cols() == val.cols(), ErrorKind::dimension, "train and validation dimensions differ");
  require(train_labels.classes == val_labels.classes, ErrorKind::dimension,
          "train and validation class counts differ");
  require(n_min >= 1 && n_min <= n_max, ErrorKind::parameter,
          "component range [" + std::to_string(n_min) + ", " + std::to_string(n_max) + "] is empty or starts at 0");
  require(epsilon >= 0, ErrorKind::parameter, "epsilon must be non-negative");
  const std::size_t rank = usable_rank(fit_pca(train));
  require(n_max <= rank, ErrorKind::rank,
          "n_max " + std::to_string(n_max) + " exceeds the numerical rank " + std::to_string(rank) +
              " of the training features");
  const auto val_counts = val_labels.counts();
  for (std::size_t c = 0; c < val_counts.size(); ++c)
    require(val_counts[c] > 0, ErrorKind::validation,
            "validation set has no samples of class " + std::to_string(c));

  SelectionReport report;
  report.epsilon = epsilon;
  FitConfig full_cfg = cfg.head;
  full_cfg.seed = full_head_seed(cfg.master_seed);
  report.kappa_full = evaluate(fit_head(train, train_labels, full_cfg), val, val_labels);

  std::vector<std::size_t> ns;
  for (std::size_t n = n_min; n <= n_max; ++n) ns.push_back(n);
  report.per_n.resize(ns.size());
  auto run = [&](std::size_t idx) {
    return run_selection_trial(train, train_labels, val, val_labels, ns[idx], cfg).trial;
  };
  if (cfg.threads == 0) {
    for (std::size_t i = 0; i < ns.size(); ++i) report.per_n[i] = run(i);
  } else {
    for (std::size_t begin = 0; begin < ns.size(); begin += cfg.threads) {
      std::vector<std::future<SelectionTrial>> batch;
      const std::size_t end = std::min(ns.size(), begin + cfg.threads);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(std::async(std::launch::async, run, i));
      for (std::size_t i = begin; i < end; ++i) report.per_n[i] = batch[i - begin].get();
    }
  }

  for (const auto& t : report.per_n)
    if (report.kappa_full - t.kappa <= epsilon) {
      report.chosen_n = t.n;
      report.satisfied = true;
      break;
    }
  if (!report.satisfied) {
    const SelectionTrial* best = &report.per_n.front();
    for (const auto& t : report.per_n)
      if (t.kappa > best->kappa) best = &t;
    report.chosen_n = best->n;
  }
  return report;
}

/// Fixed-width table: one summary line, one column header, one row per n.
inline std::string report_to_text(const SelectionReport& r) {
  char buf[160];
  std::string out;
  if (r.per_n.empty()) {
    std::snprintf(buf, sizeof buf, "kappa_full=%.6f epsilon=%.6f chosen_n=- status=empty\n", r.kappa_full,
                  r.epsilon);
  } else {
    std::snprintf(buf, sizeof buf, "kappa_full=%.6f epsilon=%.6f chosen_n=%zu status=%s\n", r.kappa_full,
                  r.epsilon, r.chosen_n, r.satisfied ? "ok" : "no-n-satisfied");
  }
  out += buf;
  std::snprintf(buf, sizeof buf, "%5s  %9s  %11s  %9s\n", "n", "kappa_n", "delta_kappa", "converged");
  out += buf;
  for (const auto& t : r.per_n) {
    std::snprintf(buf, sizeof buf, "%5zu  %9.6f  %11.6f  %9s\n", t.n, t.kappa, r.kappa_full - t.kappa,
                  t.converged ? "yes" : "no");
    out += buf;
  }
  return out;
}

}  // namespace icx
