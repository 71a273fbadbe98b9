#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace radfuse {

struct Fold {
  int test_subset = 0;
  int validation_subset = 0;
  std::vector<int> train_subsets;
  // Row indices, ascending.
  std::vector<std::size_t> train, validation, test;
};

struct FoldPlan {
  int n_folds = 0;
  std::vector<int> assignments;  // subset index per sample
  std::vector<Fold> folds;
};

/// Shuffles samples by `seed`, splits them into `n_folds` near-equal subsets
/// and rotates roles: fold k tests on subset k, validates on subset k+1
/// (mod n_folds) and trains on the rest. With `labels` given, each class is
/// dealt round-robin over the subsets so class ratios stay balanced.
FoldPlan rolling_folds(std::size_t n_samples, int n_folds, std::uint64_t seed,
                       std::optional<std::span<const int>> labels = std::nullopt);

/// Single fold from explicit train / validation rows (no test rows).
FoldPlan holdout_plan(std::size_t n_samples, std::vector<std::size_t> train,
                      std::vector<std::size_t> validation);

/// Checks the partition and role invariants; throws on violation.
void validate_plan(const FoldPlan& plan, std::size_t n_samples);

}  // namespace radfuse
