#include "radfuse/folds.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "radfuse/error.hpp"
#include "radfuse/random.hpp"

namespace radfuse {

namespace {

void fill_rows(FoldPlan& plan) {
  for (auto& f : plan.folds) {
    f.train.clear();
    f.validation.clear();
    f.test.clear();
    for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
      const int s = plan.assignments[i];
      if (s == f.test_subset) f.test.push_back(i);
      else if (s == f.validation_subset) f.validation.push_back(i);
      else f.train.push_back(i);
    }
  }
}

}  // namespace

FoldPlan rolling_folds(std::size_t n_samples, int n_folds, std::uint64_t seed,
                       std::optional<std::span<const int>> labels) {
  require(n_folds >= 3, ErrorKind::InvalidArgument, "rolling folds need n_folds >= 3");
  require(n_samples >= static_cast<std::size_t>(n_folds), ErrorKind::InvalidArgument,
          std::to_string(n_samples) + " samples cannot fill " + std::to_string(n_folds) + " folds");
  if (labels) require(labels->size() == n_samples, ErrorKind::InvalidArgument, "label count mismatch");

  Rng rng(seed);
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.assignments.assign(n_samples, 0);
  const auto k = static_cast<std::size_t>(n_folds);
  if (labels) {
    // Deal class 0 then class 1 round-robin, continuing the rotation.
    std::size_t next = 0;
    for (int cls : {0, 1})
      for (auto i : order)
        if ((*labels)[i] == cls) plan.assignments[i] = static_cast<int>(next++ % k);
    for (auto i : order)
      require((*labels)[i] == 0 || (*labels)[i] == 1, ErrorKind::InvalidArgument,
              "labels must be 0 or 1");
  } else {
    // Contiguous near-equal chunks of the shuffled order.
    for (std::size_t s = 0; s < k; ++s)
      for (std::size_t j = n_samples * s / k; j < n_samples * (s + 1) / k; ++j)
        plan.assignments[order[j]] = static_cast<int>(s);
  }

  for (int f = 0; f < n_folds; ++f) {
    Fold fold;
    fold.test_subset = f;
    fold.validation_subset = (f + 1) % n_folds;
    for (int s = 0; s < n_folds; ++s)
      if (s != fold.test_subset && s != fold.validation_subset) fold.train_subsets.push_back(s);
    plan.folds.push_back(std::move(fold));
  }
  fill_rows(plan);
  return plan;
}

FoldPlan holdout_plan(std::size_t n_samples, std::vector<std::size_t> train,
                      std::vector<std::size_t> validation) {
  FoldPlan plan;
  plan.n_folds = 1;
  plan.assignments.assign(n_samples, -1);
  for (auto i : train) {
    require(i < n_samples && plan.assignments[i] == -1, ErrorKind::InvalidArgument, "bad train row");
    plan.assignments[i] = 0;
  }
  for (auto i : validation) {
    require(i < n_samples && plan.assignments[i] == -1, ErrorKind::InvalidArgument,
            "bad validation row");
    plan.assignments[i] = 1;
  }
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
  Fold f;
  f.test_subset = -1;
  f.validation_subset = 1;
  f.train_subsets = {0};
  f.train = std::move(train);
  f.validation = std::move(validation);
  plan.folds.push_back(std::move(f));
  return plan;
}

void validate_plan(const FoldPlan& plan, std::size_t n_samples) {
  require(plan.n_folds >= 1 && plan.folds.size() == static_cast<std::size_t>(plan.n_folds),
          ErrorKind::InvalidArgument, "fold count mismatch");
  require(plan.assignments.size() == n_samples, ErrorKind::InvalidArgument,
          "fold plan covers " + std::to_string(plan.assignments.size()) + " samples, table has " +
              std::to_string(n_samples));
  for (const auto& f : plan.folds) {
    require(!f.train.empty() && !f.validation.empty(), ErrorKind::InvalidArgument,
            "fold without training or validation rows");
    std::vector<int> seen(n_samples, 0);
    for (const auto* rows : {&f.train, &f.validation, &f.test})
      for (auto i : *rows) {
        require(i < n_samples, ErrorKind::InvalidArgument, "fold row out of range");
        require(++seen[i] == 1, ErrorKind::InvalidArgument, "fold roles overlap");
      }
  }
  if (plan.n_folds > 1) {
    std::vector<int> tested(n_samples, 0);
    for (const auto& f : plan.folds)
      for (auto i : f.test) ++tested[i];
    for (int t : tested)
      require(t == 1, ErrorKind::InvalidArgument, "every sample must be tested exactly once");
  }
}

}  // namespace radfuse
