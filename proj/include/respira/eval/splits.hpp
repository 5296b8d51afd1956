#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "respira/error.hpp"

namespace respira {

/// Disjoint train/test index lists, each sorted ascending.
struct Split {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;

  friend bool operator==(const Split&, const Split&) = default;
};

namespace detail {

inline std::vector<Split> splits_from_assignment(std::span<const std::size_t> fold_of, std::size_t k) {
  std::vector<Split> out(k);
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? out[f].test_indices : out[f].train_indices).push_back(i);
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<Split> loocv_splits(std::size_t n) {
  if (n < 2) fail(ErrorKind::TooFewInstances, "leave-one-out needs at least 2 instances");
  std::vector<std::size_t> fold_of(n);
  std::iota(fold_of.begin(), fold_of.end(), std::size_t{0});
  return detail::splits_from_assignment(fold_of, n);
}

/// True when every class present has at least k members.
inline bool stratification_feasible(std::span<const int> labels, std::size_t k) {
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  return std::all_of(counts.begin(), counts.end(), [k](const auto& kv) { return kv.second >= k; });
}

/// Seeded shuffle, then round-robin fold assignment. Stratified mode walks the
/// classes in label order and keeps the round-robin counter running across
/// them, so fold sizes still differ by at most one. Stratification silently
/// degrades to the plain scheme when a class has fewer than k members; check
/// stratification_feasible() to report it.
inline std::vector<Split> kfold_splits(std::span<const int> labels, std::size_t k, std::uint64_t seed,
                                       bool stratified) {
  const std::size_t n = labels.size();
  if (k < 2 || k > n) {
    fail(ErrorKind::BadK, "k=" + std::to_string(k) + " with " + std::to_string(n) + " instances");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold_of(n);

  if (stratified && stratification_feasible(labels, k)) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    std::size_t cursor = 0;
    for (auto& [label, members] : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      for (auto i : members) fold_of[i] = cursor++ % k;
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % k;
  }
  return detail::splits_from_assignment(fold_of, k);
}

/// Leave-one-group-out: one split per distinct group, in first-seen order.
inline std::vector<Split> leave_one_group_out_splits(std::span<const std::string> groups) {
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> fold_of(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto [it, inserted] = index.emplace(groups[i], index.size());
    fold_of[i] = it->second;
  }
  if (index.size() < 2) fail(ErrorKind::TooFewInstances, "leave-one-group-out needs at least 2 groups");
  return detail::splits_from_assignment(fold_of, index.size());
}

/// k-fold over groups: whole groups are shuffled and dealt round-robin.
inline std::vector<Split> group_kfold_splits(std::span<const std::string> groups, std::size_t k,
                                             std::uint64_t seed) {
  std::vector<std::string> distinct;
  std::map<std::string, std::size_t> index;
  for (const auto& g : groups) {
    if (index.emplace(g, distinct.size()).second) distinct.push_back(g);
  }
  if (k < 2 || k > distinct.size()) {
    fail(ErrorKind::BadK, "k=" + std::to_string(k) + " with " + std::to_string(distinct.size()) + " groups");
  }
  std::vector<std::size_t> order(distinct.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> group_fold(distinct.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) group_fold[order[pos]] = pos % k;
  std::vector<std::size_t> fold_of(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) fold_of[i] = group_fold[index.at(groups[i])];
  return detail::splits_from_assignment(fold_of, k);
}

}  // namespace respira
