#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace respira {

/// Output of every classifier: a hard label plus one score per class. Scores
/// are probabilities for the forest and logistic model, decision values for
/// the SVM; higher always means "more like this class".
struct Prediction {
  int label = 0;
  std::vector<double> scores;
};

/// Index of the largest value; ties resolve to the lowest index.
inline int argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace respira
