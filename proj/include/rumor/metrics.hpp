#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rumor/tensor.hpp"

namespace rumor {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::size_t total = 0;
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  // confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

// Index of the largest entry of a 1 x C row; ties go to the lowest index.
std::size_t argmax(const Tensor& logits);

// Precision/recall/F1 per class (0/0 taken as 0), accuracy, micro F1 from
// pooled TP/FP/FN, and macro F1 as the mean over all `num_classes` classes,
// including classes that never occur.
MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes);

// Table-style report: Accuracy, Micro F1, Macro F1, then F1 per class name.
nlohmann::json to_json(const MetricsReport& r, std::span<const std::string> class_names);

}  // namespace rumor
