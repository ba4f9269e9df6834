#include "rumor/metrics.hpp"

#include "rumor/errors.hpp"

namespace rumor {

using nlohmann::json;

std::size_t argmax(const Tensor& logits) {
  if (logits.rows() != 1 || logits.cols() == 0) throw NumericError("argmax: expected 1 x C logits");
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return best;
}

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes) {
  if (truth.size() != predicted.size()) throw DataError("metrics: label and prediction counts differ");
  MetricsReport r;
  r.total = truth.size();
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= num_classes ||
        static_cast<std::size_t>(predicted[i]) >= num_classes) {
      throw DataError("metrics: class index out of range at position " + std::to_string(i));
    }
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }

  std::size_t tp_all = 0, fp_all = 0, fn_all = 0;
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t tp = r.confusion[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += r.confusion[o][c];
      fn += r.confusion[c][o];
    }
    ClassMetrics m;
    m.support = tp + fn;
    m.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
    m.recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    r.per_class.push_back(m);
    f1_sum += m.f1;
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
  }

  r.accuracy = ratio(static_cast<double>(tp_all), static_cast<double>(r.total));
  r.micro_f1 = ratio(2.0 * static_cast<double>(tp_all), 2.0 * static_cast<double>(tp_all) +
                                                            static_cast<double>(fp_all) + static_cast<double>(fn_all));
  r.macro_f1 = num_classes == 0 ? 0.0 : f1_sum / static_cast<double>(num_classes);
  return r;
}

json to_json(const MetricsReport& r, std::span<const std::string> class_names) {
  json f1 = json::object();
  json per_class = json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : "class_" + std::to_string(c);
    f1[name] = r.per_class[c].f1;
    per_class.push_back({{"class", name},
                         {"index", c},
                         {"precision", r.per_class[c].precision},
                         {"recall", r.per_class[c].recall},
                         {"f1", r.per_class[c].f1},
                         {"support", r.per_class[c].support}});
  }
  return {{"total", r.total},       {"accuracy", r.accuracy}, {"micro_f1", r.micro_f1},
          {"macro_f1", r.macro_f1}, {"f1", std::move(f1)},    {"per_class", std::move(per_class)},
          {"confusion", r.confusion}};
}

}  // namespace rumor
