#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hep2 {

// n x n counts; cell (true k, predicted j).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : n_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return n_; }
  std::uint64_t operator()(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * n_ + predicted];
  }

  void accumulate(std::size_t truth, std::size_t predicted);
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count);
  void merge(const ConfusionMatrix& other);

  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t total() const;
  std::uint64_t correct() const;

  // CCR_k = cm[k][k] / row_sum(k). Throws when class k has no samples.
  double class_rate(std::size_t k) const;
  // Row-normalized percentages; an empty row stays all zero.
  std::vector<std::vector<double>> row_percentages() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

// Mean class accuracy, (1/n) sum_k CCR_k, in [0, 1]. Any class without
// samples is an error rather than being skipped.
double mca(const ConfusionMatrix& cm);
// Overall accuracy, trace / total.
double aca(const ConfusionMatrix& cm);

// One learning-curve row.
struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double train_mca = 0.0;
  std::optional<double> validation_mca;
};

// Column order: epoch,learning_rate,train_loss,train_mca,validation_mca
std::string curve_csv(const std::vector<EpochRecord>& history);

// Writes under `dir`:
//   confusion_counts.csv   header "true\predicted,<names...>", raw counts
//   confusion_percent.csv  same layout, row percentages with 2 decimals
//   summary.csv            metric,value rows: mca, aca, samples, ccr_<name>
//   curve.csv              when history is non-empty
void export_report(const std::filesystem::path& dir, const ConfusionMatrix& cm,
                   const std::vector<std::string>& class_names,
                   const std::vector<EpochRecord>& history = {});

// Parses confusion_counts.csv back (used to cross-check reports).
ConfusionMatrix read_confusion_counts(const std::filesystem::path& path);

std::string format_fixed(double value, int decimals);

}  // namespace hep2
