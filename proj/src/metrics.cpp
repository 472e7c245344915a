#include "hep2/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hep2/error.hpp"

namespace hep2 {

void ConfusionMatrix::accumulate(std::size_t truth, std::size_t predicted) { add(truth, predicted, 1); }

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= n_ || predicted >= n_)
    fail(ErrorKind::invalid, "confusion matrix: label pair (" + std::to_string(truth) + ", " +
                                 std::to_string(predicted) + ") outside [0, " +
                                 std::to_string(n_) + ")");
  counts_[truth * n_ + predicted] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) fail(ErrorKind::shape, "confusion matrix: merging different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < n_; ++j) s += counts_[truth * n_ + j];
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t s = 0;
  for (std::size_t k = 0; k < n_; ++k) s += counts_[k * n_ + k];
  return s;
}

double ConfusionMatrix::class_rate(std::size_t k) const {
  const auto rows = row_sum(k);
  if (rows == 0) fail(ErrorKind::data, "class " + std::to_string(k) + " has no samples");
  return static_cast<double>(counts_[k * n_ + k]) / static_cast<double>(rows);
}

std::vector<std::vector<double>> ConfusionMatrix::row_percentages() const {
  std::vector<std::vector<double>> out(n_, std::vector<double>(n_, 0.0));
  for (std::size_t k = 0; k < n_; ++k) {
    const auto rows = row_sum(k);
    if (rows == 0) continue;
    for (std::size_t j = 0; j < n_; ++j)
      out[k][j] = 100.0 * static_cast<double>(counts_[k * n_ + j]) / static_cast<double>(rows);
  }
  return out;
}

double mca(const ConfusionMatrix& cm) {
  if (cm.classes() == 0) fail(ErrorKind::data, "MCA of an empty confusion matrix");
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) sum += cm.class_rate(k);
  return sum / static_cast<double>(cm.classes());
}

double aca(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) fail(ErrorKind::data, "ACA of an empty confusion matrix");
  return static_cast<double>(cm.correct()) / static_cast<double>(total);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

namespace {

// Full round-trip precision for values consumers may recompute.
std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot create " + path.string());
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

std::string matrix_header(const std::vector<std::string>& names) {
  std::string s = "true\\predicted";
  for (const auto& n : names) s += "," + n;
  return s + "\n";
}

}  // namespace

std::string curve_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,learning_rate,train_loss,train_mca,validation_mca\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << exact(r.learning_rate) << ',' << exact(r.train_loss) << ','
        << exact(r.train_mca) << ',';
    if (r.validation_mca) out << exact(*r.validation_mca);
    out << '\n';
  }
  return out.str();
}

void export_report(const std::filesystem::path& dir, const ConfusionMatrix& cm,
                   const std::vector<std::string>& class_names,
                   const std::vector<EpochRecord>& history) {
  if (class_names.size() != cm.classes())
    fail(ErrorKind::shape, "export_report: class name count does not match the matrix");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create report directory " + dir.string() + ": " + ec.message());

  std::string counts = matrix_header(class_names);
  std::string percent = matrix_header(class_names);
  const auto pct = cm.row_percentages();
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    counts += class_names[k];
    percent += class_names[k];
    for (std::size_t j = 0; j < cm.classes(); ++j) {
      counts += "," + std::to_string(cm(k, j));
      percent += "," + format_fixed(pct[k][j], 2);
    }
    counts += "\n";
    percent += "\n";
  }
  write_text(dir / "confusion_counts.csv", counts);
  write_text(dir / "confusion_percent.csv", percent);

  std::string summary = "metric,value\n";
  summary += "mca," + exact(mca(cm)) + "\n";
  summary += "aca," + exact(aca(cm)) + "\n";
  summary += "mca_percent," + format_fixed(100.0 * mca(cm), 2) + "\n";
  summary += "aca_percent," + format_fixed(100.0 * aca(cm), 2) + "\n";
  summary += "samples," + std::to_string(cm.total()) + "\n";
  for (std::size_t k = 0; k < cm.classes(); ++k)
    summary += "ccr_" + class_names[k] + "," + exact(cm.class_rate(k)) + "\n";
  write_text(dir / "summary.csv", summary);

  if (!history.empty()) write_text(dir / "curve.csv", curve_csv(history));
}

ConfusionMatrix read_confusion_counts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::uint64_t>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<std::uint64_t> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stoull(cell));
    rows.push_back(std::move(row));
  }
  ConfusionMatrix cm(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != rows.size()) fail(ErrorKind::format, path.string() + ": ragged matrix");
    for (std::size_t j = 0; j < rows.size(); ++j)
      cm.add(k, j, rows[k][j]);
  }
  return cm;
}

}  // namespace hep2
