#include <cmath>
#include <fstream>
#include <json.hpp>

#include "hsissl/classify.hpp"
#include "hsissl/error.hpp"

namespace hsissl {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw ConfigError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t count) {
  if (truth < 0 || predicted < 0 || std::size_t(truth) >= classes_ ||
      std::size_t(predicted) >= classes_) {
    throw LabelError("confusion entry (" + std::to_string(truth) + ", " +
                     std::to_string(predicted) + ") outside " + std::to_string(classes_) +
                     " classes");
  }
  counts_[std::size_t(truth) * classes_ + std::size_t(predicted)] += count;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts_) sum += c;
  return sum;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t sum = 0;
  for (std::size_t k = 0; k < classes_; ++k) sum += at(k, k);
  return sum;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t sum = 0;
  for (std::size_t k = 0; k < classes_; ++k) sum += at(truth, k);
  return sum;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t sum = 0;
  for (std::size_t k = 0; k < classes_; ++k) sum += at(k, predicted);
  return sum;
}

namespace {

std::uint64_t nonempty_total(const ConfusionMatrix& confusion) {
  const auto total = confusion.total();
  if (total == 0) throw ConfigError("metrics of an empty confusion matrix");
  return total;
}

}  // namespace

double overall_accuracy(const ConfusionMatrix& confusion) {
  return double(confusion.trace()) / double(nonempty_total(confusion));
}

double chance_agreement(const ConfusionMatrix& confusion) {
  const double total = double(nonempty_total(confusion));
  double sum = 0.0;
  for (std::size_t k = 0; k < confusion.classes(); ++k) {
    sum += double(confusion.row_sum(k)) * double(confusion.col_sum(k));
  }
  return sum / (total * total);
}

double cohen_kappa(const ConfusionMatrix& confusion, std::string* warning) {
  const double p_o = overall_accuracy(confusion);
  const double p_e = chance_agreement(confusion);
  if (p_e >= 1.0) {
    if (warning) *warning = "kappa undefined: chance agreement is 1, reporting 0";
    return 0.0;
  }
  return (p_o - p_e) / (1.0 - p_e);
}

MetricsReport make_report(const ConfusionMatrix& confusion) {
  MetricsReport report;
  report.confusion = confusion;
  report.n_test = confusion.total();
  report.overall_accuracy = overall_accuracy(confusion);
  std::string warning;
  report.kappa = cohen_kappa(confusion, &warning);
  if (!warning.empty()) report.warnings.push_back(warning);
  for (std::size_t k = 0; k < confusion.classes(); ++k) {
    const auto row = confusion.row_sum(k);
    report.per_class_accuracy.push_back(row == 0 ? std::nan("")
                                                 : double(confusion.at(k, k)) / double(row));
  }
  return report;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["oa"] = overall_accuracy;
  j["kappa"] = kappa;
  auto per_class = nlohmann::ordered_json::array();
  for (double a : per_class_accuracy) {
    per_class.push_back(std::isnan(a) ? nlohmann::ordered_json(nullptr)
                                      : nlohmann::ordered_json(a));
  }
  j["per_class"] = per_class;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < confusion.classes(); ++t) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < confusion.classes(); ++p) row.push_back(confusion.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["seed"] = seed;
  j["protocol"] = protocol;
  if (!warnings.empty()) j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

void write_label_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
                     std::span<const int> labels, std::size_t classes) {
  if (labels.size() != height * width) {
    throw DimensionError("label raster has " + std::to_string(labels.size()) +
                         " entries, expected " + std::to_string(height * width));
  }
  if (classes == 0) throw ConfigError("PGM export needs at least one class");
  std::vector<unsigned char> gray(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int k = labels[i];
    if (k < 0) continue;
    if (std::size_t(k) >= classes) {
      throw LabelError("label " + std::to_string(k) + " outside " + std::to_string(classes) +
                       " classes");
    }
    gray[i] = static_cast<unsigned char>(std::lround(255.0 * double(k + 1) / double(classes)));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()), std::streamsize(gray.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace hsissl
