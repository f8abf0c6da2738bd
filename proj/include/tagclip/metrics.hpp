#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tagclip/embeddings.hpp"

namespace tagclip {

/// counts[g][p] = pixels with ground truth g predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes, std::optional<ClassId> ignore_label = std::nullopt);

  /// Adds one prediction/ground-truth pair. Ground-truth pixels equal to the
  /// ignore label are counted as ignored; any other out-of-range id throws.
  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
  std::uint64_t total() const;
  std::uint64_t ignored() const { return ignored_; }
  std::uint64_t evaluated() const { return evaluated_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::optional<ClassId> ignore_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
  std::uint64_t evaluated_ = 0;
};

/// All values are fractions in [0, 1]; classes with an empty union have no IoU.
struct EvalReport {
  double pixel_accuracy = 0.0;
  std::vector<std::optional<double>> class_iou;
  double miou_seen = 0.0;
  double miou_unseen = 0.0;
  double hiou = 0.0;
};

/// 2·s·u/(s+u), or 0 when either side is 0.
double harmonic_iou(double miou_seen, double miou_unseen);

/// Throws std::invalid_argument on an empty matrix.
EvalReport report(const ConfusionMatrix& cm, const ClassVocabulary& vocab);

/// Human-readable table (percentages).
std::string format_report_table(const EvalReport& r, const ClassVocabulary& vocab);
/// One key=value per line, fractions printed with 17 significant digits.
std::string format_report_kv(const EvalReport& r, const ClassVocabulary& vocab);

}  // namespace tagclip
