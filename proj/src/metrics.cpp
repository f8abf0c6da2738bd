#include "tagclip/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tagclip {

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::optional<ClassId> ignore_label)
    : classes_(classes), ignore_(ignore_label), counts_(classes * classes, 0) {}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.rows != gt.rows || pred.cols != gt.cols) {
    throw std::invalid_argument("prediction " + std::to_string(pred.rows) + "x" +
                                std::to_string(pred.cols) + " vs ground truth " +
                                std::to_string(gt.rows) + "x" + std::to_string(gt.cols));
  }
  const auto c = static_cast<ClassId>(classes_);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const ClassId g = gt.labels[i];
    const ClassId p = pred.labels[i];
    ++evaluated_;
    if (ignore_ && g == *ignore_) {
      ++ignored_;
      continue;
    }
    if (g < 0 || g >= c || p < 0 || p >= c) {
      throw std::invalid_argument("label out of range at pixel " + std::to_string(i) + ": gt " +
                                  std::to_string(g) + ", pred " + std::to_string(p));
    }
    ++counts_[static_cast<std::size_t>(g) * classes_ + static_cast<std::size_t>(p)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("confusion matrix size mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
  evaluated_ += other.evaluated_;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

double harmonic_iou(double s, double u) {
  if (s <= 0.0 || u <= 0.0) return 0.0;
  return 2.0 * s * u / (s + u);
}

EvalReport report(const ConfusionMatrix& cm, const ClassVocabulary& vocab) {
  if (cm.classes() != vocab.size()) {
    throw std::invalid_argument("confusion matrix covers " + std::to_string(cm.classes()) +
                                " classes, vocabulary has " + std::to_string(vocab.size()));
  }
  const std::uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("cannot report on an empty confusion matrix");

  const std::size_t n = cm.classes();
  EvalReport r;
  std::uint64_t trace = 0;
  r.class_iou.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    trace += tp;
    const std::uint64_t uni = row + col - tp;
    if (uni > 0) r.class_iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  r.pixel_accuracy = static_cast<double>(trace) / static_cast<double>(total);

  auto mean_over = [&](const std::vector<ClassId>& ids) {
    double s = 0.0;
    std::size_t k = 0;
    for (auto id : ids) {
      if (r.class_iou[id]) {
        s += *r.class_iou[id];
        ++k;
      }
    }
    return k ? s / static_cast<double>(k) : 0.0;
  };
  r.miou_seen = mean_over(vocab.seen());
  r.miou_unseen = mean_over(vocab.unseen());
  r.hiou = harmonic_iou(r.miou_seen, r.miou_unseen);
  return r;
}

namespace {
std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}
std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string format_report_table(const EvalReport& r, const ClassVocabulary& vocab) {
  std::ostringstream os;
  os << "  pAcc   mIoU(S)  mIoU(U)  hIoU\n";
  os << pct(r.pixel_accuracy) << "  " << pct(r.miou_seen) << "   " << pct(r.miou_unseen) << "  "
     << pct(r.hiou) << "\n";
  os << "class                 split    IoU\n";
  for (std::size_t c = 0; c < r.class_iou.size(); ++c) {
    std::string name = vocab.name(static_cast<ClassId>(c));
    name.resize(std::max<std::size_t>(name.size(), 20), ' ');
    os << name << "  " << (vocab.is_seen(static_cast<ClassId>(c)) ? "seen  " : "unseen") << "  "
       << (r.class_iou[c] ? pct(*r.class_iou[c]) : std::string("   n/a")) << "\n";
  }
  return os.str();
}

std::string format_report_kv(const EvalReport& r, const ClassVocabulary& vocab) {
  std::ostringstream os;
  os << "pacc=" << exact(r.pixel_accuracy) << "\n";
  os << "miou_seen=" << exact(r.miou_seen) << "\n";
  os << "miou_unseen=" << exact(r.miou_unseen) << "\n";
  os << "hiou=" << exact(r.hiou) << "\n";
  for (std::size_t c = 0; c < r.class_iou.size(); ++c) {
    os << "iou." << vocab.name(static_cast<ClassId>(c)) << "="
       << (r.class_iou[c] ? exact(*r.class_iou[c]) : std::string("nan")) << "\n";
  }
  return os.str();
}

}  // namespace tagclip
