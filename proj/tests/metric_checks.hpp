#pragma once

#include <optional>
#include <random>

#include "tagclip/metrics.hpp"

namespace testutil {

/// Report computed directly from pixel sets, without a confusion table.
inline tagclip::EvalReport brute_force_report(const tagclip::LabelMap& pred, const tagclip::LabelMap& gt,
                                              const tagclip::ClassVocabulary& vocab) {
  using namespace tagclip;
  EvalReport r;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) correct += pred.labels[i] == gt.labels[i];
  r.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(gt.size());
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool in_g = gt.labels[i] == static_cast<ClassId>(c);
      const bool in_p = pred.labels[i] == static_cast<ClassId>(c);
      inter += in_g && in_p;
      uni += in_g || in_p;
    }
    r.class_iou.push_back(uni ? std::optional<double>(static_cast<double>(inter) / static_cast<double>(uni))
                              : std::nullopt);
  }
  auto mean_of = [&](const std::vector<ClassId>& ids) {
    double s = 0;
    std::size_t k = 0;
    for (ClassId id : ids)
      if (r.class_iou[id]) s += *r.class_iou[id], ++k;
    return k ? s / static_cast<double>(k) : 0.0;
  };
  r.miou_seen = mean_of(vocab.seen());
  r.miou_unseen = mean_of(vocab.unseen());
  r.hiou = (r.miou_seen > 0 && r.miou_unseen > 0)
               ? 2 * r.miou_seen * r.miou_unseen / (r.miou_seen + r.miou_unseen)
               : 0.0;
  return r;
}

inline bool same_report(const tagclip::EvalReport& a, const tagclip::EvalReport& b) {
  return a.pixel_accuracy == b.pixel_accuracy && a.class_iou == b.class_iou && a.miou_seen == b.miou_seen &&
         a.miou_unseen == b.miou_unseen && a.hiou == b.hiou;
}

/// Random vocabulary with C ≤ 8 classes and a 16×16 prediction/ground-truth pair.
struct MetricCase {
  tagclip::ClassVocabulary vocab;
  tagclip::LabelMap pred, gt;
};

inline MetricCase random_metric_case(std::mt19937_64& rng) {
  using namespace tagclip;
  const std::size_t C = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
  std::vector<ClassId> seen{0}, unseen;
  for (std::size_t c = 1; c < C; ++c)
    (std::bernoulli_distribution(0.6)(rng) ? seen : unseen).push_back(static_cast<ClassId>(c));
  MetricCase m{ClassVocabulary(std::vector<std::string>(C, "c"), seen, unseen), LabelMap(16, 16), LabelMap(16, 16)};
  // Noisy copies of a blocky map, so IoUs span the whole range.
  std::uniform_int_distribution<ClassId> cls(0, static_cast<ClassId>(C - 1));
  const double flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      m.gt(y, x) = static_cast<ClassId>(((y / 4) * 3 + x / 5) % C);
      m.pred(y, x) = std::bernoulli_distribution(flip)(rng) ? cls(rng) : m.gt(y, x);
    }
  return m;
}

/// Number of random pairs whose report differs from the brute-force oracle.
inline std::size_t metric_oracle_mismatches(std::size_t pairs, std::mt19937_64& rng) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const MetricCase m = random_metric_case(rng);
    tagclip::ConfusionMatrix cm(m.vocab.size());
    cm.accumulate(m.pred, m.gt);
    bad += !same_report(tagclip::report(cm, m.vocab), brute_force_report(m.pred, m.gt, m.vocab));
  }
  return bad;
}

}  // namespace testutil
