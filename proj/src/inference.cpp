#include "tagclip/inference.hpp"

#include <stdexcept>

#include "tagclip/ops.hpp"

namespace tagclip {

Tensor fuse_with_trusty(const Tensor& raw, const Tensor& trusty, const ClassVocabulary& vocab,
                        std::span<const ClassId> class_ids) {
  if (raw.rank() != 3 || trusty.rank() != 2 || raw.dim(1) != trusty.dim(0) ||
      raw.dim(2) != trusty.dim(1)) {
    throw ShapeError("fuse_with_trusty: raw " + shape_str(raw.shape()) + " vs trusty " +
                     shape_str(trusty.shape()));
  }
  const std::size_t channels = raw.dim(0);
  if (!class_ids.empty() && class_ids.size() != channels) {
    throw ShapeError("fuse_with_trusty: " + std::to_string(class_ids.size()) + " class ids for " +
                     std::to_string(channels) + " channels");
  }
  const std::size_t hw = trusty.numel();
  const Tensor seen_w = reshape(trusty, {1, hw});
  const Tensor unseen_w = one_minus(seen_w);
  std::vector<Tensor> rows;
  rows.reserve(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const ClassId id = class_ids.empty() ? static_cast<ClassId>(c) : class_ids[c];
    if (id < 0 || id >= vocab.masked()) {
      throw std::invalid_argument("fuse_with_trusty: channel " + std::to_string(c) + " has class id " +
                                  std::to_string(id) + " outside the vocabulary");
    }
    rows.push_back(vocab.is_seen(id) ? seen_w : unseen_w);
  }
  return mul(raw, reshape(concat_rows(rows), raw.shape()));
}

LabelMap decode_labels(const Tensor& scores, std::span<const ClassId> class_ids) {
  if (scores.rank() != 3 || scores.dim(0) == 0) {
    throw ShapeError("decode_labels: expected a non-empty C×H×W map, got " + shape_str(scores.shape()));
  }
  const std::size_t channels = scores.dim(0), h = scores.dim(1), w = scores.dim(2);
  if (!class_ids.empty() && class_ids.size() != channels) {
    throw ShapeError("decode_labels: class id count does not match channels");
  }
  const auto v = scores.values();
  LabelMap out(h, w);
  for (std::size_t p = 0; p < h * w; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < channels; ++c) {
      if (v[c * h * w + p] > v[best * h * w + p]) best = c;
    }
    out.labels[p] = class_ids.empty() ? static_cast<ClassId>(best) : class_ids[best];
  }
  return out;
}

}  // namespace tagclip
