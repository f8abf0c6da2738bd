#pragma once

#include <span>

#include "tagclip/embeddings.hpp"
#include "tagclip/tensor.hpp"

namespace tagclip {

/// Weighs raw class scores by the trusty map: seen channels by M_A, unseen
/// channels by 1 − M_A. `class_ids[i]` names raw channel i; pass an empty span
/// when the channels are exactly 0..C−1.
Tensor fuse_with_trusty(const Tensor& raw, const Tensor& trusty, const ClassVocabulary& vocab,
                        std::span<const ClassId> class_ids = {});

/// Per-pixel argmax over axis 0 of a C×H×W map, lowest id wins ties.
/// Channel i decodes to class_ids[i] (or i when class_ids is empty).
LabelMap decode_labels(const Tensor& scores, std::span<const ClassId> class_ids = {});

struct FusedPrediction {
  Tensor scores;  // C×H×W, fused (or raw when fusion is off)
  LabelMap labels;
};

}  // namespace tagclip
