#pragma once

#include <optional>
#include <span>

#include "tagclip/embeddings.hpp"
#include "tagclip/head.hpp"
#include "tagclip/tensor.hpp"

namespace tagclip {

struct LossWeights {
  double alpha = 20.0;  // focal
  double beta = 1.0;    // dice
  double gamma = 10.0;  // trusty dice

  bool operator==(const LossWeights&) const = default;
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// How unseen raw channels are supervised.
enum class UnseenSupervision {
  excluded,  // inductive: no loss on unseen channels
  full,      // fully supervised: every pixel of an unseen channel counts
  pseudo,    // self-training: MASKED pixels are ignored on unseen channels
};

struct LossOptions {
  LossWeights weights;
  FocalParams focal;
  double dice_eps = 1.0;
  UnseenSupervision unseen = UnseenSupervision::excluded;
  bool trusty_in_cls = true;
  bool supervise_trusty = true;  // false drops the M_A dice term entirely
};

struct LossReport {
  double cls = 0.0;
  double focal = 0.0;
  double dice = 0.0;
  double trusty = 0.0;
  double total = 0.0;
};

/// Differentiable loss components; `total` is what gets back-propagated.
struct LossTerms {
  Tensor cls;
  Tensor focal;
  Tensor dice;
  Tensor trusty;
  Tensor total;

  LossReport report() const;
};

constexpr double kProbClamp = 1e-7;

/// 1 where the label is a seen class, 0 for unseen or MASKED. Throws
/// std::invalid_argument for labels outside 0..C.
Tensor make_pseudo_trusty_labels(const LabelMap& labels, const ClassVocabulary& vocab);

/// Soft dice over the whole tensor: 1 − (2Σpt + eps)/(Σp + Σt + eps).
Tensor dice_loss(const Tensor& pred, const Tensor& target, double eps = 1.0);

/// Dice per slice along axis 0, averaged. Optional `valid` zeroes ignored elements.
Tensor dice_loss_per_channel(const Tensor& pred, const Tensor& target, double eps = 1.0,
                             const std::optional<Tensor>& valid = std::nullopt);

/// Mean of −α_t(1−p_t)^γ ln p_t, predictions clamped to [1e-7, 1−1e-7].
/// With `valid`, the mean runs over valid elements only.
Tensor focal_loss(const Tensor& pred, const Tensor& target, FocalParams params = {},
                  const std::optional<Tensor>& valid = std::nullopt);

/// Mean binary cross-entropy between probabilities and {0,1} targets.
Tensor binary_cross_entropy(const Tensor& probs, const Tensor& targets);

/// Presence BCE over supervised channels (plus the trusty channel when enabled).
Tensor cls_loss(const SegOutputs& outputs, const LabelMap& labels, const ClassVocabulary& vocab,
                const LossOptions& options = {});

/// Full objective L_cls + α L_focal + β L_dice + γ L_dice(M_A, G_A). `labels`
/// is the training-time map (MASKED where annotations are hidden).
LossTerms total_loss(const SegOutputs& outputs, const LabelMap& labels,
                     const ClassVocabulary& vocab, const LossOptions& options = {});

}  // namespace tagclip
