#include "tagclip/losses.hpp"

#include <algorithm>
#include <stdexcept>

#include "tagclip/ops.hpp"

namespace tagclip {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": prediction " + shape_str(a.shape()) + " vs target " +
                     shape_str(b.shape()));
  }
}

struct ChannelPlan {
  std::vector<std::size_t> rows;   // raw channels that receive mask/cls loss
  std::vector<double> targets;     // rows.size() × N
  std::vector<double> valid;       // rows.size() × N
  std::vector<double> presence;    // rows.size()
  bool any_ignored = false;
};

ChannelPlan plan_channels(const SegOutputs& out, const LabelMap& labels,
                          const ClassVocabulary& vocab, UnseenSupervision unseen) {
  const std::size_t n = out.grid.count();
  if (labels.size() != n) {
    throw ShapeError("label map has " + std::to_string(labels.size()) + " cells, outputs have " +
                     std::to_string(n));
  }
  ChannelPlan plan;
  for (std::size_t i = 0; i < out.class_ids.size(); ++i) {
    const ClassId c = out.class_ids[i];
    const bool seen = vocab.is_seen(c);
    if (!seen && unseen == UnseenSupervision::excluded) continue;
    const bool ignore_masked = !seen && unseen == UnseenSupervision::pseudo;
    plan.rows.push_back(i);
    bool present = false;
    for (std::size_t p = 0; p < n; ++p) {
      const ClassId l = labels.labels[p];
      const bool hit = l == c;
      present = present || hit;
      plan.targets.push_back(hit ? 1.0 : 0.0);
      const bool ignored = ignore_masked && l == vocab.masked();
      plan.any_ignored = plan.any_ignored || ignored;
      plan.valid.push_back(ignored ? 0.0 : 1.0);
    }
    plan.presence.push_back(present ? 1.0 : 0.0);
  }
  return plan;
}

}  // namespace

LossReport LossTerms::report() const {
  return {cls.item(), focal.item(), dice.item(), trusty.item(), total.item()};
}

Tensor make_pseudo_trusty_labels(const LabelMap& labels, const ClassVocabulary& vocab) {
  std::vector<double> g(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId l = labels.labels[i];
    if (l < 0 || l > vocab.masked()) {
      throw std::invalid_argument("label " + std::to_string(l) + " is not a class id or MASKED");
    }
    g[i] = vocab.is_seen(l) ? 1.0 : 0.0;
  }
  return Tensor::from({labels.rows, labels.cols}, std::move(g));
}

Tensor dice_loss(const Tensor& pred, const Tensor& target, double eps) {
  require_same_shape(pred, target, "dice_loss");
  const Tensor inter = sum(mul(pred, target));
  const Tensor num = add_scalar(scale(inter, 2.0), eps);
  const Tensor den = add_scalar(add(sum(pred), sum(target)), eps);
  return one_minus(div(num, den));
}

Tensor dice_loss_per_channel(const Tensor& pred, const Tensor& target, double eps,
                             const std::optional<Tensor>& valid) {
  require_same_shape(pred, target, "dice_loss_per_channel");
  Tensor p = pred;
  Tensor t = target;
  if (valid) {
    require_same_shape(pred, *valid, "dice_loss_per_channel (valid)");
    p = mul(p, *valid);
    t = mul(t, *valid);
  }
  const Tensor inter = sum_rows(mul(p, t));
  const Tensor num = add_scalar(scale(inter, 2.0), eps);
  const Tensor den = add_scalar(add(sum_rows(p), sum_rows(t)), eps);
  return mean(one_minus(div(num, den)));
}

Tensor focal_loss(const Tensor& pred, const Tensor& target, FocalParams fp,
                  const std::optional<Tensor>& valid) {
  require_same_shape(pred, target, "focal_loss");
  const std::size_t n = pred.numel();
  std::vector<double> alpha_t(n);
  const auto tv = target.values();
  for (std::size_t i = 0; i < n; ++i) alpha_t[i] = tv[i] > 0.5 ? fp.alpha : 1.0 - fp.alpha;

  const Tensor p = clamp(pred, kProbClamp, 1.0 - kProbClamp);
  // p_t = t·p + (1−t)(1−p)
  const Tensor pt = add(mul(target, p), mul(one_minus(target), one_minus(p)));
  const Tensor modulating = pow_scalar(one_minus(pt), fp.gamma);
  const Tensor weighted = mul(Tensor::from(pred.shape(), std::move(alpha_t)), modulating);
  Tensor per_elem = scale(mul(weighted, log(pt)), -1.0);
  if (!valid) return mean(per_elem);
  require_same_shape(pred, *valid, "focal_loss (valid)");
  double count = 0.0;
  for (double v : valid->values()) count += v;
  if (count == 0.0) return Tensor::scalar(0.0);
  return scale(sum(mul(per_elem, *valid)), 1.0 / count);
}

Tensor binary_cross_entropy(const Tensor& probs, const Tensor& targets) {
  require_same_shape(probs, targets, "binary_cross_entropy");
  const Tensor p = clamp(probs, kProbClamp, 1.0 - kProbClamp);
  const Tensor ll = add(mul(targets, log(p)), mul(one_minus(targets), log(one_minus(p))));
  return scale(mean(ll), -1.0);
}

namespace {

Tensor cls_from_plan(const SegOutputs& out, const ChannelPlan& plan, const LabelMap& labels,
                     const ClassVocabulary& vocab, bool trusty_in_cls) {
  std::vector<std::size_t> rows = plan.rows;
  std::vector<double> y = plan.presence;
  if (trusty_in_cls && out.trusty) {
    rows.push_back(out.class_ids.size());
    const bool any_seen = std::any_of(labels.labels.begin(), labels.labels.end(),
                                      [&](ClassId l) { return vocab.is_seen(l); });
    y.push_back(any_seen ? 1.0 : 0.0);
  }
  if (rows.empty()) return Tensor::scalar(0.0);
  const std::size_t k = rows.size();
  return binary_cross_entropy(gather_rows(out.presence, rows), Tensor::from({k}, std::move(y)));
}

}  // namespace

Tensor cls_loss(const SegOutputs& out, const LabelMap& labels, const ClassVocabulary& vocab,
                const LossOptions& options) {
  const auto plan = plan_channels(out, labels, vocab, options.unseen);
  return cls_from_plan(out, plan, labels, vocab, options.trusty_in_cls);
}

LossTerms total_loss(const SegOutputs& out, const LabelMap& labels, const ClassVocabulary& vocab,
                     const LossOptions& options) {
  const auto plan = plan_channels(out, labels, vocab, options.unseen);
  const std::size_t n = out.grid.count();
  const std::size_t k = plan.rows.size();

  LossTerms terms;
  terms.cls = cls_from_plan(out, plan, labels, vocab, options.trusty_in_cls);
  if (k > 0) {
    const Tensor pred = reshape(gather_rows(out.raw, plan.rows), {k, n});
    const Tensor target = Tensor::from({k, n}, plan.targets);
    std::optional<Tensor> valid;
    if (plan.any_ignored) valid = Tensor::from({k, n}, plan.valid);
    terms.focal = focal_loss(pred, target, options.focal, valid);
    terms.dice = dice_loss_per_channel(pred, target, options.dice_eps, valid);
  } else {
    terms.focal = Tensor::scalar(0.0);
    terms.dice = Tensor::scalar(0.0);
  }
  if (out.trusty && options.supervise_trusty) {
    terms.trusty = dice_loss(*out.trusty, make_pseudo_trusty_labels(labels, vocab), options.dice_eps);
  } else {
    terms.trusty = Tensor::scalar(0.0);
  }
  const auto& w = options.weights;
  terms.total = add(add(add(terms.cls, scale(terms.focal, w.alpha)), scale(terms.dice, w.beta)),
                    scale(terms.trusty, w.gamma));
  return terms;
}

}  // namespace tagclip
