#include <cmath>

#include "doctest.h"
#include "tagclip/head.hpp"
#include "tagclip/losses.hpp"
#include "tagclip/ops.hpp"
#include "test_util.hpp"

using namespace tagclip;

namespace {

// 4 classes: 0,1 seen; 2,3 unseen; MASKED = 4.
const ClassVocabulary kVocab({"a", "b", "c", "d"}, {0, 1}, {2, 3});

/// Hand-built outputs: `raw` is C′×H×W, `trusty` H×W, `presence` C′+1.
SegOutputs outputs(std::vector<ClassId> ids, GridShape grid, Tensor raw, Tensor trusty, Tensor presence) {
  SegOutputs o;
  o.class_ids = std::move(ids);
  o.grid = grid;
  o.raw = std::move(raw);
  o.trusty = std::move(trusty);
  o.presence = std::move(presence);
  return o;
}

LabelMap labels_2x2(std::vector<ClassId> v) {
  LabelMap m(2, 2);
  m.labels = std::move(v);
  return m;
}

double bce(double p, double y) { return -(y * std::log(p) + (1 - y) * std::log(1 - p)); }

}  // namespace

TEST_SUITE("pseudo trusty labels") {
  TEST_CASE("all seen gives ones, all masked gives zeros") {
    const Tensor ones = make_pseudo_trusty_labels(labels_2x2({0, 1, 1, 0}), kVocab);
    const Tensor zeros = make_pseudo_trusty_labels(labels_2x2({4, 4, 4, 4}), kVocab);
    for (double v : ones.values()) CHECK(v == 1.0);
    for (double v : zeros.values()) CHECK(v == 0.0);
  }

  TEST_CASE("mixed example") {
    const Tensor g = make_pseudo_trusty_labels(labels_2x2({0, 2, 1, 4}), kVocab);
    CHECK(g.shape() == Shape{2, 2});
    CHECK(std::vector<double>(g.values().begin(), g.values().end()) == std::vector<double>{1, 0, 1, 0});
  }

  TEST_CASE("unknown label throws") {
    CHECK_THROWS_AS(make_pseudo_trusty_labels(labels_2x2({0, 5, 1, 1}), kVocab), std::invalid_argument);
    CHECK_THROWS_AS(make_pseudo_trusty_labels(labels_2x2({0, -1, 1, 1}), kVocab), std::invalid_argument);
  }

  TEST_CASE("invariant to relabelling within each split") {
    const Tensor a = make_pseudo_trusty_labels(labels_2x2({0, 2, 1, 3}), kVocab);
    const Tensor b = make_pseudo_trusty_labels(labels_2x2({1, 3, 0, 2}), kVocab);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  }
}

TEST_SUITE("dice") {
  TEST_CASE("identical binary maps") {
    std::vector<double> v(2000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i % 3 == 0 ? 0.0 : 1.0;
    const Tensor t = Tensor::from({2000}, v);
    const double loss = dice_loss(t, t, 1.0).item();
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-3);
    CHECK(dice_loss(t, t, 1e-12).item() < 1e-12);
  }

  TEST_CASE("disjoint maps approach 1") {
    const Tensor p = Tensor::vector({1, 1, 0, 0}), t = Tensor::vector({0, 0, 1, 1});
    CHECK(std::abs(dice_loss(p, t, 1e-12).item() - 1.0) < 1e-9);
  }

  TEST_CASE("half overlap") {
    CHECK(std::abs(dice_loss(Tensor::vector({0.5, 0.5}), Tensor::vector({1, 0}), 1e-12).item() - 0.5) < 1e-9);
  }

  TEST_CASE("per-channel dice averages channels") {
    const Tensor p = Tensor::matrix({{1, 1, 0, 0}, {0.5, 0.5, 0, 0}});
    const Tensor t = Tensor::matrix({{0, 0, 1, 1}, {1, 0, 0, 0}});
    CHECK(std::abs(dice_loss_per_channel(p, t, 1e-12).item() - 0.75) < 1e-9);
  }

  TEST_CASE("range and shape errors") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
      const Tensor p = testutil::uniform({10}, rng, 0, 1);
      std::vector<double> t(10);
      for (auto& x : t) x = std::bernoulli_distribution(0.5)(rng);
      const double l = dice_loss(p, Tensor::from({10}, t)).item();
      CHECK(l >= 0.0);
      CHECK(l <= 1.0);
    }
    CHECK_THROWS_AS(dice_loss(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  }
}

TEST_SUITE("focal") {
  TEST_CASE("alpha 0.5, gamma 0 is half the cross-entropy") {
    std::mt19937_64 rng(2);
    const Tensor p = testutil::uniform({30}, rng, 0.01, 0.99);
    std::vector<double> tv(30);
    for (auto& x : tv) x = std::bernoulli_distribution(0.4)(rng);
    const Tensor t = Tensor::from({30}, tv);
    const double f = focal_loss(p, t, {0.5, 0.0}).item();
    CHECK(std::abs(f - 0.5 * binary_cross_entropy(p, t).item()) < 1e-9);
  }

  TEST_CASE("p=0.5, target 1") {
    CHECK(std::abs(focal_loss(Tensor::vector({0.5}), Tensor::vector({1})).item() - 0.043321698784996581) <
          1e-12);
  }

  TEST_CASE("confident correct predictions vanish") {
    CHECK(focal_loss(Tensor::vector({1.0, 0.0}), Tensor::vector({1, 0})).item() < 1e-12);
    CHECK(focal_loss(Tensor::vector({1.0 - 1e-4}), Tensor::vector({1})).item() < 1e-9);
  }

  TEST_CASE("valid mask averages over valid elements only") {
    const Tensor p = Tensor::vector({0.5, 0.9}), t = Tensor::vector({1, 0});
    const double masked = focal_loss(p, t, {}, Tensor::vector({1, 0})).item();
    CHECK(masked == focal_loss(Tensor::vector({0.5}), Tensor::vector({1})).item());
    CHECK(focal_loss(p, t, {}, Tensor::vector({0, 0})).item() == 0.0);
  }
}

TEST_SUITE("cls") {
  const GridShape g{2, 2};

  TEST_CASE("P=0.5 everywhere gives ln 2") {
    const SegOutputs o = outputs({0, 1}, g, Tensor::full({2, 2, 2}, 0.5), Tensor::full({2, 2}, 0.5),
                                 Tensor::full({3}, 0.5));
    CHECK(std::abs(cls_loss(o, labels_2x2({0, 0, 4, 4}), kVocab).item() - std::log(2.0)) < 1e-12);
  }

  TEST_CASE("single included channel") {
    LossOptions opt;
    opt.trusty_in_cls = false;
    SegOutputs o = outputs({0}, g, Tensor::full({1, 2, 2}, 0.5), Tensor::full({2, 2}, 0.5),
                           Tensor::vector({0.75, 0.5}));
    CHECK(std::abs(cls_loss(o, labels_2x2({0, 1, 1, 1}), kVocab, opt).item() + std::log(0.75)) < 1e-12);
  }

  TEST_CASE("indicators at the clamp bounds") {
    const SegOutputs o = outputs({0, 1, 2}, g, Tensor::full({3, 2, 2}, 0.5), Tensor::full({2, 2}, 0.5),
                                 Tensor::vector({1.0, 0.0, 0.3, 1.0}));
    CHECK(cls_loss(o, labels_2x2({0, 0, 4, 4}), kVocab).item() < 1e-6);
  }

  TEST_CASE("targets follow presence; unseen excluded unless supervised") {
    const Tensor pres = Tensor::vector({0.6, 0.3, 0.8, 0.7});
    const SegOutputs o = outputs({0, 1, 2}, g, Tensor::full({3, 2, 2}, 0.5), Tensor::full({2, 2}, 0.5), pres);
    const LabelMap l = labels_2x2({0, 2, 2, 0});
    const double ind = cls_loss(o, l, kVocab).item();
    CHECK(std::abs(ind - (bce(0.6, 1) + bce(0.3, 0) + bce(0.7, 1)) / 3) < 1e-12);
    LossOptions sup;
    sup.unseen = UnseenSupervision::full;
    CHECK(std::abs(cls_loss(o, l, kVocab, sup).item() -
                   (bce(0.6, 1) + bce(0.3, 0) + bce(0.8, 1) + bce(0.7, 1)) / 4) < 1e-12);
  }
}

TEST_SUITE("total") {
  SegOutputs random_outputs(std::mt19937_64& rng, std::vector<ClassId> ids, GridShape g) {
    const std::size_t c = ids.size();
    return outputs(std::move(ids), g, testutil::uniform({c, g.rows, g.cols}, rng, 0.05, 0.95),
                   testutil::uniform({g.rows, g.cols}, rng, 0.05, 0.95), testutil::uniform({c + 1}, rng, 0.05, 0.95));
  }

  TEST_CASE("report recomposes exactly") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
      const SegOutputs o = random_outputs(rng, {0, 1, 2, 3}, {3, 3});
      LabelMap l(3, 3);
      for (auto& x : l.labels) x = std::uniform_int_distribution<ClassId>(0, 4)(rng);
      LossOptions opt;
      opt.weights = {std::uniform_real_distribution<double>(0, 30)(rng), 1.3, 7.0};
      const LossReport r = total_loss(o, l, kVocab, opt).report();
      CHECK(r.total == r.cls + opt.weights.alpha * r.focal + opt.weights.beta * r.dice +
                           opt.weights.gamma * r.trusty);
      for (double v : {r.cls, r.focal, r.dice, r.trusty}) CHECK(v >= 0.0);
      CHECK(r.dice <= 1.0);
      CHECK(r.trusty <= 1.0);
    }
  }

  TEST_CASE("mask terms use seen channels against binary class maps") {
    std::mt19937_64 rng(4);
    const SegOutputs o = random_outputs(rng, {0, 1, 2}, {2, 2});
    const LabelMap l = labels_2x2({0, 4, 1, 0});
    const LossTerms t = total_loss(o, l, kVocab);
    const Tensor pred = reshape(slice_rows(o.raw, 0, 2), {2, 4});
    const Tensor target = Tensor::matrix({{1, 0, 0, 1}, {0, 0, 1, 0}});
    CHECK(t.focal.item() == focal_loss(pred, target).item());
    CHECK(t.dice.item() == dice_loss_per_channel(pred, target).item());
    CHECK(t.trusty.item() == dice_loss(*o.trusty, Tensor::matrix({{1, 0}, {1, 1}})).item());
  }

  TEST_CASE("pseudo mode ignores MASKED cells on unseen channels only") {
    std::mt19937_64 rng(5);
    const SegOutputs o = random_outputs(rng, {0, 2}, {2, 2});
    const LabelMap l = labels_2x2({0, 4, 2, 4});
    LossOptions opt;
    opt.unseen = UnseenSupervision::pseudo;
    const LossTerms t = total_loss(o, l, kVocab, opt);
    const Tensor pred = reshape(o.raw, {2, 4});
    const Tensor target = Tensor::matrix({{1, 0, 0, 0}, {0, 0, 1, 0}});
    const Tensor valid = Tensor::matrix({{1, 1, 1, 1}, {1, 0, 1, 0}});
    CHECK(t.focal.item() == focal_loss(pred, target, {}, valid).item());
    CHECK(t.dice.item() == dice_loss_per_channel(pred, target, 1.0, valid).item());
    opt.unseen = UnseenSupervision::full;
    CHECK(total_loss(o, l, kVocab, opt).focal.item() == focal_loss(pred, target).item());
  }

  TEST_CASE("perfect saturated predictions") {
    const LabelMap l = labels_2x2({0, 1, 1, 4});
    const Tensor raw = Tensor::from({2, 2, 2}, {1, 0, 0, 0, 0, 1, 1, 0});
    const SegOutputs o = outputs({0, 1}, {2, 2}, raw, Tensor::matrix({{1, 1}, {1, 0}}), Tensor::vector({1, 1, 1}));
    LossOptions opt;
    opt.dice_eps = 1e-9;
    const LossReport r = total_loss(o, l, kVocab, opt).report();
    for (double v : {r.cls, r.focal, r.dice, r.trusty}) CHECK(v < 1e-3);
  }

  TEST_CASE("gamma 0 matches dropping the trusty term") {
    std::mt19937_64 rng(6);
    const SegOutputs o = random_outputs(rng, {0, 1}, {2, 2});
    LossOptions a;
    a.weights.gamma = 0.0;
    LossOptions b;
    b.supervise_trusty = false;
    const LabelMap l = labels_2x2({0, 1, 4, 1});
    CHECK(total_loss(o, l, kVocab, a).total.item() == total_loss(o, l, kVocab, b).total.item());
  }

  TEST_CASE("label map must match the grid") {
    std::mt19937_64 rng(7);
    CHECK_THROWS_AS(total_loss(random_outputs(rng, {0}, {3, 3}), labels_2x2({0, 0, 0, 0}), kVocab), ShapeError);
  }
}

TEST_CASE("trusty pathway isolation on t_A") {
  std::mt19937_64 rng(8);
  HeadConfig c;
  c.dim = 8;
  c.heads = 2;
  c.trusty_learner = false;
  const HeadParams p = init_head_params(c, 3);
  EmbeddingBundle b;
  b.text_tokens = normalize_rows(testutil::uniform({4, 8}, rng));
  b.global_token = normalize_rows(testutil::uniform({1, 8}, rng));
  b.patch_embeddings = normalize_rows(testutil::uniform({6, 8}, rng));
  b.grid = {2, 3};
  LabelMap l(2, 3);
  l.labels = {0, 0, 1, 4, 4, 1};
  const std::vector<ClassId> ids{0, 1};

  auto t_grad = [&](double gamma, bool trusty_in_cls) {
    LossOptions opt;
    opt.weights.gamma = gamma;
    opt.trusty_in_cls = trusty_in_cls;
    p.zero_grad();
    backward(total_loss(head_forward(p, b, ids), l, kVocab, opt).total);
    double n = 0;
    for (double v : p.trusty_token.grad()) n += v * v;
    return std::sqrt(n);
  };
  CHECK(t_grad(10.0, false) > 1e-6);
  CHECK(t_grad(0.0, false) == 0.0);
  CHECK(t_grad(0.0, true) > 0.0);
}
