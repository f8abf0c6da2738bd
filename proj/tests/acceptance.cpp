// Acceptance run: one PASS/FAIL line per criterion, details on the following lines.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>

#include "fusion_checks.hpp"
#include "golden_cases.hpp"
#include "head_gradcheck.hpp"
#include "metric_checks.hpp"
#include "oracles.hpp"
#include "p6_checks.hpp"
#include "tagclip/harness.hpp"
#include "tagclip/image_export.hpp"
#include "tagclip/ops.hpp"
#include "tagclip/tensor_io.hpp"
#include "test_util.hpp"

using namespace tagclip;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool ok, const std::string& what) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

EmbeddingBundle random_bundle(std::size_t C, std::size_t d, GridShape grid, std::mt19937_64& rng) {
  EmbeddingBundle b;
  b.text_tokens = normalize_rows(testutil::uniform({C, d}, rng));
  b.global_token = normalize_rows(testutil::uniform({1, d}, rng));
  b.patch_embeddings = normalize_rows(testutil::uniform({grid.count(), d}, rng));
  b.grid = grid;
  return b;
}

void gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  HeadConfig c;
  c.dim = 8;
  c.heads = 2;
  const HeadParams p = init_head_params(c, 7);
  const EmbeddingBundle b = random_bundle(4, 8, {4, 4}, rng);
  const ClassVocabulary vocab({"a", "b", "c", "d"}, {0, 1}, {2, 3});
  LabelMap labels(4, 4);
  for (auto& l : labels.labels) l = std::uniform_int_distribution<ClassId>(0, 3)(rng);
  LossOptions opt;
  opt.unseen = UnseenSupervision::full;
  double worst = 0;
  std::string worst_name;
  bool ok = true, has_token = false;
  std::size_t vanishing = 0;
  for (const auto& e : testutil::head_grad_errors(p, b, {0, 1, 2, 3}, labels, vocab, opt)) {
    has_token = has_token || e.name == "trusty_token";
    if (e.vanishing()) {
      ++vanishing;
      std::printf("  %-28s gradient identically zero (|analytic| %.1e, |numeric| %.1e)\n", e.name.c_str(),
                  e.analytic_norm, e.numeric_norm);
    } else if (e.rel_error > worst) {
      worst = e.rel_error;
      worst_name = e.name;
    }
    ok = ok && e.passes(1e-4);
  }
  const double secs = seconds_since(t0);
  ok = ok && has_token && secs < 30.0;
  verdict(1, ok, fmt("max rel error %.2e", worst) + " (" + worst_name + "), " +
                     std::to_string(vanishing) + " vanishing tensor(s), " + fmt("%.1f s", secs));
}

void closed_form_reduction() {
  std::mt19937_64 rng(102);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    HeadConfig c;
    c.dim = 8 + 4 * (i % 4);
    HeadParams p = init_head_params(c, static_cast<std::uint64_t>(i));
    set_identity_learner(p);
    const std::size_t rows = 2 + static_cast<std::size_t>(i % 9);
    const Tensor desc = testutil::uniform({rows, 2 * c.dim}, rng);
    const auto& align = *p.learner.align[static_cast<std::size_t>(LearnerInput::descriptor)];
    const oracle::Mat want = oracle::closed_form_learner(oracle::affine(oracle::to_mat(desc), align),
                                                         p.learner.norm, c.norm_eps);
    worst = std::max(worst, oracle::max_diff(want, trusty_learner(desc, p)));
  }
  verdict(2, worst <= 1e-9, fmt("max abs diff %.2e over 100 instances", worst));
}

void metric_oracle() {
  std::mt19937_64 rng(103);
  const std::size_t bad = testutil::metric_oracle_mismatches(200, rng);
  const double h1 = 100 * harmonic_iou(0.935, 0.852), h2 = 100 * harmonic_iou(0.919, 0.778);
  const bool ok = bad == 0 && std::abs(h1 - 89.2) <= 0.05 && std::abs(h2 - 84.3) <= 0.05;
  verdict(3, ok, std::to_string(bad) + "/200 mismatches, " + fmt("hIoU %.3f and %.3f", h1, h2));
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

void directional_ablation() {
  const auto t0 = Clock::now();
  std::vector<double> a, b, d;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig base;
    base.seed = seed;
    const Dataset data = make_dataset(base);
    const auto rows = run_ablation_grid(base, data, {});
    a.push_back(rows.front().result.report.miou_unseen);
    b.push_back(rows[1].result.report.miou_unseen);
    d.push_back(rows.back().result.report.miou_unseen);
    std::printf("  seed %llu: (a) %.4f (b) %.4f (d) %.4f\n", static_cast<unsigned long long>(seed), a.back(),
                b.back(), d.back());
  }
  const double secs = seconds_since(t0);
  const bool ok = mean(d) > mean(a) && mean(b) < mean(a) && secs < 900.0;
  verdict(4, ok, fmt("mean mIoU(U): (a) %.4f (b) %.4f (d) %.4f, ", mean(a), mean(b), mean(d)) +
                     fmt("%.0f s", secs));
}

void fusion_contracts() {
  std::mt19937_64 rng(105);
  std::size_t constant = 0;
  for (int i = 0; i < 20; ++i) constant += testutil::fusion_constant_case_violations(rng);
  const std::size_t mono = testutil::fusion_monotonicity_violations(1000, rng);
  verdict(5, constant == 0 && mono == 0,
          std::to_string(constant) + " constant-case violations, " + std::to_string(mono) +
              "/1000 monotonicity violations");
}

void loss_identities() {
  std::mt19937_64 rng(106);

  // dice(p, p) shrinks with eps.
  std::vector<double> bin(500);
  for (auto& x : bin) x = std::bernoulli_distribution(0.3)(rng);
  const Tensor p = Tensor::from({500}, bin);
  const double d1 = dice_loss(p, p, 1.0).item(), d2 = dice_loss(p, p, 1e-6).item(),
               d3 = dice_loss(p, p, 1e-12).item();
  const bool dice_ok = d1 >= d2 && d2 >= d3 && d3 < 1e-12;

  // focal(α=0.5, γ=0) = 0.5·BCE
  double focal_gap = 0;
  for (int i = 0; i < 20; ++i) {
    const Tensor q = testutil::uniform({40}, rng, 0.01, 0.99);
    std::vector<double> t(40);
    for (auto& x : t) x = std::bernoulli_distribution(0.5)(rng);
    const Tensor tt = Tensor::from({40}, t);
    focal_gap = std::max(focal_gap, std::abs(focal_loss(q, tt, {0.5, 0.0}).item() -
                                             0.5 * binary_cross_entropy(q, tt).item()));
  }

  // Exact recomposition and t_A isolation on real head outputs.
  HeadConfig c;
  c.dim = 8;
  c.heads = 2;
  c.trusty_learner = false;
  const HeadParams hp = init_head_params(c, 3);
  const EmbeddingBundle b = random_bundle(4, 8, {3, 3}, rng);
  const ClassVocabulary vocab({"a", "b", "c", "d"}, {0, 1}, {2, 3});
  LabelMap l(3, 3);
  l.labels = {0, 0, 1, 4, 4, 1, 0, 4, 1};
  const std::vector<ClassId> ids{0, 1};
  bool recompose = true;
  for (int i = 0; i < 20; ++i) {
    LossOptions opt;
    opt.weights = {std::uniform_real_distribution<double>(0, 30)(rng),
                   std::uniform_real_distribution<double>(0, 3)(rng),
                   std::uniform_real_distribution<double>(0, 20)(rng)};
    const LossReport r = total_loss(head_forward(hp, b, ids), l, vocab, opt).report();
    recompose = recompose && r.total == r.cls + opt.weights.alpha * r.focal + opt.weights.beta * r.dice +
                                            opt.weights.gamma * r.trusty;
  }
  auto token_grad = [&](double gamma) {
    LossOptions opt;
    opt.weights.gamma = gamma;
    opt.trusty_in_cls = false;
    hp.zero_grad();
    backward(total_loss(head_forward(hp, b, ids), l, vocab, opt).total);
    double n = 0;
    for (double v : hp.trusty_token.grad()) n += v * v;
    return std::sqrt(n);
  };
  const double g0 = token_grad(0.0), g10 = token_grad(10.0);
  const bool ok = dice_ok && focal_gap <= 1e-9 && recompose && g0 == 0.0 && g10 > 0.0;
  verdict(6, ok, fmt("dice(p,p) %.1e at eps 1e-12, focal gap %.1e, ", d3, focal_gap) +
                     (recompose ? "recomposition exact, " : "recomposition INEXACT, ") +
                     fmt("|dL/dt_A| %.1e at gamma 0 and %.1e at gamma 10", g0, g10));
}

bool same_run(const TrainOutput& x, const TrainOutput& y) {
  const auto& a = x.result.trace;
  const auto& b = y.result.trace;
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].total != b[i].total || a[i].cls != b[i].cls || a[i].focal != b[i].focal || a[i].dice != b[i].dice ||
        a[i].trusty != b[i].trusty)
      return false;
  const auto pa = x.params.named_parameters(), pb = y.params.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto va = pa[i].second.values(), vb = pb[i].second.values();
    if (!std::equal(va.begin(), va.end(), vb.begin(), vb.end())) return false;
  }
  return x.result.pseudo_pixels == y.result.pseudo_pixels &&
         x.result.report.class_iou == y.result.report.class_iou;
}

void determinism_and_formats() {
  RunConfig c;
  c.steps = 60;
  c.protocol = Protocol::transductive;
  const Dataset d = make_dataset(c);
  const bool det = same_run(train(c, d), train(c, d));

  std::size_t golden_bad = 0;
  for (const auto& g : golden::cases()) {
    const std::string bytes = golden::slurp(std::string(GOLDEN_DIR) + "/" + g.file);
    const NamedTensor t = decode_tensor(bytes);
    std::vector<std::uint64_t> want, got;
    for (double v : g.values) want.push_back(golden::bits_of(v));
    for (double v : t.tensor.values()) got.push_back(golden::bits_of(v));
    const auto indep = golden::parse(bytes);
    const bool ok = t.name == g.name && got == want && encode_tensor(t.name, t.tensor) == bytes && indep &&
                    indep->bits == want;
    golden_bad += !ok;
  }

  std::mt19937_64 rng(107);
  std::size_t p6_bad = 0;
  const fs::path dir = fs::temp_directory_path() / "tagclip_acceptance";
  fs::create_directories(dir);
  for (int i = 0; i < 20; ++i) {
    LabelMap m(3 + i % 5, 4 + i % 7);
    for (auto& l : m.labels) l = std::uniform_int_distribution<ClassId>(0, 255)(rng);
    const fs::path file = dir / ("m" + std::to_string(i) + ".ppm");
    export_label_image(m, file);
    const auto back = testutil::read_p6_labels(golden::slurp(file.string()));
    p6_bad += !(back && *back == m && fs::file_size(file) == encode_label_image(m).size());
  }
  const bool pixel = encode_label_image(LabelMap(1, 1, 0)) == std::string("P6\n1 1\n255\n") + "\x0b\x1d\x2f";
  fs::remove_all(dir);
  verdict(7, det && golden_bad == 0 && p6_bad == 0 && pixel,
          std::string(det ? "repeat runs bit-identical" : "repeat runs DIFFER") + ", " +
              std::to_string(golden_bad) + " golden TGT1 mismatches, " + std::to_string(p6_bad) +
              "/20 P6 round-trip failures");
}

void self_training_sanity() {
  std::vector<double> ind, st;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig c;
    c.seed = seed;
    const Dataset d = make_dataset(c);
    ind.push_back(train(c, d).result.report.miou_unseen);
    c.protocol = Protocol::transductive;
    const RunResult r = train(c, d).result;
    st.push_back(r.report.miou_unseen);
    const std::size_t pseudo = std::accumulate(r.pseudo_pixels.begin(), r.pseudo_pixels.end(), std::size_t{0});
    std::printf("  seed %llu: inductive %.4f transductive %.4f (%zu pseudo-labelled cells)\n",
                static_cast<unsigned long long>(seed), ind.back(), st.back(), pseudo);
  }
  verdict(8, mean(st) >= mean(ind),
          fmt("mean mIoU(U): transductive %.4f vs inductive %.4f", mean(st), mean(ind)));
}

}  // namespace

int main() {
  gradient_correctness();
  closed_form_reduction();
  metric_oracle();
  directional_ablation();
  fusion_contracts();
  loss_identities();
  determinism_and_formats();
  self_training_sanity();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
