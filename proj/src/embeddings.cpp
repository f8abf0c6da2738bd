#include "tagclip/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tagclip {

ClassVocabulary::ClassVocabulary(std::vector<std::string> names, std::vector<ClassId> seen,
                                 std::vector<ClassId> unseen)
    : names_(std::move(names)), seen_(std::move(seen)), unseen_(std::move(unseen)) {
  const auto c = static_cast<ClassId>(names_.size());
  if (seen_.empty()) throw std::invalid_argument("vocabulary needs at least one seen class");
  std::vector<int> hits(names_.size(), 0);
  for (auto id : seen_) {
    if (id < 0 || id >= c) throw std::invalid_argument("seen id out of range");
    ++hits[id];
  }
  for (auto id : unseen_) {
    if (id < 0 || id >= c) throw std::invalid_argument("unseen id out of range");
    ++hits[id];
  }
  if (std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; })) {
    throw std::invalid_argument("seen and unseen sets must partition the class ids");
  }
  std::sort(seen_.begin(), seen_.end());
  std::sort(unseen_.begin(), unseen_.end());
  seen_flag_.assign(names_.size(), false);
  for (auto id : seen_) seen_flag_[id] = true;
}

ClassVocabulary ClassVocabulary::permuted(const std::vector<ClassId>& perm) const {
  if (perm.size() != size()) throw std::invalid_argument("permutation size mismatch");
  std::vector<std::string> names(size());
  for (std::size_t c = 0; c < size(); ++c) names.at(perm[c]) = names_[c];
  std::vector<ClassId> seen, unseen;
  for (auto id : seen_) seen.push_back(perm[id]);
  for (auto id : unseen_) unseen.push_back(perm[id]);
  return {std::move(names), std::move(seen), std::move(unseen)};
}

Tensor normalize_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("normalize_rows: expected a matrix, got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += out[i * n + j] * out[i * n + j];
    const double inv = s > 0.0 ? 1.0 / std::sqrt(s) : 0.0;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] *= inv;
  }
  return Tensor::from(x.shape(), std::move(out));
}

namespace {

struct Rect {
  std::size_t r0, c0, rows, cols;
};

std::vector<Rect> guillotine_partition(GridShape grid, std::size_t regions, std::mt19937_64& rng) {
  std::vector<Rect> rects{{0, 0, grid.rows, grid.cols}};
  while (rects.size() < regions) {
    std::vector<std::size_t> splittable;
    for (std::size_t i = 0; i < rects.size(); ++i) {
      if (rects[i].rows >= 2 || rects[i].cols >= 2) splittable.push_back(i);
    }
    if (splittable.empty()) throw std::invalid_argument("grid too small for requested regions");
    std::uniform_int_distribution<std::size_t> pick(0, splittable.size() - 1);
    const std::size_t victim = splittable[pick(rng)];
    const Rect r = rects[victim];
    rects.erase(rects.begin() + static_cast<std::ptrdiff_t>(victim));
    bool horizontal;  // cut between rows
    if (r.rows >= 2 && r.cols >= 2) {
      horizontal = std::bernoulli_distribution(0.5)(rng);
    } else {
      horizontal = r.rows >= 2;
    }
    if (horizontal) {
      const std::size_t cut = std::uniform_int_distribution<std::size_t>(1, r.rows - 1)(rng);
      rects.push_back({r.r0, r.c0, cut, r.cols});
      rects.push_back({r.r0 + cut, r.c0, r.rows - cut, r.cols});
    } else {
      const std::size_t cut = std::uniform_int_distribution<std::size_t>(1, r.cols - 1)(rng);
      rects.push_back({r.r0, r.c0, r.rows, cut});
      rects.push_back({r.r0, r.c0 + cut, r.rows, r.cols - cut});
    }
  }
  return rects;
}

std::vector<double> gaussian_vector(std::size_t n, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = sigma * dist(rng);
  return v;
}

void normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (s == 0.0) return;
  const double inv = 1.0 / std::sqrt(s);
  for (double& x : v) x *= inv;
}

}  // namespace

ToyDataset generate_toy_dataset(const ToyDataConfig& cfg) {
  if (cfg.classes < 2) throw std::invalid_argument("toy dataset needs at least 2 classes");
  if (cfg.dim < 4) throw std::invalid_argument("toy dataset needs dim >= 4");
  if (!(cfg.noise >= 0.0)) throw std::invalid_argument("noise must be non-negative");
  if (cfg.unseen >= cfg.classes) throw std::invalid_argument("at least one class must be seen");
  if (cfg.min_regions < 1 || cfg.min_regions > cfg.max_regions) {
    throw std::invalid_argument("region range must satisfy 1 <= min <= max");
  }
  if (cfg.grid.count() < cfg.max_regions) {
    throw std::invalid_argument("grid " + std::to_string(cfg.grid.rows) + "x" +
                                std::to_string(cfg.grid.cols) + " too small to hold " +
                                std::to_string(cfg.max_regions) + " regions");
  }

  std::mt19937_64 rng(cfg.seed);
  const std::size_t C = cfg.classes, d = cfg.dim;

  std::vector<std::string> names;
  std::vector<ClassId> seen, unseen;
  for (std::size_t c = 0; c < C; ++c) {
    names.push_back("class_" + std::to_string(c));
    (c < C - cfg.unseen ? seen : unseen).push_back(static_cast<ClassId>(c));
  }

  std::vector<double> protos, text;
  for (std::size_t c = 0; c < C; ++c) {
    auto mu = gaussian_vector(d, 1.0, rng);
    normalize(mu);
    protos.insert(protos.end(), mu.begin(), mu.end());
  }
  const double text_sigma = cfg.noise / 2.0;
  for (std::size_t c = 0; c < C; ++c) {
    auto n = gaussian_vector(d, text_sigma, rng);
    for (std::size_t j = 0; j < d; ++j) n[j] += protos[c * d + j];
    normalize(n);
    text.insert(text.end(), n.begin(), n.end());
  }

  ToyDataset ds;
  ds.vocab = ClassVocabulary(std::move(names), std::move(seen), std::move(unseen));
  ds.prototypes = Tensor::from({C, d}, protos);
  const Tensor text_tokens = Tensor::from({C, d}, std::move(text));

  std::uniform_int_distribution<std::size_t> region_count(cfg.min_regions, cfg.max_regions);
  for (std::size_t s = 0; s < cfg.samples; ++s) {
    const std::size_t k = region_count(rng);
    const auto rects = guillotine_partition(cfg.grid, k, rng);

    std::vector<ClassId> order(C);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    LabelMap labels(cfg.grid.rows, cfg.grid.cols);
    for (std::size_t i = 0; i < rects.size(); ++i) {
      const ClassId cls = i < C ? order[i]
                                : static_cast<ClassId>(std::uniform_int_distribution<std::size_t>(0, C - 1)(rng));
      const auto& r = rects[i];
      for (std::size_t y = r.r0; y < r.r0 + r.rows; ++y)
        for (std::size_t x = r.c0; x < r.c0 + r.cols; ++x) labels(y, x) = cls;
    }

    const std::size_t N = cfg.grid.count();
    std::vector<double> patches;
    patches.reserve(N * d);
    std::vector<double> centroid(d, 0.0);
    for (std::size_t p = 0; p < N; ++p) {
      auto e = gaussian_vector(d, cfg.noise, rng);
      const auto cls = static_cast<std::size_t>(labels.labels[p]);
      for (std::size_t j = 0; j < d; ++j) e[j] += protos[cls * d + j];
      normalize(e);
      for (std::size_t j = 0; j < d; ++j) centroid[j] += e[j];
      patches.insert(patches.end(), e.begin(), e.end());
    }
    for (auto& v : centroid) v /= static_cast<double>(N);
    normalize(centroid);

    ToySample sample;
    sample.bundle.text_tokens = text_tokens;
    sample.bundle.global_token = Tensor::from({1, d}, std::move(centroid));
    sample.bundle.patch_embeddings = Tensor::from({N, d}, std::move(patches));
    sample.bundle.grid = cfg.grid;
    sample.bundle.patch_size = 1;
    sample.labels = std::move(labels);
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

ToySample mask_unseen_annotations(const ToySample& sample, const ClassVocabulary& vocab) {
  ToySample out = sample;
  for (auto& l : out.labels.labels) {
    if (vocab.is_unseen(l)) l = vocab.masked();
  }
  return out;
}

}  // namespace tagclip
