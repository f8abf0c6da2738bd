#include "tagclip/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "tagclip/inference.hpp"
#include "tagclip/ops.hpp"
#include "tagclip/tensor_io.hpp"

namespace tagclip {

namespace fs = std::filesystem;

Dataset make_dataset(const RunConfig& config) {
  config.validate();
  ToyDataset toy = generate_toy_dataset(config.data_config());
  const auto n = toy.samples.size();
  auto n_test = static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  Dataset d;
  d.vocab = std::move(toy.vocab);
  d.train.assign(toy.samples.begin(), toy.samples.end() - static_cast<std::ptrdiff_t>(n_test));
  d.test.assign(toy.samples.end() - static_cast<std::ptrdiff_t>(n_test), toy.samples.end());
  return d;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// Training

LossOptions loss_options(const RunConfig& config, UnseenSupervision unseen) {
  LossOptions o;
  o.weights = config.weights;
  o.unseen = unseen;
  o.supervise_trusty = config.trusty_supervision;
  return o;
}

std::vector<ClassId> training_classes(const ClassVocabulary& vocab, Protocol protocol) {
  if (protocol == Protocol::inductive) return vocab.seen();
  std::vector<ClassId> all(vocab.size());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

LabelMap downsample_labels(const LabelMap& labels, GridShape grid) {
  if (labels.rows == grid.rows && labels.cols == grid.cols) return labels;
  if (grid.rows == 0 || grid.cols == 0 || labels.rows % grid.rows != 0 ||
      labels.cols % grid.cols != 0 || labels.rows / grid.rows != labels.cols / grid.cols) {
    throw ShapeError("label map " + std::to_string(labels.rows) + "x" + std::to_string(labels.cols) +
                     " is not a patch multiple of grid " + std::to_string(grid.rows) + "x" +
                     std::to_string(grid.cols));
  }
  const std::size_t p = labels.rows / grid.rows;
  LabelMap out(grid.rows, grid.cols);
  std::map<ClassId, std::size_t> votes;
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      votes.clear();
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x) ++votes[labels(r * p + y, c * p + x)];
      // std::map iterates in id order, so the first maximum is the lowest id.
      auto best = votes.begin();
      for (auto it = votes.begin(); it != votes.end(); ++it)
        if (it->second > best->second) best = it;
      out(r, c) = best->first;
    }
  }
  return out;
}

LabelMap training_labels(const ToySample& sample, const ClassVocabulary& vocab, Protocol protocol) {
  LabelMap labels = downsample_labels(sample.labels, sample.bundle.grid);
  if (protocol == Protocol::supervised) return labels;
  for (auto& l : labels.labels)
    if (vocab.is_unseen(l)) l = vocab.masked();
  return labels;
}

namespace {

std::vector<Tensor> trainable(const HeadParams& params) {
  std::vector<Tensor> out;
  for (auto& [name, t] : params.named_parameters()) out.push_back(t);
  return out;
}

LossReport accumulate(LossReport acc, const LossReport& r, double w) {
  acc.cls += w * r.cls;
  acc.focal += w * r.focal;
  acc.dice += w * r.dice;
  acc.trusty += w * r.trusty;
  acc.total += w * r.total;
  return acc;
}

}  // namespace

std::size_t assign_pseudo_labels(LabelMap& labels, const SegOutputs& out,
                                 const ClassVocabulary& vocab, double threshold) {
  const std::size_t n = out.grid.count();
  if (labels.size() != n) throw ShapeError("pseudo labels: label map does not match the grid");
  std::vector<std::size_t> unseen_rows;
  for (std::size_t i = 0; i < out.class_ids.size(); ++i)
    if (vocab.is_unseen(out.class_ids[i])) unseen_rows.push_back(i);
  if (unseen_rows.empty()) return 0;

  const auto raw = out.raw.values();
  std::size_t assigned = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (labels.labels[p] != vocab.masked()) continue;
    std::size_t best = unseen_rows.front();
    for (auto r : unseen_rows)
      if (raw[r * n + p] > raw[best * n + p]) best = r;
    if (raw[best * n + p] > threshold) {
      labels.labels[p] = out.class_ids[best];
      ++assigned;
    }
  }
  return assigned;
}

Trainer::Trainer(HeadParams& params, const RunConfig& config, const std::vector<ToySample>& train,
                 const ClassVocabulary& vocab)
    : params_(params),
      config_(config),
      train_(train),
      vocab_(vocab),
      opt_(trainable(params), config.learning_rate, config.adam_beta1, config.adam_beta2,
           config.adam_eps),
      rng_(config.seed ^ 0x5DEECE66DULL) {
  if (train.empty()) throw std::invalid_argument("training split is empty");
}

// Each epoch is a fresh seeded permutation of the training split.
std::vector<std::size_t> Trainer::next_batch() {
  const std::size_t batch = std::min(config_.batch, train_.size());
  std::vector<std::size_t> out;
  while (out.size() < batch) {
    if (pos_ == order_.size()) {
      order_.resize(train_.size());
      std::iota(order_.begin(), order_.end(), 0);
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

LossReport Trainer::optimize(const std::vector<Item>& items, const LossOptions& options) {
  params_.zero_grad();
  const double w = 1.0 / static_cast<double>(items.size());
  LossReport mean_report;
  for (const auto& item : items) {
    const SegOutputs out = head_forward(params_, *item.bundle, item.classes);
    const LossTerms terms = total_loss(out, item.labels, vocab_, options);
    const LossReport r = terms.report();
    if (!std::isfinite(r.total)) {
      throw DivergenceError("total loss became non-finite at step " + std::to_string(step_));
    }
    backward(scale(terms.total, w));
    mean_report = accumulate(mean_report, r, w);
  }
  opt_.step();
  ++step_;
  return mean_report;
}

std::vector<LossReport> Trainer::fit(Protocol protocol, std::size_t steps, const StepCallback& on_step) {
  if (protocol == Protocol::transductive) {
    throw std::invalid_argument("fit: the transductive protocol trains through self_train");
  }
  const auto classes = training_classes(vocab_, protocol);
  const auto options = loss_options(
      config_, protocol == Protocol::supervised ? UnseenSupervision::full : UnseenSupervision::excluded);
  std::vector<LossReport> trace;
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<Item> items;
    for (auto i : next_batch()) {
      items.push_back({&train_[i].bundle, training_labels(train_[i], vocab_, protocol), classes});
    }
    trace.push_back(optimize(items, options));
    if (on_step) on_step(step_ - 1, trace.back());
  }
  return trace;
}

std::vector<LossReport> Trainer::self_train(std::size_t steps, const StepCallback& on_step) {
  std::vector<ClassId> all(vocab_.size());
  std::iota(all.begin(), all.end(), 0);
  const auto options = loss_options(config_, UnseenSupervision::pseudo);
  std::vector<LossReport> trace;
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<Item> items;
    std::size_t pseudo = 0;
    for (auto i : next_batch()) {
      Item item{&train_[i].bundle, training_labels(train_[i], vocab_, Protocol::inductive),
                vocab_.seen()};
      {
        NoGradGuard guard;
        const SegOutputs out = head_forward(params_, train_[i].bundle, all);
        pseudo += assign_pseudo_labels(item.labels, out, vocab_, config_.st_threshold);
      }
      std::vector<bool> used(vocab_.size(), false);
      for (auto l : item.labels.labels)
        if (vocab_.is_unseen(l)) used[static_cast<std::size_t>(l)] = true;
      for (auto u : vocab_.unseen())
        if (used[static_cast<std::size_t>(u)]) item.classes.push_back(u);
      std::sort(item.classes.begin(), item.classes.end());
      items.push_back(std::move(item));
    }
    pseudo_counts_.push_back(pseudo);
    trace.push_back(optimize(items, options));
    if (on_step) on_step(step_ - 1, trace.back());
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Evaluation

LabelMap predict(const HeadParams& params, const ToySample& sample, const ClassVocabulary& vocab,
                 bool weighted_map) {
  NoGradGuard guard;
  std::vector<ClassId> all(vocab.size());
  std::iota(all.begin(), all.end(), 0);
  const SegOutputs out = head_forward(params, sample.bundle, all);
  Tensor scores = out.raw;
  if (weighted_map) {
    if (!out.trusty) throw std::invalid_argument("weighted map needs a trusty token");
    scores = fuse_with_trusty(out.raw, *out.trusty, vocab, out.class_ids);
  }
  const auto& g = sample.bundle.grid;
  if (sample.labels.rows != g.rows || sample.labels.cols != g.cols) {
    if (g.rows == 0 || sample.labels.rows % g.rows != 0) {
      throw ShapeError("label map does not match the embedding grid");
    }
    scores = upsample_nearest(scores, sample.labels.rows / g.rows);
  }
  return decode_labels(scores, out.class_ids);
}

ConfusionMatrix confusion(const HeadParams& params, const std::vector<ToySample>& samples,
                          const ClassVocabulary& vocab, bool weighted_map) {
  ConfusionMatrix cm(vocab.size());
  for (const auto& s : samples) cm.accumulate(predict(params, s, vocab, weighted_map), s.labels);
  return cm;
}

EvalReport evaluate(const HeadParams& params, const std::vector<ToySample>& samples,
                    const ClassVocabulary& vocab, bool weighted_map) {
  return report(confusion(params, samples, vocab, weighted_map), vocab);
}

std::size_t warmup_steps(const RunConfig& config) {
  return static_cast<std::size_t>(
      std::llround(config.warmup_fraction * static_cast<double>(config.steps)));
}

TrainOutput train(const RunConfig& config, const Dataset& data, const StepCallback& on_step) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainOutput out{init_head_params(config.head_config(), config.seed), {}};
  auto& r = out.result;
  if (config.steps > 0) {
    Trainer trainer(out.params, config, data.train, data.vocab);
    if (config.protocol == Protocol::transductive) {
      r.trace = trainer.fit(Protocol::inductive, warmup_steps(config), on_step);
      auto rest = trainer.self_train(config.steps - r.trace.size(), on_step);
      r.trace.insert(r.trace.end(), rest.begin(), rest.end());
      r.pseudo_pixels = trainer.pseudo_counts();
    } else {
      r.trace = trainer.fit(config.protocol, config.steps, on_step);
    }
  }
  r.report = evaluate(out.params, data.test, data.vocab, config.weighted_map);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Ablation grid and γ sweep

std::vector<LearnerVariant> default_ablation_variants() {
  using L = LearnerInput;
  const L T = L::text, H = L::image, P = L::text_image_product, C = L::text_image_concat;
  return {
      {H, H, T}, {T, H, H}, {T, H, T}, {T, T, H}, {T, T, P}, {C, C, C},
      {P, H, H}, {P, T, T}, {P, T, P}, {P, P, H}, {P, P, T}, {P, P, P},
  };
}

std::vector<AblationRow> ablation_plan(const RunConfig& base,
                                       const std::vector<LearnerVariant>& extra_variants) {
  std::vector<AblationRow> rows;
  RunConfig a = base;
  a.trusty_token = false;
  a.trusty_learner = false;
  a.weighted_map = false;
  a.variant = LearnerVariant{};
  rows.push_back({"(a)", a, {}});

  RunConfig b = a;
  b.trusty_token = true;
  rows.push_back({"(b)", b, {}});

  RunConfig c = b;
  c.trusty_learner = true;
  for (const auto& v : extra_variants) {
    if (v == LearnerVariant{}) continue;
    c.variant = v;
    rows.push_back({"(c)", c, {}});
  }
  c.variant = LearnerVariant{};
  rows.push_back({"(c)", c, {}});

  RunConfig d = c;
  d.weighted_map = true;
  rows.push_back({"(d)", d, {}});
  return rows;
}

std::vector<AblationRow> run_ablation_grid(const RunConfig& base, const Dataset& data,
                                           const std::vector<LearnerVariant>& extra_variants,
                                           const std::function<void(const AblationRow&)>& on_row) {
  auto rows = ablation_plan(base, extra_variants);
  HeadParams last_c;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& row = rows[i];
    if (row.label == "(d)") {
      const auto t0 = std::chrono::steady_clock::now();
      row.result = rows[i - 1].result;
      row.result.report = evaluate(last_c, data.test, data.vocab, true);
      row.result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else {
      auto trained = train(row.config, data);
      row.result = std::move(trained.result);
      last_c = std::move(trained.params);
    }
    if (on_row) on_row(row);
  }
  return rows;
}

namespace {
std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}
}  // namespace

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "row  token  learner  weighted  Q/K/V                  mIoU(S)  mIoU(U)  hIoU\n";
  for (const auto& r : rows) {
    std::string variant = r.config.trusty_learner ? to_string(r.config.variant) : "-";
    variant.resize(std::max<std::size_t>(variant.size(), 21), ' ');
    os << r.label << "  " << (r.config.trusty_token ? "  x  " : "     ") << "  "
       << (r.config.trusty_learner ? "   x   " : "       ") << "  "
       << (r.config.weighted_map ? "    x   " : "        ") << "  " << variant << "  "
       << pct(r.result.report.miou_seen) << "   " << pct(r.result.report.miou_unseen) << "  "
       << pct(r.result.report.hiou) << "\n";
  }
  return os.str();
}

std::vector<SweepEntry> sweep_gamma(const RunConfig& base, const Dataset& data,
                                    const std::vector<double>& gammas) {
  std::vector<SweepEntry> out;
  for (double g : gammas) {
    RunConfig c = base;
    c.weights.gamma = g;
    out.push_back({g, train(c, data).result});
  }
  return out;
}

std::string format_sweep_table(const std::vector<SweepEntry>& entries) {
  std::ostringstream os;
  os << "   gamma  mIoU(S)  mIoU(U)  hIoU\n";
  for (const auto& e : entries) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%8g", e.gamma);
    os << buf << "  " << pct(e.result.report.miou_seen) << "   " << pct(e.result.report.miou_unseen)
       << "  " << pct(e.result.report.hiou) << "\n";
  }
  return os.str();
}

double smoothed_total(std::span<const LossReport> trace, std::size_t begin, std::size_t window) {
  if (window == 0 || begin + window > trace.size()) {
    throw std::out_of_range("smoothing window outside the trace");
  }
  double s = 0.0;
  for (std::size_t i = begin; i < begin + window; ++i) s += trace[i].total;
  return s / static_cast<double>(window);
}

// ---------------------------------------------------------------------------
// Persistence

std::string serialize_vocab(const ClassVocabulary& vocab) {
  std::ostringstream os;
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    const auto id = static_cast<ClassId>(c);
    os << c << " " << (vocab.is_seen(id) ? "seen" : "unseen") << " " << vocab.name(id) << "\n";
  }
  return os.str();
}

ClassVocabulary parse_vocab(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> names;
  std::vector<ClassId> seen, unseen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t id = 0;
    std::string split, name;
    if (!(ls >> id >> split) || id != names.size()) {
      throw std::invalid_argument("vocab line '" + line + "': expected '<id> seen|unseen <name>' in id order");
    }
    std::getline(ls >> std::ws, name);
    if (name.empty()) throw std::invalid_argument("vocab line '" + line + "': missing name");
    if (split == "seen") seen.push_back(static_cast<ClassId>(id));
    else if (split == "unseen") unseen.push_back(static_cast<ClassId>(id));
    else throw std::invalid_argument("vocab line '" + line + "': split must be seen or unseen");
    names.push_back(name);
  }
  return ClassVocabulary(std::move(names), std::move(seen), std::move(unseen));
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

Tensor labels_tensor(const LabelMap& m) {
  std::vector<double> v(m.labels.begin(), m.labels.end());
  return Tensor::from({m.rows, m.cols}, std::move(v));
}

LabelMap tensor_labels(const Tensor& t, const fs::path& where) {
  if (t.rank() != 2) throw ShapeError(where.string() + ": labels must be rank 2");
  LabelMap m(t.dim(0), t.dim(1));
  const auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != std::floor(v[i]) || v[i] < 0) {
      throw std::invalid_argument(where.string() + ": labels must be non-negative integers");
    }
    m.labels[i] = static_cast<ClassId>(v[i]);
  }
  return m;
}

void save_split(const fs::path& dir, const std::vector<ToySample>& samples) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%05zu", i);
    const fs::path d = dir / name;
    fs::create_directories(d);
    const auto& b = samples[i].bundle;
    write_tensor_file(d / "text_tokens.tgt", "text_tokens", b.text_tokens);
    write_tensor_file(d / "global_token.tgt", "global_token", b.global_token);
    // Patch embeddings are stored as a rows×cols×d grid so the layout is self-describing.
    write_tensor_file(d / "patch_embeddings.tgt", "patch_embeddings",
                      reshape(b.patch_embeddings, {b.grid.rows, b.grid.cols, b.dim()}));
    write_tensor_file(d / "labels.tgt", "labels", labels_tensor(samples[i].labels));
  }
}

std::vector<ToySample> load_split(const fs::path& dir, const ClassVocabulary& vocab) {
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  std::vector<ToySample> out;
  for (const auto& d : entries) {
    ToySample s;
    s.bundle.text_tokens = read_tensor_file(d / "text_tokens.tgt").tensor;
    s.bundle.global_token = read_tensor_file(d / "global_token.tgt").tensor;
    Tensor patches = read_tensor_file(d / "patch_embeddings.tgt").tensor;
    s.labels = tensor_labels(read_tensor_file(d / "labels.tgt").tensor, d / "labels.tgt");
    const auto& tt = s.bundle.text_tokens;
    if (tt.rank() != 2 || tt.dim(0) != vocab.size()) {
      throw ShapeError(d.string() + ": text_tokens must be C×d with C = " + std::to_string(vocab.size()));
    }
    const std::size_t dim = tt.dim(1);
    if (s.bundle.global_token.shape() != Shape{1, dim}) {
      throw ShapeError(d.string() + ": global_token must be 1×" + std::to_string(dim));
    }
    if (patches.rank() != 3 || patches.dim(2) != dim) {
      throw ShapeError(d.string() + ": patch_embeddings must be rows×cols×" + std::to_string(dim));
    }
    s.bundle.grid = {patches.dim(0), patches.dim(1)};
    s.bundle.patch_embeddings = reshape(patches, {s.bundle.grid.count(), dim});
    if (s.labels.rows % s.bundle.grid.rows != 0 || s.labels.cols % s.bundle.grid.cols != 0 ||
        s.labels.rows / s.bundle.grid.rows != s.labels.cols / s.bundle.grid.cols) {
      throw ShapeError(d.string() + ": labels are not a patch multiple of the embedding grid");
    }
    s.bundle.patch_size = s.labels.rows / s.bundle.grid.rows;
    for (auto l : s.labels.labels) {
      if (l >= static_cast<ClassId>(vocab.size())) {
        throw std::invalid_argument(d.string() + ": label " + std::to_string(l) + " outside the vocabulary");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string serialize_head_config(const HeadConfig& h) {
  std::ostringstream os;
  char eps[40];
  std::snprintf(eps, sizeof eps, "%.17g", h.norm_eps);
  os << "dim=" << h.dim << "\nheads=" << h.heads << "\nlayers=" << h.layers
     << "\ntrusty_token=" << h.trusty_token << "\ntrusty_learner=" << h.trusty_learner
     << "\nvariant=" << to_string(h.variant) << "\nnorm_eps=" << eps
     << "\naligned_init=" << h.aligned_init << "\n";
  return os.str();
}

HeadConfig parse_head_config(const std::string& text) {
  HeadConfig h;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("head.cfg: bad line '" + line + "'");
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "dim") h.dim = std::stoul(v);
    else if (k == "heads") h.heads = std::stoul(v);
    else if (k == "layers") h.layers = std::stoul(v);
    else if (k == "trusty_token") h.trusty_token = v == "1";
    else if (k == "trusty_learner") h.trusty_learner = v == "1";
    else if (k == "variant") h.variant = parse_learner_variant(v);
    else if (k == "norm_eps") h.norm_eps = std::stod(v);
    else if (k == "aligned_init") h.aligned_init = v == "1";
    else throw std::invalid_argument("head.cfg: unknown key '" + k + "'");
  }
  return h;
}

}  // namespace

void save_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  write_text(dir / "vocab.txt", serialize_vocab(data.vocab));
  save_split(dir / "train", data.train);
  save_split(dir / "test", data.test);
}

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.vocab = parse_vocab(read_text(dir / "vocab.txt"));
  d.train = load_split(dir / "train", d.vocab);
  d.test = load_split(dir / "test", d.vocab);
  if (d.test.empty()) throw std::invalid_argument(dir.string() + ": test split is empty");
  return d;
}

void save_params(const fs::path& dir, const HeadParams& params) {
  fs::create_directories(dir);
  write_text(dir / "head.cfg", serialize_head_config(params.config));
  for (const auto& [name, t] : params.named_parameters()) {
    write_tensor_file(dir / (name + ".tgt"), name, t);
  }
}

HeadParams load_params(const fs::path& dir) {
  HeadParams p = init_head_params(parse_head_config(read_text(dir / "head.cfg")), 0);
  for (auto& [name, t] : p.named_parameters()) {
    const auto nt = read_tensor_file(dir / (name + ".tgt"));
    if (nt.name != name || nt.tensor.shape() != t.shape()) {
      throw ShapeError(name + ": stored tensor '" + nt.name + "' " + shape_str(nt.tensor.shape()) +
                       " does not match " + shape_str(t.shape()));
    }
    Tensor leaf = t;
    auto dst = leaf.mutable_values();
    const auto src = nt.tensor.values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return p;
}

}  // namespace tagclip
