#include "tagclip/head.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "tagclip/ops.hpp"

namespace tagclip {

namespace {

constexpr std::array<const char*, kLearnerInputCount> kInputShort = {"T", "H", "T*H", "[T,H]",
                                                                     "That"};
constexpr std::array<const char*, kLearnerInputCount> kInputLong = {
    "text", "image", "text_image_product", "text_image_concat", "descriptor"};

std::size_t input_width(LearnerInput kind, std::size_t d) {
  switch (kind) {
    case LearnerInput::text:
    case LearnerInput::image:
    case LearnerInput::text_image_product:
      return d;
    case LearnerInput::text_image_concat:
    case LearnerInput::descriptor:
      return 2 * d;
  }
  return d;
}

class Init {
 public:
  explicit Init(std::uint64_t seed) : rng_(seed) {}

  Tensor gaussian(Shape shape, double std) {
    std::normal_distribution<double> dist(0.0, std);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng_);
    return leaf(Tensor::from(std::move(shape), std::move(v)));
  }

  LinearParams linear(std::size_t in, std::size_t out) {
    LinearParams p;
    p.weight = gaussian({in, out}, 1.0 / std::sqrt(static_cast<double>(in)));
    p.bias = leaf(Tensor::zeros({out}));
    return p;
  }

  /// Identity on input columns [offset, offset+out) plus small Gaussian jitter.
  LinearParams near_identity(std::size_t in, std::size_t out, std::size_t offset, double jitter) {
    LinearParams p = linear(in, out);
    auto w = p.weight.mutable_values();
    const double s = jitter * std::sqrt(static_cast<double>(in));
    for (auto& x : w) x *= s;
    for (std::size_t i = 0; i < out; ++i) w[(offset + i) * out + i] += 1.0;
    return p;
  }

  static NormParams norm(std::size_t d) {
    return {leaf(Tensor::full({d}, 1.0)), leaf(Tensor::zeros({d}))};
  }

  static Tensor leaf(Tensor t) {
    t.set_requires_grad(true);
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

Tensor identity(std::size_t d) {
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
  Tensor t = Tensor::from({d, d}, std::move(v));
  t.set_requires_grad(true);
  return t;
}

Tensor apply(const Tensor& x, const LinearParams& p) { return linear(x, p.weight, p.bias); }

Tensor norm(const Tensor& x, const NormParams& p, double eps) {
  return layer_norm(x, p.gain, p.bias, eps);
}

void add_linear(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                const LinearParams& p) {
  out.emplace_back(prefix + ".weight", p.weight);
  out.emplace_back(prefix + ".bias", p.bias);
}

void add_norm(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
              const NormParams& p) {
  out.emplace_back(prefix + ".gain", p.gain);
  out.emplace_back(prefix + ".bias", p.bias);
}

std::vector<LearnerInput> inputs_in_use(const HeadConfig& cfg) {
  if (!cfg.trusty_learner) return {LearnerInput::descriptor};
  std::vector<LearnerInput> kinds{cfg.variant.query};
  for (auto k : {cfg.variant.key, cfg.variant.value}) {
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  }
  return kinds;
}

// Multi-head scaled dot-product attention with learned projections.
Tensor multi_head_attention(const Tensor& xq, const Tensor& xk, const Tensor& xv,
                            const LearnerParams& p, std::size_t heads) {
  const Tensor q = apply(xq, p.query);
  const Tensor k = apply(xk, p.key);
  const Tensor v = apply(xv, p.value);
  const std::size_t d = q.dim(1);
  const std::size_t dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> per_head;
  per_head.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    const Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    const Tensor attn = softmax_rows(scale(matmul_nt(qh, kh), inv_scale));
    per_head.push_back(matmul(attn, vh));
  }
  const Tensor merged = heads == 1 ? per_head[0] : concat_cols(per_head);
  return apply(merged, p.out);
}

}  // namespace

std::string to_string(LearnerInput in) { return kInputShort[static_cast<std::size_t>(in)]; }

LearnerInput parse_learner_input(const std::string& s) {
  for (std::size_t i = 0; i < kLearnerInputCount; ++i) {
    if (s == kInputShort[i] || s == kInputLong[i]) return static_cast<LearnerInput>(i);
  }
  throw std::invalid_argument("unknown learner input '" + s + "'");
}

std::string to_string(const LearnerVariant& v) {
  return to_string(v.query) + "/" + to_string(v.key) + "/" + to_string(v.value);
}

LearnerVariant parse_learner_variant(const std::string& s) {
  const auto a = s.find('/');
  const auto b = a == std::string::npos ? a : s.find('/', a + 1);
  if (b == std::string::npos) {
    throw std::invalid_argument("learner variant must look like Q/K/V, got '" + s + "'");
  }
  return {parse_learner_input(s.substr(0, a)), parse_learner_input(s.substr(a + 1, b - a - 1)),
          parse_learner_input(s.substr(b + 1))};
}

std::vector<std::pair<std::string, Tensor>> HeadParams::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  if (config.trusty_token) out.emplace_back("trusty_token", trusty_token);
  for (std::size_t i = 0; i < kLearnerInputCount; ++i) {
    if (learner.align[i]) {
      add_linear(out, std::string("learner.align.") + kInputLong[i], *learner.align[i]);
    }
  }
  if (config.trusty_learner) {
    add_linear(out, "learner.query", learner.query);
    add_linear(out, "learner.key", learner.key);
    add_linear(out, "learner.value", learner.value);
    add_linear(out, "learner.out", learner.out);
    add_norm(out, "learner.norm", learner.norm);
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "seg." + std::to_string(l);
    add_linear(out, p + ".key", layers[l].key);
    add_linear(out, p + ".value", layers[l].value);
    add_linear(out, p + ".mlp", layers[l].mlp);
    add_norm(out, p + ".norm_attn", layers[l].norm_attn);
    add_norm(out, p + ".norm_mlp", layers[l].norm_mlp);
  }
  add_linear(out, "presence", presence);
  return out;
}

HeadParams HeadParams::clone() const {
  auto copy_leaf = [](const Tensor& t) {
    Tensor c = t.detach();
    c.set_requires_grad(t.requires_grad());
    return c;
  };
  auto copy_linear = [&](const LinearParams& p) {
    return LinearParams{copy_leaf(p.weight), copy_leaf(p.bias)};
  };
  auto copy_norm = [&](const NormParams& p) { return NormParams{copy_leaf(p.gain), copy_leaf(p.bias)}; };

  HeadParams out;
  out.config = config;
  out.trusty_token = copy_leaf(trusty_token);
  for (std::size_t i = 0; i < kLearnerInputCount; ++i) {
    if (learner.align[i]) out.learner.align[i] = copy_linear(*learner.align[i]);
  }
  out.learner.query = copy_linear(learner.query);
  out.learner.key = copy_linear(learner.key);
  out.learner.value = copy_linear(learner.value);
  out.learner.out = copy_linear(learner.out);
  out.learner.norm = copy_norm(learner.norm);
  for (const auto& l : layers) {
    out.layers.push_back({copy_linear(l.key), copy_linear(l.value), copy_linear(l.mlp),
                          copy_norm(l.norm_attn), copy_norm(l.norm_mlp)});
  }
  out.presence = copy_linear(presence);
  return out;
}

void HeadParams::zero_grad() const {
  for (auto& [name, t] : named_parameters()) {
    Tensor h = t;
    h.zero_grad();
  }
}

HeadParams init_head_params(const HeadConfig& cfg, std::uint64_t seed) {
  const std::size_t d = cfg.dim;
  if (d == 0) throw std::invalid_argument("head dim must be positive");
  if (cfg.heads == 0 || d % cfg.heads != 0) {
    throw std::invalid_argument("attention heads (" + std::to_string(cfg.heads) +
                                ") must divide dim (" + std::to_string(d) + ")");
  }
  if (cfg.layers < 1 || cfg.layers > 3) {
    throw std::invalid_argument("segmentor depth must be 1..3, got " + std::to_string(cfg.layers));
  }

  Init init(seed);
  HeadParams p;
  p.config = cfg;

  // Small Gaussian, then unit-normalized once to match the text-token scale.
  {
    Tensor raw = init.gaussian({1, d}, 0.02);
    p.trusty_token = Init::leaf(normalize_rows(raw));
  }
  const double jitter = 0.1 / std::sqrt(static_cast<double>(d));
  auto square = [&] { return cfg.aligned_init ? init.near_identity(d, d, 0, jitter) : init.linear(d, d); };
  for (auto kind : inputs_in_use(cfg)) {
    const std::size_t in = input_width(kind, d);
    // The descriptor's second half is the token itself; [T,H] keeps T first.
    const std::size_t offset = kind == LearnerInput::descriptor ? d : 0;
    p.learner.align[static_cast<std::size_t>(kind)] =
        cfg.aligned_init ? init.near_identity(in, d, offset, jitter) : init.linear(in, d);
  }
  p.learner.query = square();
  p.learner.key = square();
  p.learner.value = square();
  p.learner.out = square();
  p.learner.norm = Init::norm(d);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    SegLayerParams layer;
    layer.key = square();
    layer.value = square();
    layer.mlp = init.linear(d, d);
    layer.norm_attn = Init::norm(d);
    layer.norm_mlp = Init::norm(d);
    p.layers.push_back(std::move(layer));
  }
  p.presence = init.linear(d, 1);
  return p;
}

void set_identity_learner(HeadParams& p) {
  const std::size_t d = p.config.dim;
  p.config.heads = 1;
  p.config.trusty_learner = true;
  auto ident = [d] { return LinearParams{identity(d), Init::leaf(Tensor::zeros({d}))}; };
  p.learner.query = ident();
  p.learner.key = ident();
  p.learner.value = ident();
  p.learner.out = ident();
  p.learner.norm = Init::norm(d);
}

Tensor append_trusty_token(const Tensor& text_tokens, const Tensor& trusty_token) {
  if (text_tokens.rank() != 2 || trusty_token.rank() != 2 || trusty_token.dim(0) != 1 ||
      trusty_token.dim(1) != text_tokens.dim(1)) {
    throw ShapeError("append_trusty_token: text " + shape_str(text_tokens.shape()) + " vs token " +
                     shape_str(trusty_token.shape()));
  }
  return concat_rows(text_tokens, trusty_token);
}

Tensor relation_descriptor(const Tensor& tokens, const Tensor& global_token) {
  return learner_input(LearnerInput::descriptor, tokens, global_token);
}

Tensor learner_input(LearnerInput kind, const Tensor& tokens, const Tensor& g) {
  if (tokens.rank() != 2 || g.numel() != tokens.dim(1)) {
    throw ShapeError("learner input: tokens " + shape_str(tokens.shape()) + " vs global token " +
                     shape_str(g.shape()));
  }
  const std::size_t rows = tokens.dim(0);
  switch (kind) {
    case LearnerInput::text:
      return tokens;
    case LearnerInput::image:
      return repeat_row(g, rows);
    case LearnerInput::text_image_product:
      return mul_row(tokens, g);
    case LearnerInput::text_image_concat:
      return concat_cols(tokens, repeat_row(g, rows));
    case LearnerInput::descriptor:
      return concat_cols(mul_row(tokens, g), tokens);
  }
  throw std::logic_error("unhandled learner input");
}

Tensor trusty_learner(const Tensor& descriptor, const HeadParams& p) {
  const auto& v = p.config.variant;
  if (v.query != LearnerInput::descriptor || v.key != LearnerInput::descriptor ||
      v.value != LearnerInput::descriptor) {
    throw std::invalid_argument("trusty_learner(descriptor) needs the That/That/That variant");
  }
  const std::size_t d = p.config.dim;
  if (descriptor.rank() != 2 || descriptor.dim(1) != 2 * d) {
    throw ShapeError("trusty_learner: descriptor " + shape_str(descriptor.shape()) +
                     " should have " + std::to_string(2 * d) + " columns");
  }
  if (d % p.config.heads != 0) throw std::invalid_argument("attention heads must divide dim");
  const auto& align = p.learner.align[static_cast<std::size_t>(LearnerInput::descriptor)];
  const Tensor x = apply(descriptor, *align);
  const Tensor attn = multi_head_attention(x, x, x, p.learner, p.config.heads);
  return norm(add(attn, x), p.learner.norm, p.config.norm_eps);
}

Tensor trusty_learner(const Tensor& tokens, const Tensor& g, const HeadParams& p) {
  const auto& cfg = p.config;
  if (cfg.dim % cfg.heads != 0) throw std::invalid_argument("attention heads must divide dim");
  std::array<std::optional<Tensor>, kLearnerInputCount> aligned;
  auto stream = [&](LearnerInput kind) -> const Tensor& {
    auto& slot = aligned[static_cast<std::size_t>(kind)];
    if (!slot) {
      const auto& align = p.learner.align[static_cast<std::size_t>(kind)];
      if (!align) throw std::invalid_argument("no alignment weights for learner input " + to_string(kind));
      slot = apply(learner_input(kind, tokens, g), *align);
    }
    return *slot;
  };
  const Tensor& xq = stream(cfg.variant.query);
  const Tensor& xk = stream(cfg.variant.key);
  const Tensor& xv = stream(cfg.variant.value);
  const Tensor attn = multi_head_attention(xq, xk, xv, p.learner, cfg.heads);
  return norm(add(attn, xq), p.learner.norm, cfg.norm_eps);
}

AtmResult atm_layer(const Tensor& tokens, const Tensor& patches, const SegLayerParams& layer,
                    double norm_eps) {
  if (tokens.rank() != 2 || patches.rank() != 2 || tokens.dim(1) != patches.dim(1)) {
    throw ShapeError("atm_layer: tokens " + shape_str(tokens.shape()) + " vs patches " +
                     shape_str(patches.shape()));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tokens.dim(1)));
  const Tensor k = apply(patches, layer.key);
  const Tensor v = apply(patches, layer.value);
  const Tensor logits = scale(matmul_nt(tokens, k), inv_sqrt_d);
  const Tensor update = matmul(softmax_rows(logits), v);
  const Tensor y = norm(add(update, tokens), layer.norm_attn, norm_eps);
  const Tensor out = norm(add(y, apply(y, layer.mlp)), layer.norm_mlp, norm_eps);
  return {out, logits};
}

SegOutputs segmentor_forward(const Tensor& queries, const Tensor& patches, const HeadParams& p,
                             GridShape grid, std::vector<ClassId> class_ids) {
  const std::size_t rows = queries.dim(0);
  const std::size_t raw = class_ids.size();
  const bool has_trusty = rows == raw + 1;
  if (!has_trusty && rows != raw) {
    throw ShapeError("segmentor: " + std::to_string(rows) + " query rows for " +
                     std::to_string(raw) + " classes");
  }
  if (patches.dim(0) != grid.count()) {
    throw ShapeError("segmentor: " + std::to_string(patches.dim(0)) + " patches for a " +
                     std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " grid");
  }
  if (p.layers.empty()) throw std::invalid_argument("segmentor has no layers");

  Tensor tokens = queries;
  std::vector<Tensor> layer_logits;
  for (const auto& layer : p.layers) {
    auto r = atm_layer(tokens, patches, layer, p.config.norm_eps);
    tokens = r.tokens;
    layer_logits.push_back(r.mask_logits);
  }
  Tensor logits = layer_logits[0];
  for (std::size_t l = 1; l < layer_logits.size(); ++l) logits = add(logits, layer_logits[l]);
  if (layer_logits.size() > 1) logits = scale(logits, 1.0 / static_cast<double>(layer_logits.size()));

  SegOutputs out;
  out.class_ids = std::move(class_ids);
  out.grid = grid;
  out.mask_logits = logits;
  out.mask = sigmoid(logits);
  out.presence = reshape(sigmoid(apply(tokens, p.presence)), {rows});
  out.combined = reshape(scale_rows(out.mask, out.presence), {rows, grid.rows, grid.cols});
  out.raw = slice_rows(out.combined, 0, raw);
  if (has_trusty) out.trusty = reshape(slice_rows(out.combined, raw, raw + 1), {grid.rows, grid.cols});
  return out;
}

SegOutputs head_forward(const HeadParams& p, const EmbeddingBundle& bundle,
                        std::span<const ClassId> class_ids) {
  if (bundle.dim() != p.config.dim) {
    throw ShapeError("embedding dim " + std::to_string(bundle.dim()) + " vs head dim " +
                     std::to_string(p.config.dim));
  }
  std::vector<std::size_t> rows(class_ids.begin(), class_ids.end());
  Tensor tokens = gather_rows(bundle.text_tokens, rows);
  if (p.config.trusty_token) tokens = append_trusty_token(tokens, p.trusty_token);

  Tensor queries;
  if (p.config.trusty_learner) {
    queries = trusty_learner(tokens, bundle.global_token, p);
  } else {
    const auto& align = p.learner.align[static_cast<std::size_t>(LearnerInput::descriptor)];
    queries = apply(relation_descriptor(tokens, bundle.global_token), *align);
  }
  return segmentor_forward(queries, bundle.patch_embeddings, p, bundle.grid,
                           std::vector<ClassId>(class_ids.begin(), class_ids.end()));
}

Tensor upsample_nearest(const Tensor& map, std::size_t patch) {
  if (patch == 0) throw std::invalid_argument("patch size must be at least 1");
  if (map.rank() < 2) throw ShapeError("upsample_nearest needs at least 2 axes");
  if (patch == 1) return map;
  const std::size_t r = map.rank();
  const std::size_t h = map.dim(r - 2), w = map.dim(r - 1);
  const std::size_t planes = map.numel() / (h * w);
  const std::size_t oh = h * patch, ow = w * patch;
  Shape shape = map.shape();
  shape[r - 2] = oh;
  shape[r - 1] = ow;
  std::vector<double> out(planes * oh * ow);
  const auto v = map.values();
  for (std::size_t pl = 0; pl < planes; ++pl)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        out[(pl * oh + y) * ow + x] = v[(pl * h + y / patch) * w + x / patch];
  return Tensor::make_result(std::move(shape), std::move(out), {map},
                             [planes, h, w, oh, ow, patch](detail::Node& self) {
                               auto& parent = *self.parents[0];
                               if (!parent.requires_grad) return;
                               auto& g = parent.grad_buffer();
                               for (std::size_t pl = 0; pl < planes; ++pl)
                                 for (std::size_t y = 0; y < oh; ++y)
                                   for (std::size_t x = 0; x < ow; ++x)
                                     g[(pl * h + y / patch) * w + x / patch] +=
                                         self.grad[(pl * oh + y) * ow + x];
                             });
}

}  // namespace tagclip
