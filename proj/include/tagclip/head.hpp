#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tagclip/embeddings.hpp"
#include "tagclip/tensor.hpp"

namespace tagclip {

/// What the Trusty Learner reads in each of its query/key/value slots.
/// `descriptor` is the relation descriptor concat[t′⊙g, t′].
enum class LearnerInput { text, image, text_image_product, text_image_concat, descriptor };

inline constexpr std::size_t kLearnerInputCount = 5;

std::string to_string(LearnerInput in);
/// Accepts "T", "H", "T*H", "[T,H]", "That" (and the long enum names).
LearnerInput parse_learner_input(const std::string& s);

struct LearnerVariant {
  LearnerInput query = LearnerInput::descriptor;
  LearnerInput key = LearnerInput::descriptor;
  LearnerInput value = LearnerInput::descriptor;

  bool operator==(const LearnerVariant&) const = default;
};

std::string to_string(const LearnerVariant& v);  // e.g. "That/That/That"
LearnerVariant parse_learner_variant(const std::string& s);

struct HeadConfig {
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t layers = 3;  // segmentor depth, 1..3
  bool trusty_token = true;
  bool trusty_learner = true;
  LearnerVariant variant;
  double norm_eps = 1e-5;
  /// Start projections near identity (text part for 2d-wide inputs) instead of
  /// plain Gaussian, so the frozen text/patch alignment survives initialization.
  bool aligned_init = true;

  bool operator==(const HeadConfig&) const = default;
};

struct LinearParams {
  Tensor weight;  // in×out
  Tensor bias;    // out
};

struct NormParams {
  Tensor gain;
  Tensor bias;
};

struct LearnerParams {
  /// One input alignment per LearnerInput kind; only kinds in use are populated.
  std::array<std::optional<LinearParams>, kLearnerInputCount> align;
  LinearParams query, key, value, out;
  NormParams norm;
};

struct SegLayerParams {
  LinearParams key;    // φ_k
  LinearParams value;  // φ_v
  LinearParams mlp;
  NormParams norm_attn;
  NormParams norm_mlp;
};

/// Every trainable tensor of the decoding head. Copies share storage; use
/// clone() for an independent snapshot.
struct HeadParams {
  HeadConfig config;
  Tensor trusty_token;  // 1×d
  LearnerParams learner;
  std::vector<SegLayerParams> layers;
  LinearParams presence;  // d×1

  /// Parameters that participate in the forward pass for `config`, with stable names.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  HeadParams clone() const;
  void zero_grad() const;
};

/// Seeded initialization. Throws std::invalid_argument if heads does not divide
/// dim or layers is outside 1..3.
HeadParams init_head_params(const HeadConfig& config, std::uint64_t seed);

/// Single-head learner with identity projections, unit gain and zero biases,
/// so that it evaluates Norm(Softmax(XXᵀ/√d)X + X) on X = align(descriptor).
void set_identity_learner(HeadParams& params);

/// Per-token results of the segmentor. Raw channel i belongs to class_ids[i];
/// when a trusty token is present it occupies the last combined channel.
struct SegOutputs {
  std::vector<ClassId> class_ids;
  GridShape grid;
  Tensor mask_logits;  // R×N, mean of per-layer logits
  Tensor mask;         // R×N
  Tensor presence;     // R
  Tensor combined;     // R×H×W
  Tensor raw;          // C′×H×W
  std::optional<Tensor> trusty;  // H×W

  std::size_t raw_channels() const { return class_ids.size(); }
};

// Individual stages, exposed for testing and ablations.

/// Rows 0..C−1 are T, row C is t_A.
Tensor append_trusty_token(const Tensor& text_tokens, const Tensor& trusty_token);

/// Row i is concat(T′ᵢ ⊙ g, T′ᵢ).
Tensor relation_descriptor(const Tensor& tokens, const Tensor& global_token);

/// Builds the learner's input for one slot kind.
Tensor learner_input(LearnerInput kind, const Tensor& tokens, const Tensor& global_token);

/// Trusty Learner on a descriptor fed to every slot: LN(MHA(X) + X), X = align(descriptor).
/// Requires the descriptor/descriptor/descriptor variant.
Tensor trusty_learner(const Tensor& descriptor, const HeadParams& params);

/// Trusty Learner for any slot variant; the query stream also forms the shortcut.
Tensor trusty_learner(const Tensor& tokens, const Tensor& global_token, const HeadParams& params);

struct AtmResult {
  Tensor tokens;       // updated tokens
  Tensor mask_logits;  // tokens·φ_k(E)ᵀ/√d
};

AtmResult atm_layer(const Tensor& tokens, const Tensor& patches, const SegLayerParams& layer,
                    double norm_eps = 1e-5);

/// Runs the segmentor layers on already-prepared query tokens. The first
/// class_ids.size() rows are class tokens; one extra trailing row is the
/// trusty token.
SegOutputs segmentor_forward(const Tensor& queries, const Tensor& patches, const HeadParams& params,
                             GridShape grid, std::vector<ClassId> class_ids);

/// Full head: selects class_ids rows of the text tokens, appends t_A if enabled,
/// builds the learner input and runs the segmentor.
SegOutputs head_forward(const HeadParams& params, const EmbeddingBundle& bundle,
                        std::span<const ClassId> class_ids);

/// Replicates every cell of the trailing two axes into a P×P block.
Tensor upsample_nearest(const Tensor& map, std::size_t patch_size);

}  // namespace tagclip
