#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tagclip/tensor.hpp"

namespace tagclip {

using ClassId = std::int32_t;

/// Class names and the seen/unseen split. Ids are 0..C−1; the value C is
/// reserved as the MASKED label for hidden unseen annotations.
class ClassVocabulary {
 public:
  ClassVocabulary() = default;
  /// Throws std::invalid_argument unless seen ∪ unseen = {0..C−1}, disjoint, seen non-empty.
  ClassVocabulary(std::vector<std::string> names, std::vector<ClassId> seen,
                  std::vector<ClassId> unseen);

  std::size_t size() const { return names_.size(); }
  ClassId masked() const { return static_cast<ClassId>(names_.size()); }
  const std::string& name(ClassId c) const { return names_.at(c); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<ClassId>& seen() const { return seen_; }
  const std::vector<ClassId>& unseen() const { return unseen_; }
  bool is_seen(ClassId c) const { return c >= 0 && c < masked() && seen_flag_[c]; }
  bool is_unseen(ClassId c) const { return c >= 0 && c < masked() && !seen_flag_[c]; }

  /// Same classes with ids permuted: new id of old class c is perm[c].
  ClassVocabulary permuted(const std::vector<ClassId>& perm) const;

  bool operator==(const ClassVocabulary& other) const {
    return names_ == other.names_ && seen_ == other.seen_ && unseen_ == other.unseen_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<ClassId> seen_;
  std::vector<ClassId> unseen_;
  std::vector<bool> seen_flag_;
};

/// Row-major integer map of class ids, one per patch (or pixel).
struct LabelMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<ClassId> labels;

  LabelMap() = default;
  LabelMap(std::size_t r, std::size_t c, ClassId fill = 0)
      : rows(r), cols(c), labels(r * c, fill) {}

  ClassId& operator()(std::size_t r, std::size_t c) { return labels[r * cols + c]; }
  ClassId operator()(std::size_t r, std::size_t c) const { return labels[r * cols + c]; }
  std::size_t size() const { return labels.size(); }
  bool operator==(const LabelMap&) const = default;
};

struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t count() const { return rows * cols; }
  bool operator==(const GridShape&) const = default;
};

/// Frozen encoder outputs for one image. Rows are unit-norm; none of these
/// tensors ever requires a gradient.
struct EmbeddingBundle {
  Tensor text_tokens;       // C×d
  Tensor global_token;      // 1×d
  Tensor patch_embeddings;  // N×d
  GridShape grid;
  std::size_t patch_size = 1;

  std::size_t dim() const { return text_tokens.dim(1); }
};

struct ToySample {
  EmbeddingBundle bundle;
  LabelMap labels;  // grid.rows × grid.cols (× patch_size for imported pixel-level maps)
};

struct ToyDataConfig {
  std::uint64_t seed = 0;
  std::size_t classes = 8;
  std::size_t unseen = 2;  // the last `unseen` ids form C_U
  std::size_t dim = 32;
  GridShape grid{16, 16};
  std::size_t samples = 300;
  double noise = 0.1;
  std::size_t min_regions = 2;
  std::size_t max_regions = 5;
};

struct ToyDataset {
  ClassVocabulary vocab;
  std::vector<ToySample> samples;
  /// Unit-norm class prototypes shared by text and image embeddings.
  Tensor prototypes;
};

/// Seeded synthetic benchmark with CLIP-like text/image alignment: text tokens
/// and patch embeddings are noisy copies of shared class prototypes, and each
/// image is a guillotine partition of the grid into labelled rectangles.
ToyDataset generate_toy_dataset(const ToyDataConfig& config);

/// Replaces unseen labels with vocab.masked(); seen labels are untouched.
ToySample mask_unseen_annotations(const ToySample& sample, const ClassVocabulary& vocab);

/// Unit-normalizes every row of a matrix.
Tensor normalize_rows(const Tensor& x);

}  // namespace tagclip
