#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "tagclip/tensor.hpp"

namespace tagclip {

// TGT1 layout, all integers little-endian:
//   "TGT1" | u16 name_len | name (UTF-8) | u32 rank | rank × u32 extent |
//   prod(extents) × f64 (IEEE-754, row-major)

class TensorFormatError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, truncated, rank_too_large, non_finite, name_too_long };

  TensorFormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

constexpr std::size_t kMaxTensorRank = 8;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_tensor_file(const std::filesystem::path& path, const std::string& name,
                       const Tensor& t);
NamedTensor read_tensor_file(const std::filesystem::path& path);

std::string encode_tensor(const std::string& name, const Tensor& t);
NamedTensor decode_tensor(const std::string& bytes);

}  // namespace tagclip
