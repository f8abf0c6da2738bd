#include "tagclip/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tagclip {

namespace {

constexpr char kMagic[4] = {'T', 'G', 'T', '1'};

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw TensorFormatError(TensorFormatError::Kind::truncated,
                              std::string("TGT1: truncated while reading ") + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensor(const std::string& name, const Tensor& t) {
  if (name.size() > 0xFFFF) {
    throw TensorFormatError(TensorFormatError::Kind::name_too_long, "TGT1: name exceeds 65535 bytes");
  }
  if (t.rank() > kMaxTensorRank) {
    throw TensorFormatError(TensorFormatError::Kind::rank_too_large,
                            "TGT1: rank " + std::to_string(t.rank()) + " exceeds 8");
  }
  std::string out(kMagic, 4);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out += name;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw TensorFormatError(TensorFormatError::Kind::non_finite,
                              "TGT1: refusing to write non-finite value in '" + name + "'");
    }
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

NamedTensor decode_tensor(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw TensorFormatError(TensorFormatError::Kind::bad_magic, "TGT1: bad magic");
  }
  r.get_bytes(4, "magic");
  const auto name_len = r.get_le<std::uint16_t>("name length");
  std::string name = r.get_bytes(name_len, "name");
  const auto rank = r.get_le<std::uint32_t>("rank");
  if (rank > kMaxTensorRank) {
    throw TensorFormatError(TensorFormatError::Kind::rank_too_large,
                            "TGT1: rank " + std::to_string(rank) + " exceeds 8");
  }
  Shape shape(rank);
  for (auto& e : shape) e = r.get_le<std::uint32_t>("extent");
  const std::size_t n = shape_numel(shape);
  if (r.remaining() / 8 < n) {
    throw TensorFormatError(TensorFormatError::Kind::truncated,
                            "TGT1: payload holds " + std::to_string(r.remaining()) +
                                " bytes, need " + std::to_string(n * 8));
  }
  std::vector<double> values(n);
  for (auto& v : values) v = std::bit_cast<double>(r.get_le<std::uint64_t>("payload"));
  return {std::move(name), Tensor::from(std::move(shape), std::move(values))};
}

void write_tensor_file(const std::filesystem::path& path, const std::string& name,
                       const Tensor& t) {
  const std::string bytes = encode_tensor(name, t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw TensorFormatError(TensorFormatError::Kind::io, "cannot open " + path.string() + " for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TensorFormatError(TensorFormatError::Kind::io, "write failed: " + path.string());
}

NamedTensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorFormatError(TensorFormatError::Kind::io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace tagclip
