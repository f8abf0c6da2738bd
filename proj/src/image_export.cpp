#include "tagclip/image_export.hpp"

#include <fstream>
#include <stdexcept>

namespace tagclip {

std::array<std::uint8_t, 3> palette_color(ClassId c) {
  const auto u = static_cast<std::uint32_t>(c);
  return {static_cast<std::uint8_t>((37 * u + 11) % 256), static_cast<std::uint8_t>((73 * u + 29) % 256),
          static_cast<std::uint8_t>((151 * u + 47) % 256)};
}

std::string encode_label_image(const LabelMap& labels) {
  std::string out = "P6\n" + std::to_string(labels.cols) + " " + std::to_string(labels.rows) + "\n255\n";
  out.reserve(out.size() + 3 * labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId c = labels.labels[i];
    if (c < 0 || c > 255) {
      throw std::invalid_argument("label " + std::to_string(c) + " at pixel " + std::to_string(i) +
                                  " has no palette entry");
    }
    for (auto b : palette_color(c)) out.push_back(static_cast<char>(b));
  }
  return out;
}

void export_label_image(const LabelMap& labels, const std::filesystem::path& path) {
  const std::string bytes = encode_label_image(labels);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace tagclip
