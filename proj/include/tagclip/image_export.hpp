#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "tagclip/embeddings.hpp"

namespace tagclip {

/// Fixed palette: class c -> ((37c+11), (73c+29), (151c+47)) mod 256.
std::array<std::uint8_t, 3> palette_color(ClassId c);

/// Binary P6 image bytes. Throws std::invalid_argument for labels outside 0..255.
std::string encode_label_image(const LabelMap& labels);

/// Writes encode_label_image(labels) to `path`; throws std::runtime_error if unwritable.
void export_label_image(const LabelMap& labels, const std::filesystem::path& path);

}  // namespace tagclip
