#pragma once

#include <filesystem>

#include "gcp/dataset.hpp"

namespace gcp {

// Single-channel 8- or 16-bit label images; pixel value = class index.
// Reads binary PGM (P5) and grayscale PNG; the format follows the extension.
LabelMap read_label_map(const std::filesystem::path& path);

// Writes binary PGM, 8-bit when every label fits, else 16-bit big-endian.
void write_label_map_pgm(const LabelMap& map, const std::filesystem::path& path);
void write_label_map_png(const LabelMap& map, const std::filesystem::path& path);

}  // namespace gcp
