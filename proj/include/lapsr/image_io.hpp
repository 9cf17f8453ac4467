#pragma once

#include <filesystem>
#include <stdexcept>

#include "lapsr/image.hpp"

namespace lapsr {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit non-interlaced PNG (gray or RGB; palette expanded, alpha
/// stripped) or a 24-bit uncompressed BMP. Values are byte/255 exactly.
ImageBuffer load_image(const std::filesystem::path& path);

/// Writes PNG or BMP by extension (default PNG). Quantization rounds
/// half away from zero; an 8-bit round trip is byte-exact.
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace lapsr
