#pragma once

#include <filesystem>

#include "hydra/image.hpp"

namespace hydra {

/// 8-bit grayscale PNG, [0, 1] mapped linearly to [0, 255] (values outside clipped).
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace hydra
