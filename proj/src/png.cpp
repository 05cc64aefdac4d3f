#include "hydra/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "hydra/errors.hpp"

namespace hydra {

void write_png(const std::filesystem::path& path, const Image& img) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw DataError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  std::vector<png_byte> pixels(img.numel());
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<png_byte>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.size));
  for (int r = 0; r < img.size; ++r) rows[r] = pixels.data() + static_cast<std::size_t>(r) * img.size;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.size, img.size, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace hydra
