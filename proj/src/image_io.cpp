#include "lapsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace lapsr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint8_t quantize(float v) {
  const double scaled = std::clamp(double(v), 0.0, 1.0) * 255.0;
  return std::uint8_t(std::floor(scaled + 0.5));
}

ImageBuffer load_png(std::FILE* f, const std::filesystem::path& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_image: libpng initialization failed");
  }
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_image: corrupt or unsupported PNG '" + path.string() + "'");
  }
  png_init_io(png, f);
  png_read_info(png, info);

  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_image: interlaced PNG not supported: '" + path.string() + "'");
  }
  if (png_get_bit_depth(png, info) > 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_image: only 8-bit PNG supported: '" + path.string() + "'");
  }
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int h = int(png_get_image_height(png, info));
  const int w = int(png_get_image_width(png, info));
  const int ch = int(png_get_channels(png, info));
  if (ch != 1 && ch != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_image: unsupported channel count in '" + path.string() + "'");
  }
  pixels.resize(std::size_t(h) * w * ch);
  rows.resize(std::size_t(h));
  for (int y = 0; y < h; ++y) rows[std::size_t(y)] = pixels.data() + std::size_t(y) * w * ch;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageBuffer img(h, w, ch);
  for (std::size_t i = 0; i < pixels.size(); ++i) img.data[i] = float(pixels[i]) / 255.0f;
  return img;
}

void save_png(const ImageBuffer& img, const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw IoError("save_image: cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("save_image: libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("save_image: PNG write failed for '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(img.w), png_uint_32(img.h), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(std::size_t(img.w) * img.channels);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < img.channels; ++c)
        row[std::size_t(x) * img.channels + c] = quantize(img.at(y, x, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// 24-bit uncompressed bottom-up BMP, rows padded to 4 bytes.
ImageBuffer load_bmp(std::FILE* f, const std::filesystem::path& path) {
  auto fail = [&](const char* why) -> IoError {
    return IoError(std::string("load_image: ") + why + ": '" + path.string() + "'");
  };
  std::uint8_t header[54];
  if (std::fread(header, 1, 54, f) != 54) throw fail("truncated BMP header");
  auto u16 = [&](int off) { return std::uint16_t(header[off] | (header[off + 1] << 8)); };
  auto u32 = [&](int off) {
    return std::uint32_t(header[off]) | (std::uint32_t(header[off + 1]) << 8) |
           (std::uint32_t(header[off + 2]) << 16) | (std::uint32_t(header[off + 3]) << 24);
  };
  if (header[0] != 'B' || header[1] != 'M') throw fail("not a BMP file");
  const std::uint32_t data_offset = u32(10);
  const std::int32_t w = std::int32_t(u32(18));
  const std::int32_t h = std::int32_t(u32(22));
  if (u16(26) != 1 || u16(28) != 24 || u32(30) != 0)
    throw fail("only 24-bit uncompressed BMP supported");
  if (w < 1 || h < 1) throw fail("bad BMP dimensions");
  if (std::fseek(f, long(data_offset), SEEK_SET) != 0) throw fail("truncated BMP data");
  const std::size_t row_bytes = (std::size_t(w) * 3 + 3) & ~std::size_t(3);
  std::vector<std::uint8_t> row(row_bytes);
  ImageBuffer img(h, w, 3);
  for (int y = h - 1; y >= 0; --y) {
    if (std::fread(row.data(), 1, row_bytes, f) != row_bytes) throw fail("truncated BMP data");
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = float(row[std::size_t(x) * 3 + 2]) / 255.0f;
      img.at(y, x, 1) = float(row[std::size_t(x) * 3 + 1]) / 255.0f;
      img.at(y, x, 2) = float(row[std::size_t(x) * 3 + 0]) / 255.0f;
    }
  }
  return img;
}

void save_bmp(const ImageBuffer& img, const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw IoError("save_image: cannot open '" + path.string() + "' for writing");
  const std::size_t row_bytes = (std::size_t(img.w) * 3 + 3) & ~std::size_t(3);
  const std::uint32_t data_size = std::uint32_t(row_bytes * std::size_t(img.h));
  std::uint8_t header[54] = {};
  auto put16 = [&](int off, std::uint16_t v) {
    header[off] = std::uint8_t(v);
    header[off + 1] = std::uint8_t(v >> 8);
  };
  auto put32 = [&](int off, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) header[off + i] = std::uint8_t(v >> (8 * i));
  };
  header[0] = 'B';
  header[1] = 'M';
  put32(2, 54 + data_size);
  put32(10, 54);
  put32(14, 40);
  put32(18, std::uint32_t(img.w));
  put32(22, std::uint32_t(img.h));
  put16(26, 1);
  put16(28, 24);
  put32(34, data_size);
  put32(38, 2835);
  put32(42, 2835);
  if (std::fwrite(header, 1, 54, f.get()) != 54)
    throw IoError("save_image: BMP write failed for '" + path.string() + "'");
  std::vector<std::uint8_t> row(row_bytes, 0);
  for (int y = img.h - 1; y >= 0; --y) {
    for (int x = 0; x < img.w; ++x) {
      const bool gray = img.channels == 1;
      row[std::size_t(x) * 3 + 2] = quantize(img.at(y, x, 0));
      row[std::size_t(x) * 3 + 1] = quantize(img.at(y, x, gray ? 0 : 1));
      row[std::size_t(x) * 3 + 0] = quantize(img.at(y, x, gray ? 0 : 2));
    }
    if (std::fwrite(row.data(), 1, row_bytes, f.get()) != row_bytes)
      throw IoError("save_image: BMP write failed for '" + path.string() + "'");
  }
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw IoError("load_image: cannot open '" + path.string() + "'");
  std::uint8_t magic[8] = {};
  const std::size_t got = std::fread(magic, 1, 8, f.get());
  std::rewind(f.get());
  static const std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (got >= 8 && std::memcmp(magic, png_sig, 8) == 0) return load_png(f.get(), path);
  if (got >= 2 && magic[0] == 'B' && magic[1] == 'M') return load_bmp(f.get(), path);
  throw IoError("load_image: unsupported file format: '" + path.string() + "'");
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
  if (img.h < 1 || img.w < 1 || (img.channels != 1 && img.channels != 3))
    throw std::invalid_argument("save_image: empty or malformed image");
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".bmp")
    save_bmp(img, path);
  else if (ext == ".png" || ext.empty())
    save_png(img, path);
  else
    throw IoError("save_image: unsupported extension '" + ext + "'");
}

bool has_image_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".bmp";
}

}  // namespace lapsr
