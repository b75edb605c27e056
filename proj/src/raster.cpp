#include "sp360/raster.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include "sp360/error.hpp"

namespace sp360 {

Raster::Raster(int w, int h, int c, double fill)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

void require_same_shape(const Raster& a, const Raster& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::ShapeError,
                std::string(what) + ": " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                    "x" + std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                    std::to_string(b.height) + "x" + std::to_string(b.channels));
  }
}

namespace {

constexpr std::array<std::uint8_t, 4> kFrasMagic = {'F', 'R', 'A', 'S'};
constexpr std::array<std::uint8_t, 8> kPngMagic = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

std::vector<std::uint8_t> encode_fras(const Raster& raster) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + raster.size() * 4);
  out.insert(out.end(), kFrasMagic.begin(), kFrasMagic.end());
  put_u32(out, static_cast<std::uint32_t>(raster.width));
  put_u32(out, static_cast<std::uint32_t>(raster.height));
  put_u32(out, static_cast<std::uint32_t>(raster.channels));
  for (double v : raster.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Raster decode_fras(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || !std::equal(kFrasMagic.begin(), kFrasMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::FormatError, "missing FRAS magic");
  }
  const std::uint32_t w = get_u32(bytes, 4);
  const std::uint32_t h = get_u32(bytes, 8);
  const std::uint32_t c = get_u32(bytes, 12);
  const std::uint64_t count = static_cast<std::uint64_t>(w) * h * c;
  if (bytes.size() != 16 + count * 4) {
    throw Error(ErrorCode::CorruptRaster, "FRAS header says " + std::to_string(w) + "x" +
                                              std::to_string(h) + "x" + std::to_string(c) +
                                              " but payload holds " +
                                              std::to_string((bytes.size() - 16) / 4) + " values");
  }
  Raster r(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  for (std::size_t i = 0; i < count; ++i) {
    r.data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, 16 + 4 * i)));
  }
  return r;
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3) {
    throw Error(ErrorCode::ShapeError, "PNG supports 1 or 3 channels, got " +
                                           std::to_string(raster.channels));
  }
  std::vector<std::uint8_t> pixels(raster.size());
  std::transform(raster.data.begin(), raster.data.end(), pixels.begin(), quantize);

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = raster.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::FormatError, std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::FormatError, std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPngMagic.size() ||
      !std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::FormatError, "missing PNG signature");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::FormatError, std::string("png decode: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::FormatError, std::string("png decode: ") + image.message);
  }
  Raster r(static_cast<int>(image.width), static_cast<int>(image.height), channels);
  std::transform(pixels.begin(), pixels.end(), r.data.begin(),
                 [](std::uint8_t b) { return b / 255.0; });
  return r;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

void save_raster(const std::filesystem::path& path, const Raster& raster) {
  if (path.extension() == ".png") {
    write_file_bytes(path, encode_png(raster));
  } else {
    write_file_bytes(path, encode_fras(raster));
  }
}

Raster load_raster(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 4 && std::equal(kFrasMagic.begin(), kFrasMagic.end(), bytes.begin())) {
    return decode_fras(bytes);
  }
  if (bytes.size() >= 8 && std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    return decode_png(bytes);
  }
  throw Error(ErrorCode::FormatError, "unrecognized raster format: " + path.string());
}

Raster downscale(const Raster& raster, int factor) {
  if (factor <= 1) return raster;
  const int w = raster.width / factor;
  const int h = raster.height / factor;
  Raster out(w, h, raster.channels);
  const double norm = 1.0 / (factor * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < raster.channels; ++c) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) acc += raster.at(x * factor + dx, y * factor + dy, c);
        }
        out.at(x, y, c) = acc * norm;
      }
    }
  }
  return out;
}

}  // namespace sp360
