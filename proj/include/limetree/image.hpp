#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace limetree {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  auto operator<=>(const Rgb&) const = default;
};

/// 8-bit interleaved RGB image.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::size_t width, std::size_t height, Rgb fill = {});
  RgbImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> interleaved);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return width_ * height_; }

  Rgb pixel(std::size_t index) const {
    const auto* p = data_.data() + 3 * index;
    return {p[0], p[1], p[2]};
  }
  void set_pixel(std::size_t index, Rgb value) {
    auto* p = data_.data() + 3 * index;
    p[0] = value.r;
    p[1] = value.g;
    p[2] = value.b;
  }
  Rgb at(std::size_t x, std::size_t y) const { return pixel(y * width_ + x); }

  std::span<const std::uint8_t> bytes() const noexcept { return data_; }

  bool operator==(const RgbImage&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Single-channel integer image, used for segment label masks.
struct LabelImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::int32_t> labels;
};

// Encoders/decoders work on in-memory byte buffers so the same code serves
// files, HTTP bodies and base64 payloads. Format is sniffed from magic bytes.
std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
/// 16-bit grayscale PNG holding label values.
std::vector<std::uint8_t> encode_label_png(const LabelImage& labels);

/// Accepts binary PPM (P6, maxval 255) or 8-bit RGB/RGBA/gray PNG.
RgbImage decode_rgb_image(std::span<const std::uint8_t> bytes);
/// Accepts PGM (P5, 8 or 16 bit) or single-channel 8/16-bit PNG.
LabelImage decode_label_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

RgbImage read_rgb_image(const std::filesystem::path& path);
LabelImage read_label_image(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace limetree
