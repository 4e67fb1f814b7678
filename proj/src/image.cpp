#include "limetree/image.hpp"

#include <png.h>
#include <sodium.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <csetjmp>
#include <sstream>

#include "limetree/error.hpp"

namespace limetree {

RgbImage::RgbImage(std::size_t width, std::size_t height, Rgb fill)
    : width_(width), height_(height), data_(3 * width * height) {
  for (std::size_t i = 0; i < width * height; ++i) set_pixel(i, fill);
}

RgbImage::RgbImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> interleaved)
    : width_(width), height_(height), data_(std::move(interleaved)) {
  require(data_.size() == 3 * width * height, "RGB buffer size does not match image dimensions");
}

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

// Minimal PNM header parser: magic, width, height, maxval, single whitespace.
struct PnmHeader {
  std::string magic;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t maxval = 0;
  std::size_t offset = 0;
};

PnmHeader parse_pnm_header(std::span<const std::uint8_t> bytes) {
  PnmHeader header;
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_token = [&] {
    skip_space_and_comments();
    std::string token;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) token.push_back(static_cast<char>(bytes[pos++]));
    return token;
  };
  header.magic = read_token();
  try {
    header.width = std::stoul(read_token());
    header.height = std::stoul(read_token());
    header.maxval = std::stoul(read_token());
  } catch (const std::exception&) {
    fail(ErrorCode::invalid_argument, "malformed PNM header");
  }
  if (pos >= bytes.size()) fail(ErrorCode::invalid_argument, "truncated PNM data");
  header.offset = pos + 1;
  return header;
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t count) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + count > state->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, state->bytes.data() + state->offset, count);
  state->offset += count;
}

void png_write_callback(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

void png_flush_callback(png_structp) {}

thread_local std::string png_last_error;

void png_error_callback(png_structp png, png_const_charp message) {
  png_last_error = message;
  png_longjmp(png, 1);
}

void png_warning_callback(png_structp, png_const_charp) {}

struct DecodedPng {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> rows;  // tightly packed, big-endian for 16 bit
};

// libpng reports errors by longjmp; every C++ object touched below is owned by
// the caller's frame, so nothing with a destructor is skipped.
bool decode_png_into(std::span<const std::uint8_t> bytes, bool allow_palette, DecodedPng& out,
                     std::vector<png_bytep>& pointers, PngReadState& state) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_callback, png_warning_callback);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  state = PngReadState{bytes, 0};
  png_set_read_fn(png, &state, png_read_callback);
  png_read_info(png, info);

  const auto color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    if (!allow_palette) png_error(png, "palette PNG cannot be used as a label mask");
    png_set_palette_to_rgb(png);
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.rows.resize(rowbytes * out.height);
  pointers.resize(out.height);
  for (std::size_t y = 0; y < out.height; ++y) pointers[y] = out.rows.data() + y * rowbytes;
  png_read_image(png, pointers.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

DecodedPng decode_png(std::span<const std::uint8_t> bytes, bool allow_palette) {
  DecodedPng out;
  std::vector<png_bytep> pointers;
  PngReadState state;
  png_last_error.clear();
  if (!decode_png_into(bytes, allow_palette, out, pointers, state))
    fail(ErrorCode::invalid_argument, "PNG decode failed: " + png_last_error);
  return out;
}

bool write_png_into(std::size_t width, std::size_t height, int color_type, int bit_depth,
                    std::span<const std::uint8_t> packed_rows, std::vector<std::uint8_t>& out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_callback, png_warning_callback);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &out, png_write_callback, png_flush_callback);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = height == 0 ? 0 : packed_rows.size() / height;
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(packed_rows.data() + y * rowbytes));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

std::vector<std::uint8_t> write_png(std::size_t width, std::size_t height, int color_type, int bit_depth,
                                    std::span<const std::uint8_t> packed_rows) {
  std::vector<std::uint8_t> out;
  png_last_error.clear();
  if (!write_png_into(width, height, color_type, bit_depth, packed_rows, out))
    fail(ErrorCode::invalid_argument, "PNG encode failed: " + png_last_error);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  std::ostringstream header;
  header << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.insert(out.end(), image.bytes().begin(), image.bytes().end());
  return out;
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  return write_png(image.width(), image.height(), PNG_COLOR_TYPE_RGB, 8, image.bytes());
}

std::vector<std::uint8_t> encode_label_png(const LabelImage& labels) {
  std::vector<std::uint8_t> packed(labels.labels.size() * 2);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const auto v = labels.labels[i];
    require(v >= 0 && v <= 0xFFFF, "label out of 16-bit range");
    packed[2 * i] = static_cast<std::uint8_t>(v >> 8);
    packed[2 * i + 1] = static_cast<std::uint8_t>(v & 0xFF);
  }
  return write_png(labels.width, labels.height, PNG_COLOR_TYPE_GRAY, 16, packed);
}

RgbImage decode_rgb_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) {
    DecodedPng png = decode_png(bytes, true);
    if (png.bit_depth != 8) fail(ErrorCode::invalid_argument, "anchor PNG must be 8-bit");
    std::vector<std::uint8_t> rgb(3 * png.width * png.height);
    for (std::size_t i = 0; i < png.width * png.height; ++i) {
      const std::uint8_t* src = png.rows.data() + i * png.channels;
      if (png.channels >= 3) {
        rgb[3 * i] = src[0];
        rgb[3 * i + 1] = src[1];
        rgb[3 * i + 2] = src[2];
      } else {
        rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = src[0];
      }
    }
    return RgbImage(png.width, png.height, std::move(rgb));
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    const PnmHeader header = parse_pnm_header(bytes);
    if (header.maxval != 255) fail(ErrorCode::invalid_argument, "PPM must be 8-bit (maxval 255)");
    const std::size_t count = 3 * header.width * header.height;
    if (header.offset + count > bytes.size()) fail(ErrorCode::invalid_argument, "truncated PPM data");
    std::vector<std::uint8_t> rgb(bytes.begin() + header.offset, bytes.begin() + header.offset + count);
    return RgbImage(header.width, header.height, std::move(rgb));
  }
  fail(ErrorCode::invalid_argument, "unsupported image format (expected PNG or binary PPM)");
}

LabelImage decode_label_image(std::span<const std::uint8_t> bytes) {
  LabelImage out;
  if (is_png(bytes)) {
    DecodedPng png = decode_png(bytes, false);
    if (png.channels != 1) fail(ErrorCode::invalid_argument, "segmentation mask PNG must be single-channel");
    out.width = png.width;
    out.height = png.height;
    out.labels.resize(png.width * png.height);
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      out.labels[i] = png.bit_depth == 16 ? (png.rows[2 * i] << 8) | png.rows[2 * i + 1] : png.rows[i];
    }
    return out;
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    const PnmHeader header = parse_pnm_header(bytes);
    if (header.maxval == 0 || header.maxval > 0xFFFF) fail(ErrorCode::invalid_argument, "bad PGM maxval");
    const bool wide = header.maxval > 255;
    const std::size_t count = header.width * header.height;
    if (header.offset + count * (wide ? 2 : 1) > bytes.size()) fail(ErrorCode::invalid_argument, "truncated PGM data");
    out.width = header.width;
    out.height = header.height;
    out.labels.resize(count);
    const std::uint8_t* p = bytes.data() + header.offset;
    for (std::size_t i = 0; i < count; ++i) out.labels[i] = wide ? (p[2 * i] << 8) | p[2 * i + 1] : p[i];
    return out;
  }
  fail(ErrorCode::invalid_argument, "unsupported mask format (expected PNG or binary PGM)");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::not_found, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::invalid_argument, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

RgbImage read_rgb_image(const std::filesystem::path& path) { return decode_rgb_image(read_file(path)); }

LabelImage read_label_image(const std::filesystem::path& path) { return decode_label_image(read_file(path)); }

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  const std::size_t length = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(length, '\0');
  sodium_bin2base64(out.data(), length, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(length - 1);  // drop terminator
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t written = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), " \r\n", &written, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0)
    fail(ErrorCode::invalid_argument, "invalid base64 payload");
  out.resize(written);
  return out;
}

}  // namespace limetree
