#include <doctest.h>

#include "limetree/error.hpp"
#include "limetree/image.hpp"

using namespace limetree;

TEST_CASE("PNG and PPM round trips") {
  RgbImage image(3, 2);
  for (std::size_t i = 0; i < 6; ++i) image.set_pixel(i, {static_cast<std::uint8_t>(i * 40), 7, static_cast<std::uint8_t>(255 - i)});
  CHECK(decode_rgb_image(encode_png(image)) == image);
  CHECK(decode_rgb_image(encode_ppm(image)) == image);
}

TEST_CASE("16-bit label PNG round trip") {
  LabelImage labels{3, 1, {0, 300, 70000 % 65536}};
  const auto back = decode_label_image(encode_label_png(labels));
  CHECK(back.width == 3);
  CHECK(back.labels == labels.labels);
}

TEST_CASE("8-bit PGM masks") {
  const std::string pgm = std::string("P5\n2 1\n255\n") + char(0) + char(1);
  const auto labels = decode_label_image(std::span(reinterpret_cast<const std::uint8_t*>(pgm.data()), pgm.size()));
  CHECK(labels.labels == std::vector<std::int32_t>{0, 1});
}

TEST_CASE("garbage bytes are rejected") {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
  CHECK_THROWS_AS(decode_rgb_image(junk), Error);
  auto png = encode_png(RgbImage(2, 2));
  png.resize(png.size() / 2);
  CHECK_THROWS_AS(decode_rgb_image(png), Error);
}

TEST_CASE("base64 round trip") {
  const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 251, 255};
  CHECK(base64_decode(base64_encode(bytes)) == bytes);
  CHECK(base64_encode(std::vector<std::uint8_t>{'h', 'i'}) == "aGk=");
  CHECK_THROWS_AS(base64_decode("!!!"), Error);
}
