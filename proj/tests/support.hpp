#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "limetree/blackbox.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/types.hpp"

namespace testing {

// 1 x d grid of 2x2 cells, each a distinct non-black colour.
inline limetree::InterpretableDomain strip_domain(std::size_t d) {
  limetree::RgbImage image(2 * d, 2);
  for (std::size_t s = 0; s < d; ++s)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x)
        image.set_pixel(y * image.width() + 2 * s + x,
                        {static_cast<std::uint8_t>(40 + 7 * s), static_cast<std::uint8_t>(200 - 5 * s), 90});
  return limetree::InterpretableDomain::image(image, limetree::build_grid_segmentation(2 * d, 2, 1, d));
}

// Boolean table from a rule over the bit string (bit 0 first).
template <typename Rule>
limetree::Matrix table_from(std::size_t d, std::size_t classes, Rule rule) {
  limetree::Matrix table(std::size_t{1} << d, classes);
  for (std::uint64_t i = 0; i < (std::uint64_t{1} << d); ++i) {
    std::vector<std::uint8_t> bits(d);
    for (std::size_t b = 0; b < d; ++b) bits[b] = (i >> (d - 1 - b)) & 1;
    const std::vector<double> row = rule(bits);
    for (std::size_t c = 0; c < classes; ++c) table(i, c) = row[c];
  }
  return table;
}

inline limetree::BlackBoxPtr table_box(const limetree::InterpretableDomain& domain, limetree::Matrix table) {
  limetree::SyntheticSpec spec;
  spec.kind = limetree::SyntheticKind::boolean_table;
  spec.d = domain.dimension();
  spec.class_count = table.cols();
  spec.table = std::move(table);
  return limetree::make_synthetic(spec, domain);
}

inline limetree::BlackBoxPtr seeded_box(const limetree::InterpretableDomain& domain, limetree::SyntheticKind kind,
                                        std::size_t classes, std::uint64_t seed) {
  limetree::SyntheticSpec spec;
  spec.kind = kind;
  spec.d = domain.dimension();
  spec.class_count = classes;
  spec.seed = seed;
  return limetree::make_synthetic(spec, domain);
}

// Every point of {0,1}^d in index order, built independently of the library.
inline std::vector<limetree::InterpretablePoint> all_points(std::size_t d) {
  std::vector<limetree::InterpretablePoint> out;
  for (std::uint64_t i = 0; i < (std::uint64_t{1} << d); ++i) {
    std::vector<std::uint8_t> bits(d);
    for (std::size_t b = 0; b < d; ++b) bits[b] = (i >> (d - 1 - b)) & 1;
    out.emplace_back(bits);
  }
  return out;
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

}  // namespace testing
