#pragma once

#include <cstdint>

namespace uqvae::detail {

inline constexpr int kSobolMaxDegree = 13;

struct SobolDirectionEntry {
  int degree;
  std::uint32_t coeffs;  // interior polynomial coefficients a_1..a_{s-1}
  std::uint32_t m[kSobolMaxDegree];
};

extern const int kSobolTableDims;
extern const SobolDirectionEntry kSobolTable[];

}  // namespace uqvae::detail
