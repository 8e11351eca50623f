#pragma once

#include <span>
#include <string>

namespace saferep {

/// Basic belief assignment: masses on "safe", "unsafe" and either.
struct Bba {
  double b_safe = 0.0;
  double b_unsafe = 0.0;
  double mu = 1.0;

  friend bool operator==(const Bba&, const Bba&) = default;
};

inline constexpr Bba kEmptyBba{0.0, 0.0, 1.0};

inline constexpr double kBbaSumTolerance = 1e-9;
inline constexpr double kMuFloor = 1e-12;
inline constexpr double kMuCeil = 1.0 - 1e-9;

/// Throws std::invalid_argument naming the offending component.
void validate_bba(const Bba& b);
bool is_valid_bba(const Bba& b);

std::string to_string(const Bba& b);

/// Weighted belief fusion of two or more opinions. Each mu is clamped into
/// [kMuFloor, kMuCeil] first, with the belief masses rescaled to keep the sum.
Bba wbf_fuse(std::span<const Bba> set);

}  // namespace saferep
