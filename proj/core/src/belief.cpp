#include "saferep/belief.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "saferep/numeric_text.hpp"

namespace saferep {

namespace {

void check_unit(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw std::invalid_argument(std::string("bba: ") + name + " = " + format_double(v) + " outside [0, 1]");
  }
}

Bba clamp_mu(const Bba& b) {
  const double mu = std::clamp(b.mu, kMuFloor, kMuCeil);
  if (mu == b.mu) return b;
  const double mass = b.b_safe + b.b_unsafe;
  if (mass <= 0.0) return {0.0, 0.0, mu};
  const double scale = (1.0 - mu) / mass;
  return {b.b_safe * scale, b.b_unsafe * scale, mu};
}

}  // namespace

void validate_bba(const Bba& b) {
  check_unit(b.b_safe, "b_safe");
  check_unit(b.b_unsafe, "b_unsafe");
  check_unit(b.mu, "mu");
  const double sum = b.b_safe + b.b_unsafe + b.mu;
  if (std::abs(sum - 1.0) > kBbaSumTolerance) {
    throw std::invalid_argument("bba: components sum to " + format_double(sum) + ", not 1");
  }
}

bool is_valid_bba(const Bba& b) {
  try {
    validate_bba(b);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

std::string to_string(const Bba& b) {
  return "(" + format_double(b.b_safe) + ", " + format_double(b.b_unsafe) + ", " + format_double(b.mu) + ")";
}

// Dividing numerator and denominator of the product form by prod(mu) turns
// every source weight into (1 - mu_i) / mu_i. Same value, no vanishing
// products for large sets.
Bba wbf_fuse(std::span<const Bba> set) {
  if (set.size() < 2) throw std::invalid_argument("wbf_fuse: need at least 2 opinions");
  double w_sum = 0.0, b_acc = 0.0, d_acc = 0.0;
  for (const Bba& raw : set) {
    validate_bba(raw);
    const Bba b = clamp_mu(raw);
    const double w = (1.0 - b.mu) / b.mu;
    w_sum += w;
    b_acc += b.b_safe * w;
    d_acc += b.b_unsafe * w;
  }
  Bba out{b_acc / w_sum, d_acc / w_sum, 0.0};
  out.mu = std::max(0.0, 1.0 - out.b_safe - out.b_unsafe);
  return out;
}

}  // namespace saferep
