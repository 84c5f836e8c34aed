#include "causalem/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace causalem {

namespace {

inline std::uint64_t splitmix_step(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Finalizer used for stream derivation; full-avalanche mix of one word.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
  z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
  return z ^ (z >> 33);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(seed) {}

std::uint64_t Rng::next_u64() { return splitmix_step(state_); }

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int requires n > 0");
  // Rejection-free modulo is biased for huge n; all our n are tiny, but use
  // the multiply-shift reduction anyway so the bias is below 2^-32.
  return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                           static_cast<unsigned __int128>(n)) >> 64);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

double Rng::gamma(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("Rng::gamma requires alpha > 0");
  if (alpha < 1.0) {
    // Boost: G(a) = G(a+1) * U^{1/a}.
    double u;
    do {
      u = uniform01();
    } while (u == 0.0);
    return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

void Rng::dirichlet(const std::vector<double>& alpha, std::vector<double>& out) {
  out.resize(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = gamma(alpha[i]);
    total += out[i];
  }
  if (total <= 0.0) {
    // All gammas underflowed (possible for very small alpha); fall back to a
    // point mass on the largest draw to keep the simplex invariant.
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.size(); ++i)
      if (out[i] > out[best]) best = i;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.0;
    out[best] = 1.0;
    return;
  }
  for (double& x : out) x /= total;
}

Rng Rng::derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
  std::uint64_t s = state_;
  s = mix64(s ^ mix64(a + 0x9E3779B97F4A7C15ULL));
  s = mix64(s ^ mix64(b + 0xC2B2AE3D27D4EB4FULL));
  s = mix64(s ^ mix64(c + 0x165667B19E3779F9ULL));
  return Rng(s);
}

Rng Rng::derive(std::string_view tag, std::uint64_t a, std::uint64_t b) const {
  return derive(fnv1a(tag), a, b);
}

}  // namespace causalem
