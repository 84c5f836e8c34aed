#ifndef CAUSALEM_RNG_HPP
#define CAUSALEM_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace causalem {

// Identifier of the generator scheme. Fixtures are only reproducible against
// this exact algorithm, so the id is part of the file-format contract and is
// quoted in the README.
inline constexpr const char* kRngAlgorithmId = "splitmix64-streams-v1";

// Deterministic counter-based generator. The core step is splitmix64; derived
// streams mix tag values into the state so every purpose (CPT column, dataset
// row, EM restart) gets an independent, platform-stable sequence. None of the
// standard-library distributions are used anywhere: their outputs are not
// specified bit-for-bit across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform01();

  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n);

  // Standard normal via the Marsaglia polar method (one value cached).
  double normal();

  // Gamma(alpha, 1) via Marsaglia-Tsang squeeze, with the standard
  // alpha < 1 boosting step. alpha must be positive.
  double gamma(double alpha);

  // Dirichlet draw; out is resized to alpha.size() and sums to 1.
  void dirichlet(const std::vector<double>& alpha, std::vector<double>& out);

  // Independent child stream keyed by up to three integers. Deriving does not
  // advance this generator, so the same key always yields the same stream.
  Rng derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;

  // Child stream keyed by a tag string plus integers.
  Rng derive(std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0) const;

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace causalem

#endif
