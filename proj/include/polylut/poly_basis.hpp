#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace polylut {

/// Exponents of one monomial, one entry per input variable.
using ExponentVector = std::vector<std::uint8_t>;

/// Largest basis enumerate_basis() will materialize unless told otherwise.
inline constexpr std::size_t kDefaultMaxTerms = 1u << 20;

/// Number of monomials of total degree <= `degree` in `fan_in` variables,
/// i.e. C(fan_in + degree, degree). Throws Error if the value overflows 64 bits.
std::uint64_t count_monomials(int fan_in, int degree);

/// The ordered set of monomials used to expand a neuron's inputs.
///
/// Terms are in graded lexicographic order: grouped by total degree, and
/// within a degree sorted by descending exponent vector, so that for two
/// variables and degree 3 the order is
///   1, x0, x1, x0^2, x0 x1, x1^2, x0^3, x0^2 x1, x0 x1^2, x1^3.
/// The first term is always the constant 1, which plays the role of the bias.
class MonomialBasis {
 public:
  MonomialBasis() = default;
  MonomialBasis(int fan_in, int degree, std::vector<ExponentVector> terms);

  int fan_in() const noexcept { return fan_in_; }
  int degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return terms_.size(); }
  const std::vector<ExponentVector>& terms() const noexcept { return terms_; }
  const ExponentVector& term(std::size_t i) const { return terms_.at(i); }

  /// out[i] = prod_j x[j]^e_ij. Requires x.size() == fan_in, out.size() == size().
  void expand(std::span<const double> x, std::span<double> out) const;
  std::vector<double> expand(std::span<const double> x) const;

  /// Jacobian of expand(): out[i * fan_in + j] = d m_i / d x_j.
  void expand_grad(std::span<const double> x, std::span<double> out) const;
  std::vector<double> expand_grad(std::span<const double> x) const;

  bool operator==(const MonomialBasis&) const = default;

 private:
  int fan_in_ = 0;
  int degree_ = 0;
  std::vector<ExponentVector> terms_;
};

/// Enumerates all monomials of degree <= `degree` in `fan_in` variables.
/// Throws Error if fan_in < 1, degree < 0, or the basis exceeds `max_terms`.
MonomialBasis enumerate_basis(int fan_in, int degree, std::size_t max_terms = kDefaultMaxTerms);

}  // namespace polylut
