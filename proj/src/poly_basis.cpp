#include "polylut/poly_basis.hpp"

#include <string>
#include <utility>

#include "polylut/error.hpp"

namespace polylut {

std::uint64_t count_monomials(int fan_in, int degree) {
  if (fan_in < 1 || degree < 0) {
    throw Error("count_monomials: need fan_in >= 1 and degree >= 0, got F=" +
                std::to_string(fan_in) + " D=" + std::to_string(degree));
  }
  // C(F+D, D) built incrementally; every partial product C(F+i, i) is exact.
  __extension__ using u128 = unsigned __int128;
  u128 acc = 1;
  for (int i = 1; i <= degree; ++i) {
    acc = acc * static_cast<unsigned>(fan_in + i) / static_cast<unsigned>(i);
    if (acc > UINT64_MAX) {
      throw Error("count_monomials: C(" + std::to_string(fan_in + degree) + ", " +
                  std::to_string(degree) + ") overflows 64 bits");
    }
  }
  return static_cast<std::uint64_t>(acc);
}

MonomialBasis::MonomialBasis(int fan_in, int degree, std::vector<ExponentVector> terms)
    : fan_in_(fan_in), degree_(degree), terms_(std::move(terms)) {}

void MonomialBasis::expand(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto& e = terms_[i];
    double m = 1.0;
    for (int j = 0; j < fan_in_; ++j) {
      for (int k = 0; k < e[j]; ++k) m *= x[j];
    }
    out[i] = m;
  }
}

std::vector<double> MonomialBasis::expand(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(fan_in_)) {
    throw Error("expand: expected " + std::to_string(fan_in_) + " inputs, got " +
                std::to_string(x.size()));
  }
  std::vector<double> out(terms_.size());
  expand(x, out);
  return out;
}

void MonomialBasis::expand_grad(std::span<const double> x, std::span<double> out) const {
  const auto f = static_cast<std::size_t>(fan_in_);
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto& e = terms_[i];
    for (std::size_t j = 0; j < f; ++j) {
      if (e[j] == 0) {
        out[i * f + j] = 0.0;
        continue;
      }
      double g = static_cast<double>(e[j]);
      for (int k = 0; k + 1 < e[j]; ++k) g *= x[j];
      for (std::size_t other = 0; other < f; ++other) {
        if (other == j) continue;
        for (int k = 0; k < e[other]; ++k) g *= x[other];
      }
      out[i * f + j] = g;
    }
  }
}

std::vector<double> MonomialBasis::expand_grad(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(fan_in_)) {
    throw Error("expand_grad: expected " + std::to_string(fan_in_) + " inputs, got " +
                std::to_string(x.size()));
  }
  std::vector<double> out(terms_.size() * static_cast<std::size_t>(fan_in_));
  expand_grad(x, out);
  return out;
}

namespace {

// Appends every exponent vector with entries summing to `remaining` over
// positions [pos, F), in descending lexicographic order.
void compositions(ExponentVector& cur, std::size_t pos, int remaining,
                  std::vector<ExponentVector>& out) {
  if (pos + 1 == cur.size()) {
    cur[pos] = static_cast<std::uint8_t>(remaining);
    out.push_back(cur);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[pos] = static_cast<std::uint8_t>(e);
    compositions(cur, pos + 1, remaining - e, out);
  }
  cur[pos] = 0;
}

}  // namespace

MonomialBasis enumerate_basis(int fan_in, int degree, std::size_t max_terms) {
  const std::uint64_t count = count_monomials(fan_in, degree);
  if (count > max_terms) {
    throw Error("enumerate_basis: F=" + std::to_string(fan_in) + " D=" + std::to_string(degree) +
                " needs " + std::to_string(count) + " terms, cap is " + std::to_string(max_terms));
  }
  if (degree > 255) throw Error("enumerate_basis: degree above 255 not representable");
  std::vector<ExponentVector> terms;
  terms.reserve(static_cast<std::size_t>(count));
  ExponentVector cur(static_cast<std::size_t>(fan_in), 0);
  for (int d = 0; d <= degree; ++d) compositions(cur, 0, d, terms);
  return MonomialBasis(fan_in, degree, std::move(terms));
}

}  // namespace polylut
