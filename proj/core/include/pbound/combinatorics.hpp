#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pbound/error.hpp"

namespace pbound {

/// One index tuple of the partial Bell polynomial B_{k,a}: delta[l-1] counts
/// the blocks of size l, so sum(delta) == a and sum(l * delta[l-1]) == k.
struct PartitionTuple {
    int k = 0;
    int a = 0;
    std::vector<int> delta;  // length k - a + 1

    friend bool operator==(const PartitionTuple&, const PartitionTuple&) = default;
};

/// All tuples for (k, a), in descending lexicographic order of delta.
/// Results are cached per (k, a); the call is thread-safe.
std::vector<PartitionTuple> enumerate_partitions(int k, int a);

/// Largest order for which Bell coefficients are computed exactly (k! < 2^64).
inline constexpr int kMaxExactBellOrder = 20;

/// k! / (prod_l delta_l! (l!)^delta_l), exact. Throws OverflowError for k > 20.
std::uint64_t bell_coefficient(const PartitionTuple& delta);

namespace detail {

inline void check_bell_args(int k, int a, std::size_t n_args) {
    if (k < 1 || a < 1 || a > k) {
        throw ArgumentError("bell_polynomial: need 1 <= a <= k");
    }
    if (n_args != static_cast<std::size_t>(k - a + 1)) {
        throw ArgumentError("bell_polynomial: expected k - a + 1 arguments");
    }
}

template <class T>
T integer_power(const T& base, int e) {
    T out(1.0);
    for (int i = 0; i < e; ++i) {
        out *= base;
    }
    return out;
}

}  // namespace detail

/// Partial Bell polynomial B_{k,a}(args[0], ..., args[k-a]).
///
/// Generic over the ring the arguments live in; the bound recursions evaluate
/// it over polynomials in 1/lambda.
template <class T>
T bell_polynomial(int k, int a, std::span<const T> args) {
    detail::check_bell_args(k, a, args.size());
    T sum(0.0);
    for (const auto& tuple : enumerate_partitions(k, a)) {
        T term(static_cast<double>(bell_coefficient(tuple)));
        for (std::size_t l = 0; l < tuple.delta.size(); ++l) {
            if (tuple.delta[l] > 0) {
                term *= detail::integer_power(args[l], tuple.delta[l]);
            }
        }
        sum += term;
    }
    return sum;
}

inline double bell_polynomial(int k, int a, std::span<const double> args) {
    return bell_polynomial<double>(k, a, args);
}

/// k-th derivative of rho(phi(t)) given outer[a-1] = rho^(a)(phi(t)) and
/// inner[l-1] = phi^(l)(t), a, l = 1..k.
double faa_di_bruno(int k, std::span<const double> outer, std::span<const double> inner);

}  // namespace pbound
