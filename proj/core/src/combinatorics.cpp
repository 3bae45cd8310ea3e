#include "pbound/combinatorics.hpp"

#include <map>
#include <mutex>
#include <utility>

namespace pbound {

namespace {

// Fill delta[pos..] so that the remaining block count and weight are met.
// Larger values are tried first, which yields descending lexicographic order.
void search(int pos, int blocks_left, int weight_left, std::vector<int>& delta,
            std::vector<std::vector<int>>& out) {
    const int size = pos + 1;
    if (pos == static_cast<int>(delta.size()) - 1) {
        if (blocks_left * size == weight_left) {
            delta[static_cast<std::size_t>(pos)] = blocks_left;
            out.push_back(delta);
        }
        return;
    }
    for (int d = std::min(blocks_left, weight_left / size); d >= 0; --d) {
        delta[static_cast<std::size_t>(pos)] = d;
        search(pos + 1, blocks_left - d, weight_left - d * size, delta, out);
    }
}

std::uint64_t factorial(int k) {
    std::uint64_t f = 1;
    for (int i = 2; i <= k; ++i) {
        f *= static_cast<std::uint64_t>(i);
    }
    return f;
}

}  // namespace

std::vector<PartitionTuple> enumerate_partitions(int k, int a) {
    if (k < 1 || a < 1 || a > k) {
        throw ArgumentError("enumerate_partitions: need 1 <= a <= k");
    }

    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::vector<PartitionTuple>> cache;

    std::lock_guard lock(mutex);
    auto it = cache.find({k, a});
    if (it != cache.end()) {
        return it->second;
    }

    std::vector<int> delta(static_cast<std::size_t>(k - a + 1), 0);
    std::vector<std::vector<int>> raw;
    search(0, a, k, delta, raw);

    std::vector<PartitionTuple> tuples;
    tuples.reserve(raw.size());
    for (auto& d : raw) {
        tuples.push_back(PartitionTuple{k, a, std::move(d)});
    }
    cache.emplace(std::make_pair(k, a), tuples);
    return tuples;
}

std::uint64_t bell_coefficient(const PartitionTuple& t) {
    if (t.k > kMaxExactBellOrder) {
        throw OverflowError("bell_coefficient: order above 20 exceeds exact 64-bit range");
    }
    if (t.k < 1 || t.a < 1 || t.a > t.k || t.delta.size() != static_cast<std::size_t>(t.k - t.a + 1)) {
        throw ArgumentError("bell_coefficient: malformed partition tuple");
    }
    int blocks = 0;
    int weight = 0;
    for (std::size_t l = 0; l < t.delta.size(); ++l) {
        if (t.delta[l] < 0) {
            throw ArgumentError("bell_coefficient: negative multiplicity");
        }
        blocks += t.delta[l];
        weight += t.delta[l] * static_cast<int>(l + 1);
    }
    if (blocks != t.a || weight != t.k) {
        throw ArgumentError("bell_coefficient: tuple violates the block/weight constraints");
    }

    // Divide k! by each factor in turn; every partial quotient stays integral
    // because the full denominator divides k!.
    std::uint64_t c = factorial(t.k);
    for (std::size_t l = 0; l < t.delta.size(); ++l) {
        const int d = t.delta[l];
        c /= factorial(d);
        const std::uint64_t lf = factorial(static_cast<int>(l + 1));
        for (int i = 0; i < d; ++i) {
            c /= lf;
        }
    }
    return c;
}

double faa_di_bruno(int k, std::span<const double> outer, std::span<const double> inner) {
    if (k < 1) {
        throw ArgumentError("faa_di_bruno: order must be positive");
    }
    if (outer.size() != static_cast<std::size_t>(k) || inner.size() != static_cast<std::size_t>(k)) {
        throw ArgumentError("faa_di_bruno: derivative vectors must have length k");
    }
    double sum = 0.0;
    for (int a = 1; a <= k; ++a) {
        const double rho_a = outer[static_cast<std::size_t>(a - 1)];
        if (rho_a == 0.0) {
            continue;
        }
        sum += rho_a * bell_polynomial(k, a, inner.first(static_cast<std::size_t>(k - a + 1)));
    }
    return sum;
}

}  // namespace pbound
