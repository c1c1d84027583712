#pragma once

#include <cstdint>

namespace smyrf::ops {

// Global operation counters. Attention kernels credit whole blocks at once,
// so counting adds no per-element work; counts are exact arithmetic on
// shapes and back the complexity assertions independently of wall clock.
struct Counts {
    std::uint64_t attention_pair_mults = 0;  // scalar mults inside q.k inner products
    std::uint64_t value_mults = 0;           // scalar mults applying weights to values
    std::uint64_t hash_mults = 0;            // scalar mults in LSH projections
    std::uint64_t sort_comparisons = 0;      // comparator calls while sorting hashes
};

void reset();
Counts snapshot();

void add_attention_pairs(std::uint64_t mults);
void add_value(std::uint64_t mults);
void add_hash(std::uint64_t mults);
void add_sort_comparisons(std::uint64_t comparisons);

}  // namespace smyrf::ops
