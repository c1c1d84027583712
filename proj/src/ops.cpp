#include "smyrf/ops.hpp"

#include <atomic>

namespace smyrf::ops {

namespace {

std::atomic<std::uint64_t> g_attention_pair_mults{0};
std::atomic<std::uint64_t> g_value_mults{0};
std::atomic<std::uint64_t> g_hash_mults{0};
std::atomic<std::uint64_t> g_sort_comparisons{0};

}  // namespace

void reset() {
    g_attention_pair_mults.store(0, std::memory_order_relaxed);
    g_value_mults.store(0, std::memory_order_relaxed);
    g_hash_mults.store(0, std::memory_order_relaxed);
    g_sort_comparisons.store(0, std::memory_order_relaxed);
}

Counts snapshot() {
    return Counts{
        g_attention_pair_mults.load(std::memory_order_relaxed),
        g_value_mults.load(std::memory_order_relaxed),
        g_hash_mults.load(std::memory_order_relaxed),
        g_sort_comparisons.load(std::memory_order_relaxed),
    };
}

void add_attention_pairs(std::uint64_t mults) {
    g_attention_pair_mults.fetch_add(mults, std::memory_order_relaxed);
}

void add_value(std::uint64_t mults) {
    g_value_mults.fetch_add(mults, std::memory_order_relaxed);
}

void add_hash(std::uint64_t mults) {
    g_hash_mults.fetch_add(mults, std::memory_order_relaxed);
}

void add_sort_comparisons(std::uint64_t comparisons) {
    g_sort_comparisons.fetch_add(comparisons, std::memory_order_relaxed);
}

}  // namespace smyrf::ops
