#pragma once
// Deterministic hashing and seed derivation shared by the stubs and the
// evaluation harness. Everything here is stable across platforms.

#include <cstdint>
#include <string_view>

namespace affmem {

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-key seed so that parallel work over keys stays reproducible.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept {
    return splitmix64(seed ^ fnv1a(key));
}

}  // namespace affmem
