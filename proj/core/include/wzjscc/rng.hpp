#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wzjscc {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Derives an independent seed from (seed, label, index). Streams with
/// different labels never share state, so e.g. evaluation noise cannot
/// collide with training noise for the same user seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
    return splitmix64(splitmix64(seed ^ fnv1a(label)) + splitmix64(index + 0x632be59bd9b4e019ull));
}

inline Rng make_stream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
    return Rng(derive_seed(seed, label, index));
}

} // namespace wzjscc
