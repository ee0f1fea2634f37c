#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace poolforge {

// 64-bit FNV-1a. Used for cache keys, deterministic mock content, and
// seed derivation. Not cryptographic.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

// splitmix64 finalizer; decorrelates sequential seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b));
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Stable content hash for text payloads: FNV-1a over the bytes plus the
// length, hex-encoded. Collision odds are negligible at corpus scale.
inline std::string text_hash(std::string_view text) {
    std::uint64_t h = fnv1a64(text);
    h = mix64(h, static_cast<std::uint64_t>(text.size()));
    return to_hex(h);
}

} // namespace poolforge
