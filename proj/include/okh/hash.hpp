#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace okh {

inline constexpr std::uint64_t fnv1a64_offset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t fnv1a64_prime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = fnv1a64_offset;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= fnv1a64_prime;
    }
    return h;
}

// 16 lowercase hex characters, most significant nibble first.
inline std::string hex64(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

using Digest128 = std::array<std::uint8_t, 16>;

// FNV-1a with the 128-bit parameters; big-endian byte layout.
inline Digest128 fnv1a128(std::string_view bytes) noexcept {
    using u128 = unsigned __int128;
    const u128 offset = (static_cast<u128>(0x6c62272e07bb0142ULL) << 64) | 0x62b821756295c58dULL;
    const u128 prime = (static_cast<u128>(0x0000000001000000ULL) << 64) | 0x000000000000013BULL;
    u128 h = offset;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= prime;
    }
    Digest128 out{};
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(h & 0xFF);
        h >>= 8;
    }
    return out;
}

}  // namespace okh
