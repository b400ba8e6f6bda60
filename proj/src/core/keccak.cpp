#include "nftguard/keccak.hpp"

#include <cstring>

namespace nftguard {

namespace {

constexpr std::uint64_t kRoundConstants[24] = {
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL, 0x8000000080008000ULL,
    0x000000000000808bULL, 0x0000000080000001ULL, 0x8000000080008081ULL, 0x8000000000008009ULL,
    0x000000000000008aULL, 0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
    0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL, 0x8000000000008003ULL,
    0x8000000000008002ULL, 0x8000000000000080ULL, 0x000000000000800aULL, 0x800000008000000aULL,
    0x8000000080008081ULL, 0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL};

constexpr int kRotation[24] = {1, 3, 6, 10, 15, 21, 28, 36, 45, 55, 2, 14,
                               27, 41, 56, 8, 25, 43, 62, 18, 39, 61, 20, 44};
constexpr int kLane[24] = {10, 7, 11, 17, 18, 3, 5, 16, 8, 21, 24, 4,
                           15, 23, 19, 13, 12, 2, 20, 14, 22, 9, 6, 1};

inline std::uint64_t rotl(std::uint64_t x, int n) { return (x << n) | (x >> (64 - n)); }

void permute(std::uint64_t st[25]) {
    std::uint64_t bc[5];
    for (int round = 0; round < 24; ++round) {
        for (int i = 0; i < 5; ++i) bc[i] = st[i] ^ st[i + 5] ^ st[i + 10] ^ st[i + 15] ^ st[i + 20];
        for (int i = 0; i < 5; ++i) {
            std::uint64_t t = bc[(i + 4) % 5] ^ rotl(bc[(i + 1) % 5], 1);
            for (int j = 0; j < 25; j += 5) st[j + i] ^= t;
        }
        std::uint64_t t = st[1];
        for (int i = 0; i < 24; ++i) {
            int j = kLane[i];
            std::uint64_t tmp = st[j];
            st[j] = rotl(t, kRotation[i]);
            t = tmp;
        }
        for (int j = 0; j < 25; j += 5) {
            for (int i = 0; i < 5; ++i) bc[i] = st[j + i];
            for (int i = 0; i < 5; ++i) st[j + i] ^= (~bc[(i + 1) % 5]) & bc[(i + 2) % 5];
        }
        st[0] ^= kRoundConstants[round];
    }
}

}  // namespace

Digest keccak256(const std::uint8_t* data, std::size_t n) {
    constexpr std::size_t rate = 136;
    std::uint64_t st[25] = {};
    auto absorb = [&](const std::uint8_t* block) {
        for (std::size_t i = 0; i < rate / 8; ++i) {
            std::uint64_t lane = 0;
            for (int b = 7; b >= 0; --b) lane = (lane << 8) | block[i * 8 + b];
            st[i] ^= lane;
        }
        permute(st);
    };
    while (n >= rate) {
        absorb(data);
        data += rate;
        n -= rate;
    }
    std::uint8_t last[rate] = {};
    if (n) std::memcpy(last, data, n);
    last[n] ^= 0x01;
    last[rate - 1] ^= 0x80;
    absorb(last);

    Digest out{};
    for (std::size_t i = 0; i < 4; ++i)
        for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<std::uint8_t>(st[i] >> (8 * b));
    return out;
}

Digest keccak256(const Bytes& data) { return keccak256(data.data(), data.size()); }

Digest keccak256(std::string_view text) {
    return keccak256(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

Word keccak_word(const Bytes& data) {
    auto d = keccak256(data);
    return word_from_bytes(d.data(), d.size());
}

std::uint32_t selector_of(std::string_view signature) {
    auto d = keccak256(signature);
    return (std::uint32_t(d[0]) << 24) | (std::uint32_t(d[1]) << 16) | (std::uint32_t(d[2]) << 8) | d[3];
}

}  // namespace nftguard
