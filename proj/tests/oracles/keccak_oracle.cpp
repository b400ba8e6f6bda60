#include "keccak_oracle.hpp"

#include <array>

namespace oracle {

namespace {

using Lanes = std::array<std::array<std::uint64_t, 5>, 5>;  // [x][y]

bool lfsr_bit(int t) {
    if (t % 255 == 0) return true;
    unsigned r = 1;
    for (int i = 1; i <= t % 255; ++i) {
        r <<= 1;
        if (r & 0x100) r ^= 0x171;
    }
    return r & 1;
}

struct Tables {
    std::array<std::uint64_t, 24> iota{};
    std::array<std::array<int, 5>, 5> rho{};

    Tables() {
        for (int round = 0; round < 24; ++round)
            for (int j = 0; j <= 6; ++j)
                if (lfsr_bit(j + 7 * round)) iota[round] |= std::uint64_t{1} << ((1 << j) - 1);
        int x = 1, y = 0;
        for (int t = 0; t < 24; ++t) {
            rho[x][y] = ((t + 1) * (t + 2) / 2) % 64;
            int nx = y, ny = (2 * x + 3 * y) % 5;
            x = nx;
            y = ny;
        }
    }
};

const Tables& tables() {
    static const Tables t;
    return t;
}

std::uint64_t rot(std::uint64_t v, int n) { return n == 0 ? v : (v << n) | (v >> (64 - n)); }

void keccak_f(Lanes& a) {
    const auto& t = tables();
    for (int round = 0; round < 24; ++round) {
        std::array<std::uint64_t, 5> c{}, d{};
        for (int x = 0; x < 5; ++x) c[x] = a[x][0] ^ a[x][1] ^ a[x][2] ^ a[x][3] ^ a[x][4];
        for (int x = 0; x < 5; ++x) d[x] = c[(x + 4) % 5] ^ rot(c[(x + 1) % 5], 1);
        for (int x = 0; x < 5; ++x)
            for (int y = 0; y < 5; ++y) a[x][y] ^= d[x];
        Lanes b{};
        for (int x = 0; x < 5; ++x)
            for (int y = 0; y < 5; ++y) b[y][(2 * x + 3 * y) % 5] = rot(a[x][y], t.rho[x][y]);
        for (int x = 0; x < 5; ++x)
            for (int y = 0; y < 5; ++y) a[x][y] = b[x][y] ^ (~b[(x + 1) % 5][y] & b[(x + 2) % 5][y]);
        a[0][0] ^= t.iota[round];
    }
}

}  // namespace

std::vector<std::uint8_t> keccak256(const std::vector<std::uint8_t>& message) {
    const std::size_t rate = 136;
    std::vector<std::uint8_t> padded = message;
    padded.push_back(0x01);
    while (padded.size() % rate) padded.push_back(0);
    padded.back() |= 0x80;

    Lanes a{};
    for (std::size_t block = 0; block < padded.size(); block += rate) {
        for (std::size_t i = 0; i < rate; ++i) {
            std::size_t lane = i / 8;
            a[lane % 5][lane / 5] ^= std::uint64_t{padded[block + i]} << (8 * (i % 8));
        }
        keccak_f(a);
    }
    std::vector<std::uint8_t> digest(32);
    for (std::size_t i = 0; i < 32; ++i) {
        std::size_t lane = i / 8;
        digest[i] = static_cast<std::uint8_t>(a[lane % 5][lane / 5] >> (8 * (i % 8)));
    }
    return digest;
}

std::string keccak256_hex(const std::vector<std::uint8_t>& message) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (auto b : keccak256(message)) {
        out += digits[b >> 4];
        out += digits[b & 15];
    }
    return out;
}

}  // namespace oracle
