#include "nftguard/word.hpp"

#include <stdexcept>

namespace nftguard {

namespace {
using Wide = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<
    512, 512, boost::multiprecision::unsigned_magnitude, boost::multiprecision::unchecked, void>>;

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
}

std::string_view strip_prefix(std::string_view hex) {
    if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) hex.remove_prefix(2);
    return hex;
}
}  // namespace

Word word_from_bytes(const std::uint8_t* data, std::size_t n) {
    Word w = 0;
    for (std::size_t i = 0; i < n; ++i) w = (w << 8) | data[i];
    return w;
}

std::array<std::uint8_t, 32> word_to_bytes(const Word& w) {
    std::array<std::uint8_t, 32> out{};
    Word v = w;
    for (int i = 31; i >= 0; --i) {
        out[i] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
    return out;
}

Word word_from_hex(std::string_view hex) {
    hex = strip_prefix(hex);
    if (hex.empty() || hex.size() > 64) throw std::invalid_argument("bad word hex");
    Word w = 0;
    for (char c : hex) w = (w << 4) | hex_digit(c);
    return w;
}

std::string word_to_hex(const Word& w) {
    if (w == 0) return "0x0";
    static const char* digits = "0123456789abcdef";
    std::string s;
    Word v = w;
    while (v != 0) {
        s.push_back(digits[static_cast<unsigned>(v & 0xf)]);
        v >>= 4;
    }
    return "0x" + std::string(s.rbegin(), s.rend());
}

std::string bytes_to_hex(const Bytes& b) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (auto x : b) {
        s.push_back(digits[x >> 4]);
        s.push_back(digits[x & 0xf]);
    }
    return s;
}

Bytes bytes_from_hex(std::string_view hex) {
    hex = strip_prefix(hex);
    if (hex.size() % 2) throw std::invalid_argument("odd hex length");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(hex_digit(hex[2 * i]) * 16 + hex_digit(hex[2 * i + 1]));
    return out;
}

Word low_mask(unsigned bits) {
    if (bits >= 256) return ~Word(0);
    return (Word(1) << bits) - 1;
}

bool fits_u64(const Word& w) { return w <= Word(UINT64_MAX); }

std::uint64_t word_to_u64(const Word& w) { return static_cast<std::uint64_t>(w & Word(UINT64_MAX)); }

namespace alu {

bool negative(const Word& a) { return bit_test(a, 255); }
Word negate(const Word& a) { return ~a + 1; }

Word add(const Word& a, const Word& b) { return a + b; }
Word sub(const Word& a, const Word& b) { return a - b; }
Word mul(const Word& a, const Word& b) { return a * b; }
Word div(const Word& a, const Word& b) { return b == 0 ? Word(0) : a / b; }
Word mod(const Word& a, const Word& b) { return b == 0 ? Word(0) : a % b; }

Word sdiv(const Word& a, const Word& b) {
    if (b == 0) return 0;
    bool na = negative(a), nb = negative(b);
    Word ma = na ? negate(a) : a;
    Word mb = nb ? negate(b) : b;
    Word q = ma / mb;
    return na != nb ? negate(q) : q;
}

Word smod(const Word& a, const Word& b) {
    if (b == 0) return 0;
    bool na = negative(a);
    Word ma = na ? negate(a) : a;
    Word mb = negative(b) ? negate(b) : b;
    Word r = ma % mb;
    return na ? negate(r) : r;
}

Word addmod(const Word& a, const Word& b, const Word& n) {
    if (n == 0) return 0;
    Wide s = Wide(a) + Wide(b);
    return Word(s % Wide(n));
}

Word mulmod(const Word& a, const Word& b, const Word& n) {
    if (n == 0) return 0;
    Wide p = Wide(a) * Wide(b);
    return Word(p % Wide(n));
}

Word exp(const Word& base, const Word& exponent) {
    Word result = 1, b = base, e = exponent;
    while (e != 0) {
        if (bit_test(e, 0)) result *= b;
        b *= b;
        e >>= 1;
    }
    return result;
}

Word signextend(const Word& b, const Word& x) {
    if (b >= 31) return x;
    unsigned bit = static_cast<unsigned>(b) * 8 + 7;
    Word mask = low_mask(bit + 1);
    return bit_test(x, bit) ? (x | ~mask) : (x & mask);
}

Word lt(const Word& a, const Word& b) { return a < b ? 1 : 0; }
Word gt(const Word& a, const Word& b) { return a > b ? 1 : 0; }

Word slt(const Word& a, const Word& b) {
    bool na = negative(a), nb = negative(b);
    if (na != nb) return na ? 1 : 0;
    return a < b ? 1 : 0;
}

Word sgt(const Word& a, const Word& b) { return slt(b, a); }
Word eq(const Word& a, const Word& b) { return a == b ? 1 : 0; }
Word iszero(const Word& a) { return a == 0 ? 1 : 0; }

Word byte(const Word& i, const Word& x) {
    if (i >= 32) return 0;
    unsigned shift = (31 - static_cast<unsigned>(i)) * 8;
    return (x >> shift) & 0xff;
}

Word shl(const Word& shift, const Word& x) {
    if (shift >= 256) return 0;
    return x << static_cast<unsigned>(shift);
}

Word shr(const Word& shift, const Word& x) {
    if (shift >= 256) return 0;
    return x >> static_cast<unsigned>(shift);
}

Word sar(const Word& shift, const Word& x) {
    bool neg = negative(x);
    if (shift >= 256) return neg ? ~Word(0) : Word(0);
    unsigned s = static_cast<unsigned>(shift);
    Word r = x >> s;
    if (neg && s > 0) r |= ~(~Word(0) >> s);
    return r;
}

}  // namespace alu
}  // namespace nftguard
