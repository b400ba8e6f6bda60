#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace nftguard {

using Word = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<
    256, 256, boost::multiprecision::unsigned_magnitude, boost::multiprecision::unchecked, void>>;
using Bytes = std::vector<std::uint8_t>;

Word word_from_bytes(const std::uint8_t* data, std::size_t n);
std::array<std::uint8_t, 32> word_to_bytes(const Word& w);
Word word_from_hex(std::string_view hex);
std::string word_to_hex(const Word& w);
std::string bytes_to_hex(const Bytes& b);
Bytes bytes_from_hex(std::string_view hex);
Word low_mask(unsigned bits);
std::uint64_t word_to_u64(const Word& w);
bool fits_u64(const Word& w);

// EVM arithmetic over 256-bit words
namespace alu {
Word add(const Word& a, const Word& b);
Word sub(const Word& a, const Word& b);
Word mul(const Word& a, const Word& b);
Word div(const Word& a, const Word& b);
Word sdiv(const Word& a, const Word& b);
Word mod(const Word& a, const Word& b);
Word smod(const Word& a, const Word& b);
Word addmod(const Word& a, const Word& b, const Word& n);
Word mulmod(const Word& a, const Word& b, const Word& n);
Word exp(const Word& base, const Word& exponent);
Word signextend(const Word& b, const Word& x);
Word lt(const Word& a, const Word& b);
Word gt(const Word& a, const Word& b);
Word slt(const Word& a, const Word& b);
Word sgt(const Word& a, const Word& b);
Word eq(const Word& a, const Word& b);
Word iszero(const Word& a);
Word byte(const Word& i, const Word& x);
Word shl(const Word& shift, const Word& x);
Word shr(const Word& shift, const Word& x);
Word sar(const Word& shift, const Word& x);
bool negative(const Word& a);
Word negate(const Word& a);
}  // namespace alu

}  // namespace nftguard
