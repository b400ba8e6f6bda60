#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "nftguard/word.hpp"

namespace nftguard {

using Digest = std::array<std::uint8_t, 32>;

Digest keccak256(const std::uint8_t* data, std::size_t n);
Digest keccak256(const Bytes& data);
Digest keccak256(std::string_view text);
Word keccak_word(const Bytes& data);

// first four bytes of the hash of a canonical signature
std::uint32_t selector_of(std::string_view signature);

}  // namespace nftguard
