#include "nftguard/symexec.hpp"

namespace nftguard::symexec {

namespace {

bool small_signed(const Word& w, std::int64_t& out) {
    const Word limit = Word(1) << 62;
    if (w < limit) {
        out = static_cast<std::int64_t>(word_to_u64(w));
        return true;
    }
    Word neg = alu::negate(w);
    if (neg < limit) {
        out = -static_cast<std::int64_t>(word_to_u64(neg));
        return true;
    }
    return false;
}

}  // namespace

Memory::Place Memory::place(ExprPool& pool, Expr address) const {
    Place p;
    LinearForm form = linear_form(address);
    if (!small_signed(form.constant, p.offset)) return p;
    if (form.terms.empty()) {
        p.ok = p.offset >= 0 && static_cast<std::uint64_t>(p.offset) < kLimit;
        return p;
    }
    LinearForm base_form = form;
    base_form.constant = 0;
    p.base = from_linear(pool, base_form);
    p.region = p.base->id;
    p.ok = true;
    return p;
}

Memory::Cell Memory::cell_at(ExprPool& pool, const Region* region, std::int64_t offset) const {
    if (!region) return {pool.zero(), 31};
    if (auto it = region->cells.find(offset); it != region->cells.end()) return it->second;
    for (auto it = region->opaque_from.rbegin(); it != region->opaque_from.rend(); ++it) {
        if (it->start > offset) continue;
        auto rel = static_cast<std::uint64_t>(offset - it->start);
        auto word = pool.symbol(it->tag + "@" + std::to_string(rel / 32), it->origin);
        return {word, static_cast<std::uint8_t>(rel % 32)};
    }
    return {pool.zero(), 31};
}

Expr Memory::assemble(ExprPool& pool, const Place& p, std::size_t n) const {
    auto rit = regions_.find(p.region);
    const Region* region = rit == regions_.end() ? nullptr : &rit->second;
    std::vector<Cell> cells(n);
    for (std::size_t i = 0; i < n; ++i) cells[i] = cell_at(pool, region, p.offset + static_cast<std::int64_t>(i));

    if (n == 32) {
        bool same = true;
        for (std::size_t i = 0; i < 32 && same; ++i) same = cells[i].word == cells[0].word && cells[i].byte == i;
        if (same) return cells[0].word;
    }
    // runs of consecutive bytes taken from one source word
    Expr result = pool.zero();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && cells[j].word == cells[i].word && cells[j].byte == cells[j - 1].byte + 1) ++j;
        std::size_t len = j - i;
        Expr w = cells[i].word;
        unsigned last_byte = cells[j - 1].byte;
        Expr piece = pool.make(Op::Shr, pool.constant(Word(8 * (31 - last_byte))), w);
        piece = pool.make(Op::And, pool.constant(low_mask(static_cast<unsigned>(8 * len))), piece);
        auto position = static_cast<unsigned>(n - j);  // bytes right of the run
        piece = pool.make(Op::Shl, pool.constant(Word(8 * position)), piece);
        result = pool.make(Op::Or, result, piece);
        i = j;
    }
    return result;
}

Expr Memory::load(ExprPool& pool, Expr address) const {
    auto p = place(pool, address);
    if (!p.ok) return pool.symbol("mload@" + std::to_string(address->id), Origin::Environment);
    return assemble(pool, p, 32);
}

void Memory::store(ExprPool& pool, Expr address, Expr value) {
    auto p = place(pool, address);
    if (!p.ok) return;
    auto& region = regions_[p.region];
    for (std::uint8_t i = 0; i < 32; ++i) region.cells[p.offset + i] = Cell{value, i};
}

void Memory::store8(ExprPool& pool, Expr address, Expr value) {
    auto p = place(pool, address);
    if (!p.ok) return;
    regions_[p.region].cells[p.offset] = Cell{value, 31};
}

void Memory::copy_in(ExprPool& pool, Expr dest, Expr length, const std::function<Expr(std::uint64_t)>& word_at,
                     const std::string& opaque_tag, Origin opaque_origin) {
    auto p = place(pool, dest);
    if (!p.ok) return;
    auto& region = regions_[p.region];
    if (length->is_const() && length->value < kLimit) {
        auto n = static_cast<std::int64_t>(length->value);
        Expr word = nullptr;
        for (std::int64_t k = 0; k < n; ++k) {
            if (k % 32 == 0) word = word_at(static_cast<std::uint64_t>(k));
            region.cells[p.offset + k] = Cell{word, static_cast<std::uint8_t>(k % 32)};
        }
        return;
    }
    region.cells.erase(region.cells.lower_bound(p.offset), region.cells.end());
    region.opaque_from.push_back({p.offset, opaque_tag, opaque_origin});
}

std::optional<Bytes> Memory::concrete_bytes(ExprPool& pool, Expr address, std::size_t n) const {
    auto p = place(pool, address);
    if (!p.ok) return std::nullopt;
    auto rit = regions_.find(p.region);
    const Region* region = rit == regions_.end() ? nullptr : &rit->second;
    Bytes out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto c = cell_at(pool, region, p.offset + static_cast<std::int64_t>(i));
        if (!c.word->is_const()) return std::nullopt;
        out[i] = static_cast<std::uint8_t>(alu::byte(Word(c.byte), c.word->value));
    }
    return out;
}

std::vector<Expr> Memory::words(ExprPool& pool, Expr address, std::size_t n_bytes) const {
    std::vector<Expr> out;
    auto p = place(pool, address);
    for (std::size_t k = 0; k < n_bytes; k += 32) {
        if (!p.ok) {
            out.push_back(pool.symbol("mload@" + std::to_string(address->id) + "+" + std::to_string(k), Origin::Environment));
            continue;
        }
        Place q = p;
        q.offset += static_cast<std::int64_t>(k);
        Expr w = assemble(pool, q, std::min<std::size_t>(32, n_bytes - k));
        if (n_bytes - k < 32) w = pool.make(Op::Shl, pool.constant(Word(8 * (32 - (n_bytes - k)))), w);
        out.push_back(w);
    }
    return out;
}

std::optional<std::uint32_t> Memory::selector_at(ExprPool& pool, Expr address, bool* shifted) const {
    auto p = place(pool, address);
    if (!p.ok) return std::nullopt;
    auto rit = regions_.find(p.region);
    const Region* region = rit == regions_.end() ? nullptr : &rit->second;
    std::uint32_t sel = 0;
    Cell first{};
    for (int i = 0; i < 4; ++i) {
        auto c = cell_at(pool, region, p.offset + i);
        if (!c.word->is_const()) return std::nullopt;
        if (i == 0) first = c;
        sel = (sel << 8) | static_cast<std::uint32_t>(alu::byte(Word(c.byte), c.word->value));
    }
    if (shifted)
        *shifted = first.byte == 0 && (first.word->value & low_mask(224)) == 0 && first.word->value != 0;
    return sel;
}

}  // namespace nftguard::symexec
