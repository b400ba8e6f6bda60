#include "nftguard/expr.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_map>
#include <unordered_set>

#include "nftguard/keccak.hpp"

namespace nftguard::symexec {

namespace {

std::atomic<std::uint64_t> g_generation{1};

bool commutative(Op op) {
    switch (op) {
        case Op::Add: case Op::Mul: case Op::And: case Op::Or: case Op::Xor: case Op::Eq: return true;
        default: return false;
    }
}

}  // namespace

std::string_view op_name(Op op) {
    switch (op) {
        case Op::Const: return "const";
        case Op::Symbol: return "sym";
        case Op::StorageRead: return "sload";
        case Op::Keccak: return "keccak";
        case Op::Add: return "add";
        case Op::Mul: return "mul";
        case Op::Sub: return "sub";
        case Op::Div: return "div";
        case Op::SDiv: return "sdiv";
        case Op::Mod: return "mod";
        case Op::SMod: return "smod";
        case Op::Exp: return "exp";
        case Op::Shl: return "shl";
        case Op::Shr: return "shr";
        case Op::Sar: return "sar";
        case Op::And: return "and";
        case Op::Or: return "or";
        case Op::Xor: return "xor";
        case Op::Not: return "not";
        case Op::Lt: return "lt";
        case Op::Gt: return "gt";
        case Op::Slt: return "slt";
        case Op::Sgt: return "sgt";
        case Op::Eq: return "eq";
        case Op::IsZero: return "iszero";
        case Op::Byte: return "byte";
        case Op::SignExtend: return "signextend";
        case Op::AddMod: return "addmod";
        case Op::MulMod: return "mulmod";
    }
    return "?";
}

std::string_view origin_name(Origin o) {
    switch (o) {
        case Origin::None: return "none";
        case Origin::Calldata: return "calldata";
        case Origin::Caller: return "caller";
        case Origin::CallValue: return "callvalue";
        case Origin::TxOrigin: return "origin";
        case Origin::Timestamp: return "timestamp";
        case Origin::Number: return "number";
        case Origin::Address: return "address";
        case Origin::Balance: return "balance";
        case Origin::ExtCode: return "extcode";
        case Origin::ReturnData: return "returndata";
        case Origin::Environment: return "environment";
    }
    return "?";
}

unsigned bit_length(const Word& w) { return w == 0 ? 0 : static_cast<unsigned>(msb(w)) + 1; }

bool is_boolean(Expr e) { return e->width <= 1; }

Word fold(Op op, const std::vector<Word>& v) {
    switch (op) {
        case Op::Add: return alu::add(v[0], v[1]);
        case Op::Mul: return alu::mul(v[0], v[1]);
        case Op::Sub: return alu::sub(v[0], v[1]);
        case Op::Div: return alu::div(v[0], v[1]);
        case Op::SDiv: return alu::sdiv(v[0], v[1]);
        case Op::Mod: return alu::mod(v[0], v[1]);
        case Op::SMod: return alu::smod(v[0], v[1]);
        case Op::Exp: return alu::exp(v[0], v[1]);
        case Op::Shl: return alu::shl(v[0], v[1]);
        case Op::Shr: return alu::shr(v[0], v[1]);
        case Op::Sar: return alu::sar(v[0], v[1]);
        case Op::And: return v[0] & v[1];
        case Op::Or: return v[0] | v[1];
        case Op::Xor: return v[0] ^ v[1];
        case Op::Not: return ~v[0];
        case Op::Lt: return alu::lt(v[0], v[1]);
        case Op::Gt: return alu::gt(v[0], v[1]);
        case Op::Slt: return alu::slt(v[0], v[1]);
        case Op::Sgt: return alu::sgt(v[0], v[1]);
        case Op::Eq: return alu::eq(v[0], v[1]);
        case Op::IsZero: return alu::iszero(v[0]);
        case Op::Byte: return alu::byte(v[0], v[1]);
        case Op::SignExtend: return alu::signextend(v[0], v[1]);
        case Op::AddMod: return alu::addmod(v[0], v[1], v[2]);
        case Op::MulMod: return alu::mulmod(v[0], v[1], v[2]);
        default: return 0;
    }
}

std::size_t ExprPool::KeyHash::operator()(const Key& k) const {
    std::size_t h = static_cast<std::size_t>(k.op) * 0x9e3779b97f4a7c15ULL;
    h ^= std::hash<std::string>{}(k.name) + (h << 6) + (h >> 2);
    h ^= static_cast<std::size_t>(word_to_u64(k.value)) + (h << 6) + (h >> 2);
    h ^= static_cast<std::size_t>(word_to_u64(k.value >> 192)) + (h << 6) + (h >> 2);
    h ^= k.width + static_cast<std::size_t>(k.origin) * 31;
    for (auto a : k.args) h ^= a + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

ExprPool::ExprPool() : generation_(g_generation++) {
    zero_ = constant(0);
    one_ = constant(1);
}

Expr ExprPool::intern(Key key, std::vector<Expr> args, std::uint8_t flags) {
    if (auto it = interned_.find(key); it != interned_.end()) return it->second;
    Node n;
    n.id = static_cast<std::uint32_t>(nodes_.size());
    n.op = key.op;
    n.origin = key.origin;
    n.width = key.width;
    n.value = key.value;
    n.name = key.name;
    n.args = std::move(args);
    n.flags = flags;
    nodes_.push_back(std::move(n));
    Expr e = &nodes_.back();
    interned_.emplace(std::move(key), e);
    return e;
}

Expr ExprPool::constant(const Word& w) {
    return intern(Key{Op::Const, Origin::None, bit_length(w), w, {}, {}}, {}, 0);
}

Expr ExprPool::symbol(const std::string& name, Origin origin, unsigned width) {
    std::uint8_t flags = 0;
    if (origin == Origin::Calldata) flags |= taint::UserInput;
    if (origin == Origin::Caller) flags |= taint::CallerDerived;
    return intern(Key{Op::Symbol, origin, width, 0, name, {}}, {}, flags);
}

Expr ExprPool::storage_read(Expr address_word) {
    // storage contents are leaves: taint of the address does not flow into the loaded value
    return intern(Key{Op::StorageRead, Origin::None, 256, 0, {}, {address_word->id}}, {address_word}, 0);
}

Expr ExprPool::keccak(const std::vector<Expr>& image_words, std::size_t byte_length) {
    std::vector<std::uint32_t> ids;
    std::uint8_t flags = 0;
    for (auto a : image_words) {
        ids.push_back(a->id);
        flags |= a->flags;
    }
    return intern(Key{Op::Keccak, Origin::None, 256, Word(byte_length), {}, ids}, image_words, flags);
}

Expr ExprPool::raw(Op op, std::vector<Expr> args) {
    std::vector<std::uint32_t> ids;
    std::uint8_t flags = 0;
    for (auto a : args) {
        ids.push_back(a->id);
        flags |= a->flags;
    }
    return intern(Key{op, Origin::None, 256, 0, {}, ids}, std::move(args), flags);
}

void ExprPool::note_preimage(const Word& digest, std::vector<Word> words) {
    if (words.size() == 1) single_word_preimages_.emplace(digest, words[0]);
    preimages_.emplace(digest, std::move(words));
}

const std::vector<Word>* ExprPool::preimage(const Word& digest) const {
    auto it = preimages_.find(digest);
    return it == preimages_.end() ? nullptr : &it->second;
}

std::optional<std::pair<Word, Word>> ExprPool::array_base_for(const Word& slot) const {
    const Word window = Word(1) << 32;
    for (const auto& [digest, base] : single_word_preimages_)
        if (slot >= digest && slot - digest < window) return std::make_pair(base, slot - digest);
    return std::nullopt;
}

LinearForm linear_form(Expr e) {
    LinearForm form;
    std::function<void(Expr, std::int64_t)> walk = [&](Expr x, std::int64_t coeff) {
        if (x->op == Op::Const) {
            form.constant = coeff >= 0 ? form.constant + x->value * Word(static_cast<std::uint64_t>(coeff))
                                       : form.constant - x->value * Word(static_cast<std::uint64_t>(-coeff));
            return;
        }
        if (x->op == Op::Add) {
            walk(x->args[0], coeff);
            walk(x->args[1], coeff);
            return;
        }
        if (x->op == Op::Sub) {
            walk(x->args[0], coeff);
            walk(x->args[1], -coeff);
            return;
        }
        auto& slot = form.terms[x->id];
        slot.first = x;
        slot.second += coeff;
        if (slot.second == 0) form.terms.erase(x->id);
    };
    walk(e, 1);
    return form;
}

Expr from_linear(ExprPool& pool, const LinearForm& form) {
    // canonical shape: positive terms in id order, negatives subtracted, constant in front
    Expr acc = nullptr;
    auto scaled = [&](Expr t, std::int64_t c) {
        return c == 1 ? t : pool.make(Op::Mul, pool.constant(Word(static_cast<std::uint64_t>(c))), t);
    };
    for (const auto& [id, tc] : form.terms) {
        auto [t, c] = tc;
        if (c <= 0) continue;
        Expr term = scaled(t, c);
        acc = acc ? pool.raw(Op::Add, {acc, term}) : term;
    }
    for (const auto& [id, tc] : form.terms) {
        auto [t, c] = tc;
        if (c >= 0) continue;
        Expr term = scaled(t, -c);
        acc = pool.raw(Op::Sub, {acc ? acc : pool.zero(), term});
    }
    if (!acc) return pool.constant(form.constant);
    if (form.constant != 0) acc = pool.raw(Op::Add, {pool.constant(form.constant), acc});
    return acc;
}

Expr ExprPool::make(Op op, std::vector<Expr> args) {
    if (op == Op::Const || op == Op::Symbol || op == Op::StorageRead || op == Op::Keccak) return raw(op, std::move(args));
    bool all_const = std::all_of(args.begin(), args.end(), [](Expr a) { return a->is_const(); });
    if (all_const) {
        std::vector<Word> values;
        for (auto a : args) values.push_back(a->value);
        return constant(fold(op, values));
    }
    if (Expr s = simplify(op, args)) return s;
    if (commutative(op) && args[1]->is_const()) std::swap(args[0], args[1]);
    if (commutative(op) && !args[0]->is_const() && args[0]->id > args[1]->id) std::swap(args[0], args[1]);

    std::vector<std::uint32_t> ids;
    std::uint8_t flags = 0;
    for (auto a : args) {
        ids.push_back(a->id);
        flags |= a->flags;
    }
    unsigned width = 256;
    auto w = [&](int i) { return args[i]->width; };
    switch (op) {
        case Op::And: width = std::min(w(0), w(1)); break;
        case Op::Or: case Op::Xor: width = std::max(w(0), w(1)); break;
        case Op::Lt: case Op::Gt: case Op::Slt: case Op::Sgt: case Op::Eq: case Op::IsZero: width = 1; break;
        case Op::Byte: width = 8; break;
        case Op::Shr:
            if (args[0]->is_const() && args[0]->value < 256) {
                auto s = static_cast<unsigned>(args[0]->value);
                width = w(1) > s ? w(1) - s : 0;
            }
            break;
        case Op::Shl:
            if (args[0]->is_const() && args[0]->value < 256)
                width = std::min(256u, w(1) + static_cast<unsigned>(args[0]->value));
            break;
        case Op::Add: width = std::min(256u, std::max(w(0), w(1)) + 1); break;
        case Op::Mul: width = std::min(256u, w(0) + w(1)); break;
        case Op::Div: width = w(0); break;
        case Op::Mod: width = std::min(w(0), w(1)); break;
        default: break;
    }
    return intern(Key{op, Origin::None, width, 0, {}, ids}, std::move(args), flags);
}

Expr ExprPool::simplify(Op op, std::vector<Expr>& a) {
    auto is = [](Expr e, unsigned v) { return e->is_const() && e->value == v; };
    auto all_ones = [](Expr e) { return e->is_const() && e->value == ~Word(0); };
    switch (op) {
        case Op::Add:
        case Op::Sub: {
            if (op == Op::Add && is(a[0], 0)) return a[1];
            if (is(a[1], 0)) return a[0];
            if (op == Op::Sub && a[0] == a[1]) return zero_;
            LinearForm left = linear_form(a[0]);
            LinearForm right = linear_form(a[1]);
            std::int64_t sign = op == Op::Add ? 1 : -1;
            left.constant = op == Op::Add ? left.constant + right.constant : left.constant - right.constant;
            for (const auto& [id, tc] : right.terms) {
                auto& slot = left.terms[id];
                slot.first = tc.first;
                slot.second += sign * tc.second;
                if (slot.second == 0) left.terms.erase(id);
            }
            return from_linear(*this, left);
        }
        case Op::Mul:
            if (is(a[0], 0) || is(a[1], 0)) return zero_;
            if (is(a[0], 1)) return a[1];
            if (is(a[1], 1)) return a[0];
            return nullptr;
        case Op::Div:
            if (is(a[1], 1)) return a[0];
            if (is(a[0], 0) || is(a[1], 0)) return zero_;
            if (a[1]->is_const() && (a[1]->value & (a[1]->value - 1)) == 0)
                return make(Op::Shr, constant(Word(bit_length(a[1]->value) - 1)), a[0]);
            return nullptr;
        case Op::Mod:
            if (is(a[1], 0) || is(a[1], 1) || is(a[0], 0)) return zero_;
            return nullptr;
        case Op::Exp:
            if (is(a[1], 0)) return one_;
            if (is(a[1], 1)) return a[0];
            return nullptr;
        case Op::And: {
            if (is(a[0], 0) || is(a[1], 0)) return zero_;
            if (all_ones(a[0])) return a[1];
            if (all_ones(a[1])) return a[0];
            if (a[0] == a[1]) return a[0];
            Expr c = a[0]->is_const() ? a[0] : (a[1]->is_const() ? a[1] : nullptr);
            Expr x = c == a[0] ? a[1] : a[0];
            if (!c) return nullptr;
            if (x->width <= 256 && (c->value & low_mask(x->width)) == low_mask(x->width)) return x;
            if ((c->value & low_mask(x->width)) == 0) return zero_;
            if (x->op == Op::And && x->args[0]->is_const())
                return make(Op::And, constant(c->value & x->args[0]->value), x->args[1]);
            if (x->op == Op::Or) {
                Expr l = make(Op::And, c, x->args[0]);
                Expr r = make(Op::And, c, x->args[1]);
                if (l->is_const() || r->is_const() || l == x->args[0] || r == x->args[1]) return make(Op::Or, l, r);
            }
            return nullptr;
        }
        case Op::Or: {
            if (is(a[0], 0)) return a[1];
            if (is(a[1], 0)) return a[0];
            if (a[0] == a[1]) return a[0];
            if (all_ones(a[0]) || all_ones(a[1])) return constant(~Word(0));
            Expr c = a[0]->is_const() ? a[0] : (a[1]->is_const() ? a[1] : nullptr);
            Expr x = c == a[0] ? a[1] : a[0];
            if (c && x->op == Op::Or && x->args[0]->is_const())
                return make(Op::Or, constant(c->value | x->args[0]->value), x->args[1]);
            return nullptr;
        }
        case Op::Xor:
            if (is(a[0], 0)) return a[1];
            if (is(a[1], 0)) return a[0];
            if (a[0] == a[1]) return zero_;
            return nullptr;
        case Op::Not:
            if (a[0]->op == Op::Not) return a[0]->args[0];
            return nullptr;
        case Op::Shl:
            if (is(a[0], 0)) return a[1];
            if (a[0]->is_const() && a[0]->value >= 256) return zero_;
            if (is(a[1], 0)) return zero_;
            return nullptr;
        case Op::Shr: {
            if (is(a[0], 0)) return a[1];
            if (is(a[1], 0)) return zero_;
            if (!a[0]->is_const()) return nullptr;
            if (a[0]->value >= 256) return zero_;
            auto s = static_cast<unsigned>(a[0]->value);
            Expr x = a[1];
            if (x->width <= s) return zero_;
            if (x->op == Op::Or) return make(Op::Or, make(Op::Shr, a[0], x->args[0]), make(Op::Shr, a[0], x->args[1]));
            if (x->op == Op::And && x->args[0]->is_const() && (x->args[0]->value >> s) == 0) return zero_;
            if (x->op == Op::Shl && x->args[0]->is_const() && x->args[0]->value == s)
                return make(Op::And, constant(low_mask(256 - s)), x->args[1]);
            return nullptr;
        }
        case Op::Sar:
            if (is(a[0], 0)) return a[1];
            return nullptr;
        case Op::Eq:
            if (a[0] == a[1]) return one_;
            if (a[1]->is_const() && a[1]->value == 0) return make(Op::IsZero, a[0]);
            if (a[0]->is_const() && a[0]->value == 0) return make(Op::IsZero, a[1]);
            if (a[0]->is_const() && bit_length(a[0]->value) > a[1]->width) return zero_;
            if (a[1]->is_const() && bit_length(a[1]->value) > a[0]->width) return zero_;
            return nullptr;
        case Op::IsZero:
            if (a[0]->op == Op::IsZero && is_boolean(a[0]->args[0])) return a[0]->args[0];
            return nullptr;
        case Op::Lt:
            if (a[0] == a[1]) return zero_;
            if (is(a[1], 0)) return zero_;
            if (all_ones(a[0])) return zero_;
            return nullptr;
        case Op::Gt:
            if (a[0] == a[1]) return zero_;
            if (is(a[0], 0)) return zero_;
            if (all_ones(a[1])) return zero_;
            return nullptr;
        case Op::Slt:
        case Op::Sgt:
            if (a[0] == a[1]) return zero_;
            return nullptr;
        case Op::SignExtend:
            if (a[0]->is_const() && a[0]->value >= 31) return a[1];
            return nullptr;
        case Op::Byte:
            if (a[0]->is_const() && a[0]->value >= 32) return zero_;
            return nullptr;
        default:
            return nullptr;
    }
}

std::optional<Word> evaluate(Expr root, const std::function<std::optional<Word>(Expr)>& leaf) {
    std::unordered_map<std::uint32_t, Word> memo;
    std::function<std::optional<Word>(Expr)> go = [&](Expr e) -> std::optional<Word> {
        if (e->op == Op::Const) return e->value;
        if (auto it = memo.find(e->id); it != memo.end()) return it->second;
        std::optional<Word> result;
        if (e->op == Op::Symbol || e->op == Op::StorageRead) {
            result = leaf(e);
        } else if (e->op == Op::Keccak) {
            Bytes image;
            for (auto a : e->args) {
                auto v = go(a);
                if (!v) return std::nullopt;
                auto b = word_to_bytes(*v);
                image.insert(image.end(), b.begin(), b.end());
            }
            image.resize(static_cast<std::size_t>(e->value));
            result = keccak_word(image);
        } else {
            std::vector<Word> vals;
            for (auto a : e->args) {
                auto v = go(a);
                if (!v) return std::nullopt;
                vals.push_back(*v);
            }
            result = fold(e->op, vals);
        }
        if (result) memo[e->id] = *result;
        return result;
    };
    return go(root);
}

std::string render(Expr e, std::size_t max_len) {
    std::string out;
    std::function<void(Expr)> go = [&](Expr x) {
        if (out.size() > max_len) return;
        switch (x->op) {
            case Op::Const: out += word_to_hex(x->value); return;
            case Op::Symbol: out += x->name; return;
            case Op::StorageRead:
                out += "sload(";
                go(x->args[0]);
                out += ")";
                return;
            default: break;
        }
        out += "(";
        out += op_name(x->op);
        for (auto a : x->args) {
            out += " ";
            go(a);
            if (out.size() > max_len) break;
        }
        out += ")";
    };
    go(e);
    if (out.size() > max_len) {
        out.resize(max_len);
        out += "...";
    }
    return out;
}

bool contains(Expr e, const std::function<bool(Expr)>& pred) {
    std::unordered_set<std::uint32_t> seen;
    std::vector<Expr> stack{e};
    while (!stack.empty()) {
        Expr x = stack.back();
        stack.pop_back();
        if (!seen.insert(x->id).second) continue;
        if (pred(x)) return true;
        for (auto a : x->args) stack.push_back(a);
    }
    return false;
}

void visit_leaves(Expr e, const std::function<void(Expr)>& fn) {
    std::unordered_set<std::uint32_t> seen;
    std::vector<Expr> stack{e};
    while (!stack.empty()) {
        Expr x = stack.back();
        stack.pop_back();
        if (!seen.insert(x->id).second) continue;
        if (x->op == Op::Symbol || x->op == Op::StorageRead || x->op == Op::Const) {
            fn(x);
            continue;
        }
        for (auto a : x->args) stack.push_back(a);
    }
}

}  // namespace nftguard::symexec
