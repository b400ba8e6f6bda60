#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nftguard/word.hpp"

namespace nftguard::symexec {

enum class Op : std::uint8_t {
    Const, Symbol, StorageRead, Keccak,
    Add, Mul, Sub, Div, SDiv, Mod, SMod, Exp,
    Shl, Shr, Sar, And, Or, Xor, Not,
    Lt, Gt, Slt, Sgt, Eq, IsZero, Byte, SignExtend, AddMod, MulMod,
};

std::string_view op_name(Op op);

enum class Origin : std::uint8_t {
    None, Calldata, Caller, CallValue, TxOrigin, Timestamp, Number, Address, Balance, ExtCode, ReturnData, Environment,
};

std::string_view origin_name(Origin o);

namespace taint {
inline constexpr std::uint8_t UserInput = 1;
inline constexpr std::uint8_t CallerDerived = 2;
}  // namespace taint

struct Node;
using Expr = const Node*;

struct Node {
    std::uint32_t id = 0;
    Op op = Op::Const;
    Origin origin = Origin::None;
    std::uint8_t flags = 0;
    unsigned width = 256;  // upper bound on significant bits
    Word value = 0;        // Const payload; Keccak image length in bytes
    std::string name;      // Symbol name
    std::vector<Expr> args;

    bool is_const() const { return op == Op::Const; }
    bool user_input() const { return flags & taint::UserInput; }
    bool caller_derived() const { return flags & taint::CallerDerived; }
};

// hash-consed expression store; one per analysed contract, not thread-safe
class ExprPool {
public:
    ExprPool();
    ExprPool(const ExprPool&) = delete;
    ExprPool& operator=(const ExprPool&) = delete;

    Expr constant(const Word& w);
    Expr symbol(const std::string& name, Origin origin, unsigned width = 256);
    Expr storage_read(Expr address_word);
    Expr keccak(const std::vector<Expr>& image_words, std::size_t byte_length);
    Expr make(Op op, std::vector<Expr> args);
    Expr make(Op op, Expr a) { return make(op, std::vector<Expr>{a}); }
    Expr make(Op op, Expr a, Expr b) { return make(op, std::vector<Expr>{a, b}); }
    Expr make(Op op, Expr a, Expr b, Expr c) { return make(op, std::vector<Expr>{a, b, c}); }

    // builds the raw node without simplification; used by the evaluator differential
    Expr raw(Op op, std::vector<Expr> args);

    Expr zero() { return zero_; }
    Expr one() { return one_; }
    std::size_t size() const { return nodes_.size(); }
    std::uint64_t generation() const { return generation_; }

    // keccak preimages of concrete images seen so far (digest -> image words)
    void note_preimage(const Word& digest, std::vector<Word> words);
    const std::vector<Word>* preimage(const Word& digest) const;
    std::optional<std::pair<Word, Word>> array_base_for(const Word& slot) const;

private:
    struct Key {
        Op op;
        Origin origin;
        unsigned width;
        Word value;
        std::string name;
        std::vector<std::uint32_t> args;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const;
    };

    std::deque<Node> nodes_;
    std::unordered_map<Key, Expr, KeyHash> interned_;
    std::map<Word, std::vector<Word>> preimages_;
    std::map<Word, Word> single_word_preimages_;  // keccak(p) -> p
    Expr zero_ = nullptr;
    Expr one_ = nullptr;
    std::uint64_t generation_;

    Expr intern(Key key, std::vector<Expr> args, std::uint8_t flags);
    Expr simplify(Op op, std::vector<Expr>& args);
};

unsigned bit_length(const Word& w);
Word fold(Op op, const std::vector<Word>& values);
bool is_boolean(Expr e);

// linear view of ADD/SUB chains: constant + sum of coefficient * term
struct LinearForm {
    Word constant = 0;
    std::map<std::uint32_t, std::pair<Expr, std::int64_t>> terms;  // keyed by node id for determinism
};
LinearForm linear_form(Expr e);
Expr from_linear(ExprPool& pool, const LinearForm& form);

// evaluates with every leaf bound by `leaf`; returns nullopt when a leaf is unbound
std::optional<Word> evaluate(Expr e, const std::function<std::optional<Word>(Expr)>& leaf);

std::string render(Expr e, std::size_t max_len = 400);
bool contains(Expr e, const std::function<bool(Expr)>& pred);
void visit_leaves(Expr e, const std::function<void(Expr)>& fn);

}  // namespace nftguard::symexec
