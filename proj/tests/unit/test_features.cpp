#include <random>

#include "doctest.h"
#include "harness.hpp"
#include "keccak_oracle.hpp"
#include "nftguard/features.hpp"
#include "nftguard/keccak.hpp"

using namespace nftguard;
using namespace nftguard::features;
using symexec::ExprPool;
using symexec::Op;
using symexec::Origin;
using Kind = StorageAddress::Kind;

namespace {

StoreEvent store_at(StorageAddress address, Expr value, Expr previous, std::size_t index = 0) {
    StoreEvent s;
    s.at.pc = 100 + index;
    s.address = std::move(address);
    s.value = value;
    s.previous = previous;
    s.store_index = index;
    return s;
}

ingest::KeywordIndex owner_index(const Word& owner_slot) {
    ingest::KeywordIndex index;
    index.keyword_config = testenv::default_config().keywords;
    for (const auto& w : index.keyword_config.owner) index.sets[w] = {owner_slot};
    return index;
}

Role role_on_paths(const testenv::Exploration& ex, const std::string& name, const ingest::KeywordIndex& index) {
    Role best = Role::Other;
    for (const auto& p : ex.capture.paths) {
        if (p.end != symexec::PathEnd::Stop && p.end != symexec::PathEnd::Return) continue;
        symexec::FunctionContext context{name, p.state.entry.selector, 0, 0};
        auto role = validate_context(context, collect(p.state), index);
        if (role != Role::Other) best = role;
    }
    return best;
}

}  // namespace

TEST_SUITE("features") {
    TEST_CASE("mapping store examples") {
        ExprPool pool;
        auto id = pool.symbol("calldata@0x4", Origin::Calldata);
        auto to = pool.symbol("caller", Origin::Caller, 160);
        StorageAddress owners{Kind::MappingSlot, 1, id, pool.keccak({id, pool.one()}, 64)};
        auto f = match_mapping_store(store_at(owners, to, pool.storage_read(owners.word)));
        REQUIRE(f);
        CHECK(f->base_slot == Word(1));
        CHECK(f->key == id);
        CHECK(f->stored_value == to);
        CHECK(symexec::infer_slot(f->address) == f->base_slot);

        CHECK_FALSE(match_mapping_store(store_at(StorageAddress::concrete(pool.zero(), 0), to, pool.zero())));
        StorageAddress opaque{Kind::Opaque, 0, id, id};
        CHECK_FALSE(match_mapping_store(store_at(opaque, to, pool.zero())));
    }

    TEST_CASE("delete examples") {
        ExprPool pool;
        auto id = pool.symbol("calldata@0x4", Origin::Calldata);
        StorageAddress owners{Kind::MappingSlot, 2, id, pool.keccak({id, pool.constant(2)}, 64)};
        auto previous = pool.storage_read(owners.word);
        auto d = match_delete(store_at(owners, pool.zero(), previous));
        REQUIRE(d);
        CHECK(d->erased_previous == previous);
        CHECK(d->cleared_mask == ~Word(0));

        CHECK_FALSE(match_delete(store_at(owners, pool.symbol("v", Origin::Calldata), previous)));

        StorageAddress bar{Kind::MappingSlot, 0, pool.one(), pool.keccak({pool.one(), pool.zero()}, 64)};
        CHECK(match_delete(store_at(bar, pool.zero(), pool.storage_read(bar.word))));

        auto plain = StorageAddress::concrete(pool.constant(4), 4);
        auto held = pool.storage_read(pool.constant(4));
        CHECK_FALSE(match_delete(store_at(plain, pool.zero(), held)));
        symexec::LoadEvent load;
        load.address = plain;
        load.value = held;
        CHECK(match_delete(store_at(plain, pool.zero(), held), {load}));

        // an address packed next to other fields has only its bits reset
        Word low160 = (Word(1) << 160) - 1;
        auto packed = pool.make(Op::And, held, pool.constant(~low160));
        auto partial = match_delete(store_at(plain, packed, held), {load});
        REQUIRE(partial);
        CHECK(partial->cleared_mask == low160);
    }

    TEST_CASE("deletes store the zero word under the cleared bits") {
        ExprPool pool;
        std::mt19937_64 rng(13);
        auto previous = pool.symbol("prev", Origin::None);
        StorageAddress elem{Kind::ArrayElem, 9, pool.symbol("i", Origin::Calldata), pool.symbol("w", Origin::None)};
        int matched = 0;
        for (int round = 0; round < 400; ++round) {
            Word mask = 0;
            for (int limb = 0; limb < 4; ++limb) mask = (mask << 64) | Word(rng());
            Expr value;
            switch (rng() % 4) {
                case 0: value = pool.zero(); break;
                case 1: value = pool.constant(mask); break;
                case 2: value = pool.make(Op::And, previous, pool.constant(mask)); break;
                default: value = pool.make(Op::Or, previous, pool.constant(mask)); break;
            }
            auto d = match_delete(store_at(elem, value, previous));
            if (!d) continue;
            ++matched;
            for (int trial = 0; trial < 4; ++trial) {
                Word bound = 0;
                for (int limb = 0; limb < 4; ++limb) bound = (bound << 64) | Word(rng());
                auto v = symexec::evaluate(value, [&](Expr leaf) -> std::optional<Word> {
                    if (leaf == previous) return bound;
                    return std::nullopt;
                });
                REQUIRE(v);
                CHECK((*v & d->cleared_mask) == 0);
            }
        }
        CHECK(matched > 0);
    }

    TEST_CASE("external invocation examples") {
        symexec::CallEvent hook;
        hook.at.pc = 77;
        hook.resolved_selector = selector_of("onERC721Received(address,address,uint256,bytes)");
        hook.shifted_selector = true;
        auto f = match_external_invocation(hook);
        REQUIRE(f);
        CHECK(f->selector == 0x150b7a02u);
        CHECK(f->shifted_selector_observed);
        CHECK(f->pc == 77);

        symexec::CallEvent token;
        token.resolved_selector = 0xa9059cbb;
        auto t = match_external_invocation(token);
        REQUIRE(t);
        CHECK(t->selector == selector_of("transfer(address,uint256)"));

        symexec::CallEvent plain;
        CHECK_FALSE(match_external_invocation(plain));
    }

    TEST_CASE("context validation examples") {
        ExprPool pool;
        auto index = owner_index(2);
        auto id = pool.symbol("calldata@0x4", Origin::Calldata);
        StorageAddress owners{Kind::MappingSlot, 2, id, pool.keccak({id, pool.constant(2)}, 64)};
        auto caller = pool.symbol("caller", Origin::Caller, 160);

        PathFeatures minting;
        minting.mapping_stores.push_back(*match_mapping_store(store_at(owners, caller, pool.storage_read(owners.word))));
        CHECK(validate_context({"mintNFT", 0, 0, 0}, minting, index) == Role::Mint);
        CHECK(validate_context({"reserveApes", 0, 0, 0}, minting, index) == Role::Mint);
        CHECK(validate_context({"setName", 0, 0, 0}, minting, index) == Role::Other);
        CHECK(validate_context({"mint", 0, 0, 0}, PathFeatures{}, index) == Role::Other);

        StorageAddress other{Kind::MappingSlot, 3, id, pool.keccak({id, pool.constant(3)}, 64)};
        PathFeatures elsewhere;
        elsewhere.mapping_stores.push_back(*match_mapping_store(store_at(other, caller, pool.zero())));
        CHECK(validate_context({"mint", 0, 0, 0}, elsewhere, index) == Role::Other);

        PathFeatures burning;
        auto erase = store_at(owners, pool.zero(), pool.storage_read(owners.word));
        burning.mapping_stores.push_back(*match_mapping_store(erase));
        burning.deletes.push_back(*match_delete(erase));
        CHECK(validate_context({"burn", 0, 0, 0}, burning, index) == Role::Burn);
        CHECK(validate_context({"mint", 0, 0, 0}, burning, index) == Role::Other);
        CHECK(validate_context({"setName", 0, 0, 0}, PathFeatures{}, index) == Role::Other);
        CHECK(validate_context({"approve", kApprove, 0, 0}, PathFeatures{}, index) == Role::Approve);
        CHECK(validate_context({"transferFrom", kTransferFrom, 0, 0}, PathFeatures{}, index) == Role::Transfer);
    }

    TEST_CASE("compiled functions validate by behaviour") {
        if (!testenv::have_toolchain()) return;
        const auto& burnable = testenv::corpus_unit("pb_burn.sol", "BurnableNFT");
        auto mint = testenv::explore(burnable, "mint()");
        CHECK(role_on_paths(*mint, "mint", mint->keywords) == Role::Mint);
        auto burn = testenv::explore(burnable, "burn(uint256)");
        CHECK(role_on_paths(*burn, "burn", burn->keywords) == Role::Burn);
        CHECK(role_on_paths(*burn, "mint", burn->keywords) == Role::Other);

        const auto& hype = testenv::corpus_unit("er_mintnft.sol", "HypeNFT");
        auto sig = std::string("mintNFT(uint256,bytes)");
        auto mint_nft = testenv::explore(hype, sig);
        CHECK(role_on_paths(*mint_nft, "mintNFT", mint_nft->keywords) == Role::Mint);
        bool hook = false;
        for (const auto& p : mint_nft->capture.paths)
            for (const auto& f : collect(p.state).invocations) hook = hook || f.selector == kOnErc721Received;
        CHECK(hook);
    }

    TEST_CASE("mapping features reproduce the hashed address") {
        if (!testenv::have_toolchain()) return;
        auto unit = testenv::compile_one(
            "// SPDX-License-Identifier: MIT\npragma solidity ^0.8.0;\n"
            "contract Token { string name_; uint8 flags; mapping(uint256 => address) owners; "
            "mapping(address => uint256) balances; mapping(uint256 => mapping(address => bool)) nested; "
            "function mint(uint256 id) external { require(owners[id] == address(0)); owners[id] = msg.sender; "
            "balances[msg.sender] += 1; } }\n",
            "Token");
        auto sel = unit.method_identifiers.at("mint(uint256)");
        std::mt19937_64 rng(5);
        for (int round = 0; round < 8; ++round) {
            Word id = Word(rng()) << (rng() % 192);
            auto calldata = testenv::selector_bytes(sel);
            auto arg = testenv::pad32(id);
            calldata.insert(calldata.end(), arg.begin(), arg.end());
            auto run = testenv::run_concrete(unit, sel, calldata);
            std::size_t checked = 0;
            for (const auto& s : run.stores) {
                auto f = match_mapping_store(s);
                REQUIRE(f);
                REQUIRE(f->key->is_const());
                REQUIRE(f->address.word->is_const());
                Bytes image = testenv::pad32(f->key->value);
                auto base = testenv::pad32(f->base_slot);
                image.insert(image.end(), base.begin(), base.end());
                CHECK(bytes_to_hex(testenv::pad32(f->address.word->value)) == oracle::keccak256_hex(image));
                ++checked;
            }
            CHECK(checked == 2);
        }
    }
}
