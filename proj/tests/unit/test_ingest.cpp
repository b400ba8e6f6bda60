#include <functional>
#include <random>

#include "doctest.h"
#include "harness.hpp"
#include "nftguard/disasm.hpp"
#include "nftguard/errors.hpp"
#include "nftguard/ingest.hpp"
#include "nftguard/keccak.hpp"

using namespace nftguard;
using namespace nftguard::ingest;

namespace {

const char* kCorpus[][2] = {
    {"benign_reference.sol", "ReferenceCollection"}, {"er_mintnft.sol", "HypeNFT"},
    {"er_mintnft_fixed.sol", "HypeNFTFixed"},         {"er_noguard.sol", "FreeClaim"},
    {"mr_approve.sol", "LooseApprove"},               {"mr_approve_fixed.sol", "StrictApprove"},
    {"mr_mint_zero.sol", "SimpleNFT"},                {"pb_burn.sol", "BurnableNFT"},
    {"pb_burn_fixed.sol", "BurnableNFTFixed"},         {"pb_caller_mapping.sol", "HolderBurn"},
    {"rmp_proxy.sol", "ProxyNFT"},                    {"rmp_proxy_fixed.sol", "ProxyNFTFixed"},
    {"um_constant_supply.sol", "ConstantCap"},        {"um_reserve.sol", "BoredApeYachtClub"},
    {"um_reserve_fixed.sol", "BoredApeYachtClubFixed"},
};

void walk(const Json& node, const std::function<void(const Json&)>& fn) {
    if (node.is_object()) {
        fn(node);
        for (const auto& [k, v] : node.items()) walk(v, fn);
    } else if (node.is_array()) {
        for (const auto& v : node) walk(v, fn);
    }
}

std::pair<std::size_t, std::size_t> src_of(const Json& node) {
    auto s = node.at("src").get<std::string>();
    auto a = s.find(':');
    auto b = s.find(':', a + 1);
    return {std::stoul(s.substr(0, a)), std::stoul(s.substr(a + 1, b - a - 1))};
}

// compresses entries the way the compiler documents: fields equal to the previous entry are left empty
std::string encode(const std::vector<SourceMapEntry>& entries) {
    std::string out;
    const SourceMapEntry* prev = nullptr;
    auto jump = [](JumpKind j) { return j == JumpKind::IntoFunction ? "i" : j == JumpKind::OutOfFunction ? "o" : "-"; };
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (i) out += ';';
        std::vector<std::string> fields = {std::to_string(e.offset), std::to_string(e.length),
                                           std::to_string(e.file_index), jump(e.jump),
                                           std::to_string(e.modifier_depth)};
        std::vector<bool> same(5, false);
        if (prev) {
            same = {prev->offset == e.offset, prev->length == e.length, prev->file_index == e.file_index,
                    prev->jump == e.jump, prev->modifier_depth == e.modifier_depth};
        }
        // a trailing empty item would be read as a separator, so the last entry always spells its offset
        if (i + 1 == entries.size()) same[0] = false;
        std::size_t last = 5;
        while (last > 0 && same[last - 1]) --last;
        for (std::size_t f = 0; f < last; ++f) {
            if (f) out += ':';
            if (!same[f]) out += fields[f];
        }
        prev = &e;
    }
    return out;
}

}  // namespace

TEST_SUITE("ingest") {
    TEST_CASE("source map examples") {
        auto a = decode_source_map("0:10:0;;5:3:0", 3);
        REQUIRE(a.size() == 3);
        CHECK(a[0].offset == 0);
        CHECK(a[0].length == 10);
        CHECK(a[0].file_index == 0);
        CHECK(a[1] == a[0]);
        CHECK(a[2].offset == 5);
        CHECK(a[2].length == 3);
        CHECK(a[2].file_index == 0);

        CHECK(decode_source_map("", 0).empty());

        auto b = decode_source_map("1:2:1;0:9:2;;", 3);
        REQUIRE(b.size() == 3);
        CHECK(b[0].offset == 1);
        CHECK(b[0].length == 2);
        CHECK(b[0].file_index == 1);
        CHECK(b[1].offset == 0);
        CHECK(b[1].length == 9);
        CHECK(b[1].file_index == 2);
        CHECK(b[2] == b[1]);
    }

    TEST_CASE("source map jump kinds and generated code") {
        auto m = decode_source_map("0:5:0:i;:::o;-1:0:-1:-", 3);
        REQUIRE(m.size() == 3);
        CHECK(m[0].jump == JumpKind::IntoFunction);
        CHECK(m[1].jump == JumpKind::OutOfFunction);
        CHECK(m[1].offset == 0);
        CHECK(m[2].generated());
        CHECK(m[2].jump == JumpKind::Regular);
    }

    TEST_CASE("malformed source maps are rejected") {
        CHECK_THROWS_AS(decode_source_map("a:1:0", 1), MalformedSourceMap);
        CHECK_THROWS_AS(decode_source_map("0:1:0;2:3:0", 3), MalformedSourceMap);
        CHECK_THROWS_AS(decode_source_map("0:1:0;2:3:0;4:1:0", 2), MalformedSourceMap);
        CHECK_THROWS_AS(decode_source_map("0:x", 1), MalformedSourceMap);
    }

    TEST_CASE("decoding inverts the documented compression") {
        std::mt19937_64 rng(5);
        for (int round = 0; round < 200; ++round) {
            std::vector<SourceMapEntry> entries;
            std::size_t n = 1 + rng() % 40;
            for (std::size_t i = 0; i < n; ++i) {
                SourceMapEntry e = entries.empty() ? SourceMapEntry{} : entries.back();
                if (entries.empty() || rng() % 2) e.offset = static_cast<std::int64_t>(rng() % 5000);
                if (entries.empty() || rng() % 2) e.length = static_cast<std::int64_t>(rng() % 300);
                if (entries.empty() || rng() % 4 == 0) e.file_index = static_cast<int>(rng() % 3) - 1;
                if (rng() % 3 == 0) e.jump = static_cast<JumpKind>(rng() % 3);
                if (rng() % 5 == 0) e.modifier_depth = static_cast<int>(rng() % 3);
                entries.push_back(e);
            }
            auto decoded = decode_source_map(encode(entries), n);
            CHECK(decoded == entries);
        }
    }

    TEST_CASE("compiles a minimal contract") {
        if (!testenv::have_toolchain()) return;
        auto units = testenv::compile_all("// SPDX-License-Identifier: MIT\npragma solidity ^0.8.0;\ncontract A { uint256 x; }\n");
        REQUIRE(units.size() == 1);
        const auto& u = units[0];
        CHECK(u.contract_name == "A");
        CHECK_FALSE(u.runtime_bytecode.empty());
        CHECK(u.compiler_version.rfind("0.8.16", 0) == 0);
        std::size_t state_vars = 0;
        walk(u.ast, [&](const Json& n) {
            if (n.value("nodeType", "") == "VariableDeclaration" && n.value("stateVariable", false)) ++state_vars;
        });
        CHECK(state_vars == 1);
        CHECK(u.source_map.size() == disasm::disassemble(u.runtime_bytecode).size());
    }

    TEST_CASE("proxy fixture exposes the registry variable and its setter") {
        if (!testenv::have_toolchain()) return;
        const auto& u = testenv::corpus_unit("rmp_proxy.sol", "ProxyNFT");
        bool declared = false;
        walk(u.ast, [&](const Json& n) {
            if (n.value("nodeType", "") == "VariableDeclaration" && n.value("name", "") == "proxyRegistryAddress")
                declared = true;
        });
        CHECK(declared);
        bool setter = false;
        for (const auto& r : u.function_ranges)
            if (r.name == "setProxyRegistryAddress") {
                setter = true;
                CHECK(r.selector == selector_of("setProxyRegistryAddress(address)"));
                CHECK(u.source_text.substr(r.offset, 8) == "function");
            }
        CHECK(setter);
    }

    TEST_CASE("compiler errors carry diagnostics") {
        if (!testenv::have_toolchain()) return;
        try {
            testenv::compile_all("pragma solidity ^0.8.0;\ncontract B { uint256 x = ; }\n");
            FAIL("expected CompilationFailed");
        } catch (const CompilationFailed& e) {
            CHECK_FALSE(e.diagnostics.empty());
        }
    }

    TEST_CASE("incompatible pragma is a version mismatch") {
        if (!testenv::have_toolchain()) return;
        CHECK_THROWS_AS(testenv::compile_all("pragma solidity ^0.7.0;\ncontract C { uint256 x; }\n"), VersionMismatch);
    }

    TEST_CASE("missing compiler") {
        CompileOptions options;
        options.solc_path = "/nonexistent/solc";
        CHECK_THROWS_AS(compile_source("contract D {}", "d.sol", options), CompilerNotFound);
    }

    TEST_CASE("slot map examples") {
        if (!testenv::have_toolchain()) return;
        auto units = testenv::compile_all(
            "// SPDX-License-Identifier: MIT\npragma solidity ^0.8.0;\n"
            "contract P { uint256 a; mapping(uint256 => address) b; }\n"
            "contract Q { uint128 x; uint128 y; }\n"
            "contract R { uint256 constant K = 3; function f() external pure returns (uint256) { return K; } }\n");
        REQUIRE(units.size() == 3);
        for (const auto& u : units) {
            auto map = derive_slot_map(u.ast, u.contract_name);
            CHECK(testenv::layout_mismatches(u).empty());
            if (u.contract_name == "P") {
                REQUIRE(map.entries.size() == 2);
                CHECK(map.find("a")->slot_id == 0);
                CHECK(map.find("a")->type_kind == TypeKind::Value);
                CHECK(map.find("b")->slot_id == 1);
                CHECK(map.find("b")->type_kind == TypeKind::Mapping);
            } else if (u.contract_name == "Q") {
                REQUIRE(map.entries.size() == 2);
                CHECK(map.find("x")->slot_id == 0);
                CHECK(map.find("x")->byte_offset == 0);
                CHECK(map.find("y")->slot_id == 0);
                CHECK(map.find("y")->byte_offset == 16);
                CHECK(map.at_slot(0).size() == 2);
            } else {
                CHECK(map.entries.empty());
            }
        }
    }

    TEST_CASE("layout needs the linearized bases") {
        if (!testenv::have_toolchain()) return;
        const auto& u = testenv::corpus_unit("mr_mint_zero.sol", "SimpleNFT");
        Json ast = u.ast;
        for (auto& node : ast["nodes"])
            if (node.value("nodeType", "") == "ContractDefinition") node.erase("linearizedBaseContracts");
        CHECK_THROWS_AS(derive_slot_map(ast, "SimpleNFT"), UnsupportedType);
    }

    TEST_CASE("function-typed storage follows the compiler layout") {
        if (!testenv::have_toolchain()) return;
        auto u = testenv::compile_one(
            "// SPDX-License-Identifier: MIT\npragma solidity ^0.8.0;\n"
            "contract F { function(uint256) external returns (uint256) hook; uint64 n; function() internal inner; }\n",
            "F");
        CHECK(testenv::layout_mismatches(u).empty());
    }

    TEST_CASE("unsupported storage types are reported") {
        if (!testenv::have_toolchain()) return;
        auto u = testenv::compile_one(
            "// SPDX-License-Identifier: MIT\npragma solidity ^0.8.0;\ncontract G { uint256 a; uint8 b; }\n", "G");
        Json ast = u.ast;
        bool changed = false;
        std::function<void(Json&)> mutate = [&](Json& n) {
            if (n.is_object()) {
                if (!changed && n.value("nodeType", "") == "VariableDeclaration" && n.value("name", "") == "b") {
                    n["typeName"]["nodeType"] = "FixedPointTypeName";
                    changed = true;
                }
                for (auto& [k, v] : n.items()) mutate(v);
            } else if (n.is_array()) {
                for (auto& v : n) mutate(v);
            }
        };
        mutate(ast);
        REQUIRE(changed);
        CHECK_THROWS_AS(derive_slot_map(ast, "G"), UnsupportedType);
    }

    TEST_CASE("keyword index examples") {
        SlotMap proxy;
        proxy.entries.push_back({"proxyRegistryAddress", "C", 2, 0, TypeKind::Value, "address", 0});
        CHECK(index_keywords(proxy, std::vector<std::string>{"proxy"}).slots("proxy") == std::set<Word>{2});

        SlotMap owners;
        owners.entries.push_back({"_owners", "C", 3, 0, TypeKind::Mapping, "mapping(uint256 => address)", 0});
        owners.entries.push_back({"_balances", "C", 4, 0, TypeKind::Mapping, "mapping(address => uint256)", 0});
        CHECK(index_keywords(owners, std::vector<std::string>{"owner"}).slots("owner") == std::set<Word>{3});
        CHECK(index_keywords(owners, std::vector<std::string>{"zzz"}).slots("zzz").empty());

        SlotMap supply;
        supply.entries.push_back({"MAX_SUPPLY", "C", 7, 0, TypeKind::Value, "uint256", 0});
        supply.entries.push_back({"maxSupply", "C", 8, 0, TypeKind::Value, "uint256", 0});
        auto idx = index_keywords(supply, KeywordConfig{});
        CHECK(idx.supply_slots() == std::set<Word>{7, 8});
        CHECK(idx.proxy_slots().empty());
    }

    TEST_CASE("function context lookup") {
        if (!testenv::have_toolchain()) return;
        const auto& u = testenv::corpus_unit("er_mintnft.sol", "HypeNFT");
        CHECK_FALSE(function_at(u, 0));
        const FunctionRange* mint = nullptr;
        for (const auto& r : u.function_ranges)
            if (r.name == "mintNFT") mint = &r;
        REQUIRE(mint);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < u.source_map.size(); ++i) {
            const auto& e = u.source_map[i];
            if (e.file_index != u.source_file_index || e.offset < 0) continue;
            auto off = static_cast<std::size_t>(e.offset);
            if (off > mint->offset && off + e.length < mint->offset + mint->length && e.length < 40) {
                auto ctx = function_at(u, i);
                REQUIRE(ctx);
                CHECK(ctx->name == "mintNFT");
                ++hits;
            }
        }
        CHECK(hits > 0);
        CHECK_FALSE(function_at(u, u.source_map.size()));
    }

    TEST_CASE("inlined modifier code is attributed to the invoking function") {
        if (!testenv::have_toolchain()) return;
        const auto& u = testenv::corpus_unit("rmp_proxy.sol", "ProxyNFT");
        std::optional<std::pair<std::size_t, std::size_t>> body;
        std::set<std::string> users;
        walk(u.ast, [&](const Json& n) {
            if (n.value("nodeType", "") == "ModifierDefinition" && n.value("name", "") == "onlyOwner")
                body = src_of(n);
            if (n.value("nodeType", "") == "FunctionDefinition")
                for (const auto& m : n.at("modifiers"))
                    if (m.at("modifierName").value("name", "") == "onlyOwner") users.insert(n.value("name", ""));
        });
        REQUIRE(body);
        REQUIRE(users.count("setProxyRegistryAddress"));
        std::set<std::string> attributed;
        for (std::size_t i = 0; i < u.source_map.size(); ++i) {
            const auto& e = u.source_map[i];
            if (e.file_index != u.source_file_index || e.offset < 0) continue;
            if (static_cast<std::size_t>(e.offset) >= body->first &&
                static_cast<std::size_t>(e.offset + e.length) <= body->first + body->second) {
                auto ctx = function_at(u, i);
                REQUIRE(ctx);
                CHECK(users.count(ctx->name));
                attributed.insert(ctx->name);
            }
        }
        CHECK(attributed.count("setProxyRegistryAddress"));
    }

    TEST_CASE("compiled corpus invariants") {
        if (!testenv::have_toolchain()) return;
        KeywordConfig keywords;
        for (const auto& [file, contract] : kCorpus) {
            CAPTURE(file);
            const auto& u = testenv::corpus_unit(file, contract);
            CHECK(u.source_map.size() == disasm::disassemble(u.runtime_bytecode).size());
            for (const auto& r : u.function_ranges)
                if (r.file_index == u.source_file_index) CHECK(r.offset + r.length <= u.source_text.size());
            for (const auto& e : u.source_map) CHECK((e.offset >= 0 || e.generated()));
            auto mismatches = testenv::layout_mismatches(u);
            for (const auto& m : mismatches) MESSAGE(m);
            CHECK(mismatches.empty());
            auto map = derive_slot_map(u.ast, u.contract_name);
            for (std::size_t i = 1; i < map.entries.size(); ++i) CHECK(map.entries[i - 1].slot_id <= map.entries[i].slot_id);
            auto idx = index_keywords(map, keywords);
            for (const auto& [k, slots] : idx.sets)
                for (const auto& s : slots) {
                    bool named = false;
                    for (const auto* info : map.at_slot(s)) named = named || name_matches(info->name, {k});
                    CHECK(named);
                }
        }
    }
}
