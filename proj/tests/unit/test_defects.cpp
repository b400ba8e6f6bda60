#include <algorithm>
#include <random>

#include "doctest.h"
#include "harness.hpp"
#include "nftguard/defects.hpp"

using namespace nftguard;
using namespace nftguard::defects;

namespace {

std::set<DefectKind> corpus_kinds(const std::string& file, const std::string& contract) {
    return testenv::kinds_of(testenv::analyze_rules(testenv::corpus_unit(file, contract))->reports);
}

DefectReport report(DefectKind kind, const std::string& function, std::size_t witness, std::size_t path_id,
                    std::int64_t offset = 0) {
    DefectReport r;
    r.kind = kind;
    r.contract_name = "C";
    r.function_name = function;
    r.witness_length = witness;
    r.path_id = path_id;
    r.source_range.offset = offset;
    r.rule_version = rule_version(kind);
    return r;
}

std::string key(const DefectReport& r) {
    return std::string(kind_name(r.kind)) + "/" + r.function_name + "/" + std::to_string(r.path_id) + "/" +
           std::to_string(r.witness_length) + "/" + std::to_string(r.source_range.offset);
}

}  // namespace

TEST_SUITE("defects") {
    TEST_CASE("kind names and versions") {
        CHECK(parse_kind("RMP") == DefectKind::RiskyMutableProxy);
        CHECK(parse_kind("ERC721Reentrancy") == DefectKind::ERC721Reentrancy);
        CHECK(parse_kind("UM") == DefectKind::UnlimitedMinting);
        CHECK(parse_kind("MissingRequirements") == DefectKind::MissingRequirements);
        CHECK(parse_kind("PB") == DefectKind::PublicBurn);
        CHECK_FALSE(parse_kind("Reentrancy"));
        for (auto k : kAllKinds) CHECK(parse_kind(kind_name(k)) == k);
        CHECK(rule_version(DefectKind::PublicBurn) == "v1.1");
        CHECK(rule_version(DefectKind::ERC721Reentrancy) == "v1");
        std::size_t enabled = 0;
        for (const auto& r : default_catalog()) enabled += r.enabled;
        CHECK(enabled == 2);
    }

    TEST_CASE("risky mutable proxy") {
        if (!testenv::have_toolchain()) return;
        auto reports = testenv::analyze_rules(testenv::corpus_unit("rmp_proxy.sol", "ProxyNFT"))->reports;
        REQUIRE(reports.size() == 1);
        CHECK(reports[0].kind == DefectKind::RiskyMutableProxy);
        CHECK(reports[0].function_name == "setProxyRegistryAddress");
        CHECK(reports[0].source_range.line > 0);
        CHECK(corpus_kinds("rmp_proxy_fixed.sol", "ProxyNFTFixed").empty());

        auto unit = testenv::compile_one(
            "// SPDX-License-Identifier: MIT\npragma solidity ^0.8.0;\n"
            "contract Priced { address proxyRegistryAddress; uint256 price; "
            "constructor(address p) { proxyRegistryAddress = p; } "
            "function setPrice(uint256 p) external { price = p; } }\n",
            "Priced");
        CHECK(testenv::analyze_rules(unit)->reports.empty());
    }

    TEST_CASE("erc721 reentrancy") {
        if (!testenv::have_toolchain()) return;
        CHECK(corpus_kinds("er_mintnft.sol", "HypeNFT") == std::set{DefectKind::ERC721Reentrancy});
        CHECK(corpus_kinds("er_mintnft_fixed.sol", "HypeNFTFixed").empty());
        CHECK(corpus_kinds("er_noguard.sol", "FreeClaim").count(DefectKind::ERC721Reentrancy));
    }

    TEST_CASE("reentrancy rule ignores other selectors") {
        if (!testenv::have_toolchain()) return;
        const auto& unit = testenv::corpus_unit("er_mintnft.sol", "HypeNFT");
        auto ex = testenv::explore(unit, "mintNFT(uint256,bytes)");
        auto ctx = ex->rule_context(unit);
        std::mt19937 rng(3);
        std::size_t fired = 0;
        std::size_t hooks = 0;
        for (const auto& p : ex->capture.paths) {
            for (const auto& f : features::collect(p.state).invocations) {
                if (f.selector != features::kOnErc721Received) continue;
                ++hooks;
                if (check_er(f, p.state, ctx)) ++fired;
                auto other = f;
                for (std::uint32_t sel : {0xa9059cbbu, 0x150b7a03u, static_cast<std::uint32_t>(rng())}) {
                    if (sel == features::kOnErc721Received) continue;
                    other.selector = sel;
                    other.call_event.resolved_selector = sel;
                    CHECK_FALSE(check_er(other, p.state, ctx));
                }
            }
        }
        CHECK(hooks > 0);
        CHECK(fired > 0);
    }

    TEST_CASE("unlimited minting") {
        if (!testenv::have_toolchain()) return;
        CHECK(corpus_kinds("um_reserve.sol", "BoredApeYachtClub") == std::set{DefectKind::UnlimitedMinting});
        CHECK(corpus_kinds("um_reserve_fixed.sol", "BoredApeYachtClubFixed").empty());
        CHECK(corpus_kinds("um_constant_supply.sol", "ConstantCap") == std::set{DefectKind::UnlimitedMinting});
    }

    TEST_CASE("missing requirements") {
        if (!testenv::have_toolchain()) return;
        auto approve = testenv::analyze_rules(testenv::corpus_unit("mr_approve.sol", "LooseApprove"))->reports;
        REQUIRE(approve.size() == 1);
        CHECK(approve[0].function_name == "approve");
        CHECK(approve[0].evidence.feature.find("approve-caller-authorization") != std::string::npos);
        CHECK(corpus_kinds("mr_approve_fixed.sol", "StrictApprove").empty());
        auto zero = testenv::analyze_rules(testenv::corpus_unit("mr_mint_zero.sol", "SimpleNFT"))->reports;
        REQUIRE(zero.size() == 1);
        CHECK(zero[0].kind == DefectKind::MissingRequirements);
        CHECK(zero[0].evidence.feature.find("mint-nonzero-recipient") != std::string::npos);
    }

    TEST_CASE("public burn") {
        if (!testenv::have_toolchain()) return;
        CHECK(corpus_kinds("pb_burn.sol", "BurnableNFT") == std::set{DefectKind::PublicBurn});
        CHECK(corpus_kinds("pb_burn_fixed.sol", "BurnableNFTFixed").empty());
        CHECK(corpus_kinds("pb_caller_mapping.sol", "HolderBurn").empty());
    }

    TEST_CASE("evidence is drawn from the witnessing path in a validated role") {
        if (!testenv::have_toolchain()) return;
        for (const auto& [file, contract] : std::vector<std::pair<std::string, std::string>>{
                 {"er_noguard.sol", "FreeClaim"}, {"um_reserve.sol", "BoredApeYachtClub"}, {"pb_burn.sol", "BurnableNFT"},
                 {"mr_approve.sol", "LooseApprove"}, {"rmp_proxy.sol", "ProxyNFT"}}) {
            CAPTURE(file);
            const auto& unit = testenv::corpus_unit(file, contract);
            auto ex = testenv::analyze_rules(unit);
            REQUIRE_FALSE(ex->reports.empty());
            for (const auto& r : ex->reports) {
                CAPTURE(kind_name(r.kind));
                const auto* path = ex->path(r.path_id);
                REQUIRE(path);
                std::set<std::string> rendered;
                for (const auto& c : path->cons) rendered.insert(symexec::render(c.condition, 240));
                for (const auto& c : r.evidence.constraints) CHECK(rendered.count(c));
                CHECK(r.source_range.offset + r.source_range.length <=
                      static_cast<std::int64_t>(unit.source_text.size()));
                // the role may come from the entry or from an internal function the stores run in
                std::set<features::Role> roles;
                auto pf = features::collect(*path);
                roles.insert(features::validate_context(path->entry, pf, ex->keywords));
                for (const auto& s : path->stores)
                    if (s.at.context) roles.insert(features::validate_context(*s.at.context, pf, ex->keywords));
                if (r.kind == DefectKind::UnlimitedMinting) CHECK(roles.count(features::Role::Mint));
                if (r.kind == DefectKind::PublicBurn) CHECK(roles.count(features::Role::Burn));
            }
        }
    }

    TEST_CASE("aggregation examples") {
        auto um = aggregate({report(DefectKind::UnlimitedMinting, "reserveApes", 90, 4),
                             report(DefectKind::UnlimitedMinting, "reserveApes", 40, 9),
                             report(DefectKind::UnlimitedMinting, "reserveApes", 60, 2)});
        REQUIRE(um.size() == 1);
        CHECK(um[0].witness_length == 40);
        CHECK(um[0].path_id == 9);

        auto two = aggregate({report(DefectKind::UnlimitedMinting, "mint", 10, 1),
                              report(DefectKind::PublicBurn, "burn", 10, 2)});
        CHECK(two.size() == 2);
        CHECK(testenv::kinds_of(two).size() == 2);
        CHECK(aggregate({}).empty());
    }

    TEST_CASE("aggregation ignores report order") {
        std::mt19937_64 rng(17);
        const char* functions[] = {"mint", "burn", "approve"};
        for (int round = 0; round < 200; ++round) {
            std::vector<DefectReport> reports;
            for (int i = 0, n = static_cast<int>(rng() % 12); i < n; ++i)
                reports.push_back(report(kAllKinds[rng() % 5], functions[rng() % 3], rng() % 5, rng() % 6, rng() % 3));
            auto expected = aggregate(reports);
            std::shuffle(reports.begin(), reports.end(), rng);
            auto shuffled = aggregate(reports);
            REQUIRE(expected.size() == shuffled.size());
            for (std::size_t i = 0; i < expected.size(); ++i) CHECK(key(expected[i]) == key(shuffled[i]));
        }
    }
}
