#include <random>

#include "doctest.h"
#include "harness.hpp"
#include "nftguard/disasm.hpp"

using namespace nftguard;
using namespace nftguard::disasm;

namespace {

Bytes reserialize(const std::vector<Instruction>& ins) {
    Bytes out;
    for (const auto& i : ins) {
        out.push_back(i.opcode);
        if (i.push_payload) out.insert(out.end(), i.push_payload->begin(), i.push_payload->end());
    }
    return out;
}

void check_partition(const std::vector<Instruction>& ins) {
    auto blocks = partition_blocks(ins);
    std::size_t k = 0;
    for (const auto& b : blocks) {
        REQUIRE(!b.instructions.empty());
        CHECK(b.start_pc == b.instructions.front().pc);
        CHECK(b.end_pc == b.instructions.back().pc);
        for (std::size_t j = 0; j < b.instructions.size(); ++j) {
            REQUIRE(k < ins.size());
            CHECK(b.instructions[j].pc == ins[k].pc);
            ++k;
            auto o = b.instructions[j].opcode;
            if (j > 0) CHECK(o != op::JUMPDEST);
            bool transfer = o == op::JUMP || o == op::JUMPI || o == op::STOP || o == op::RETURN ||
                            o == op::REVERT || o == op::INVALID || o == op::SELFDESTRUCT ||
                            !opcode_info(o).defined;
            if (j + 1 < b.instructions.size()) CHECK_FALSE(transfer);
        }
    }
    CHECK(k == ins.size());
}

}  // namespace

TEST_SUITE("disasm") {
    TEST_CASE("decodes pushes and arithmetic") {
        auto ins = disassemble(bytes_from_hex("6001600201"));
        REQUIRE(ins.size() == 3);
        CHECK(ins[0].mnemonic == "PUSH1");
        CHECK(ins[0].push_value() == 1);
        CHECK(ins[1].pc == 2);
        CHECK(ins[1].push_value() == 2);
        CHECK(ins[2].mnemonic == "ADD");
        CHECK(ins[2].source_index == 2);
    }

    TEST_CASE("jumpdest at pc 0") {
        auto ins = disassemble(bytes_from_hex("5b"));
        REQUIRE(ins.size() == 1);
        CHECK(ins[0].mnemonic == "JUMPDEST");
        CHECK(jumpdest_set(ins) == std::set<std::size_t>{0});
    }

    TEST_CASE("truncated push is zero padded") {
        auto ins = disassemble(bytes_from_hex("61aa"));
        REQUIRE(ins.size() == 1);
        CHECK(ins[0].mnemonic == "PUSH2");
        CHECK(ins[0].push_value() == 0xaa00);
        REQUIRE(ins[0].push_payload);
        CHECK(ins[0].push_payload->size() == 2);
    }

    TEST_CASE("payload bytes are not jump destinations") {
        CHECK(jumpdest_set(disassemble(bytes_from_hex("605b"))).empty());
        CHECK(jumpdest_set(disassemble(bytes_from_hex("005b"))) == std::set<std::size_t>{1});
    }

    TEST_CASE("unknown opcodes decode as invalid") {
        auto ins = disassemble(bytes_from_hex("0c21fe"));
        REQUIRE(ins.size() == 3);
        CHECK_FALSE(ins[0].defined());
        CHECK_FALSE(ins[1].defined());
        CHECK(ins[2].mnemonic == "INVALID");
        auto blocks = partition_blocks(ins);
        CHECK(blocks.size() == 3);
        CHECK(blocks[0].terminator == Terminator::Invalid);
    }

    TEST_CASE("push0 is decoded") {
        auto ins = disassemble(bytes_from_hex("5f"));
        REQUIRE(ins.size() == 1);
        CHECK(ins[0].mnemonic == "PUSH0");
        CHECK_FALSE(ins[0].push_payload);
    }

    TEST_CASE("block examples") {
        auto blocks = partition_blocks(disassemble(bytes_from_hex("6000565b00")));
        REQUIRE(blocks.size() == 2);
        CHECK(blocks[0].instructions.size() == 2);
        CHECK(blocks[0].terminator == Terminator::Jump);
        CHECK(blocks[1].start_pc == 3);
        CHECK(blocks[1].terminator == Terminator::Stop);

        auto straight = partition_blocks(disassemble(bytes_from_hex("6001600201600302")));
        REQUIRE(straight.size() == 1);
        CHECK(straight[0].terminator == Terminator::Stop);

        auto cond = partition_blocks(disassemble(bytes_from_hex("6001600757600100")));
        REQUIRE(cond.size() == 2);
        CHECK(cond[0].terminator == Terminator::ConditionalJump);
        CHECK(cond[1].start_pc == 5);
    }

    TEST_CASE("random byte strings reserialize and partition") {
        std::mt19937_64 rng(11);
        for (int round = 0; round < 200; ++round) {
            Bytes code(rng() % 200);
            for (auto& b : code) b = static_cast<std::uint8_t>(rng());
            auto ins = disassemble(code);
            auto again = reserialize(ins);
            // a truncated final push is padded, so compare the covered prefix
            REQUIRE(again.size() >= code.size());
            CHECK(Bytes(again.begin(), again.begin() + static_cast<long>(code.size())) == code);
            for (const auto& i : ins) {
                CHECK(i.push_payload.has_value() == i.is_push());
                if (i.push_payload) CHECK(i.push_payload->size() == std::size_t(i.opcode - 0x5f));
            }
            std::set<std::size_t> payload_pcs;
            for (const auto& i : ins)
                if (i.push_payload)
                    for (std::size_t k = 1; k <= i.push_payload->size(); ++k) payload_pcs.insert(i.pc + k);
            for (auto pc : jumpdest_set(ins)) CHECK_FALSE(payload_pcs.count(pc));
            check_partition(ins);
        }
    }

    TEST_CASE("compiled fixture decodes and partitions") {
        if (!testenv::have_toolchain()) return;
        auto unit = testenv::compile_fixture("corpus/er_mintnft.sol", "HypeNFT");
        auto ins = disassemble(unit.runtime_bytecode);
        CHECK(reserialize(ins) == unit.runtime_bytecode);
        check_partition(ins);
        CHECK(code_length_without_metadata(unit.runtime_bytecode) < unit.runtime_bytecode.size());
        CHECK(jumpdest_set(ins).size() > 50);
    }
}
