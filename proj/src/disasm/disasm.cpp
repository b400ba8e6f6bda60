#include "nftguard/disasm.hpp"

#include <array>

namespace nftguard::disasm {

namespace {

std::array<OpcodeInfo, 256> build_table() {
    std::array<OpcodeInfo, 256> t{};
    auto def = [&](std::uint8_t code, std::string_view name, int pops, int pushes) {
        t[code] = OpcodeInfo{name, pops, pushes, true};
    };
    def(0x00, "STOP", 0, 0);
    def(0x01, "ADD", 2, 1);
    def(0x02, "MUL", 2, 1);
    def(0x03, "SUB", 2, 1);
    def(0x04, "DIV", 2, 1);
    def(0x05, "SDIV", 2, 1);
    def(0x06, "MOD", 2, 1);
    def(0x07, "SMOD", 2, 1);
    def(0x08, "ADDMOD", 3, 1);
    def(0x09, "MULMOD", 3, 1);
    def(0x0a, "EXP", 2, 1);
    def(0x0b, "SIGNEXTEND", 2, 1);
    def(0x10, "LT", 2, 1);
    def(0x11, "GT", 2, 1);
    def(0x12, "SLT", 2, 1);
    def(0x13, "SGT", 2, 1);
    def(0x14, "EQ", 2, 1);
    def(0x15, "ISZERO", 1, 1);
    def(0x16, "AND", 2, 1);
    def(0x17, "OR", 2, 1);
    def(0x18, "XOR", 2, 1);
    def(0x19, "NOT", 1, 1);
    def(0x1a, "BYTE", 2, 1);
    def(0x1b, "SHL", 2, 1);
    def(0x1c, "SHR", 2, 1);
    def(0x1d, "SAR", 2, 1);
    def(0x20, "KECCAK256", 2, 1);
    def(0x30, "ADDRESS", 0, 1);
    def(0x31, "BALANCE", 1, 1);
    def(0x32, "ORIGIN", 0, 1);
    def(0x33, "CALLER", 0, 1);
    def(0x34, "CALLVALUE", 0, 1);
    def(0x35, "CALLDATALOAD", 1, 1);
    def(0x36, "CALLDATASIZE", 0, 1);
    def(0x37, "CALLDATACOPY", 3, 0);
    def(0x38, "CODESIZE", 0, 1);
    def(0x39, "CODECOPY", 3, 0);
    def(0x3a, "GASPRICE", 0, 1);
    def(0x3b, "EXTCODESIZE", 1, 1);
    def(0x3c, "EXTCODECOPY", 4, 0);
    def(0x3d, "RETURNDATASIZE", 0, 1);
    def(0x3e, "RETURNDATACOPY", 3, 0);
    def(0x3f, "EXTCODEHASH", 1, 1);
    def(0x40, "BLOCKHASH", 1, 1);
    def(0x41, "COINBASE", 0, 1);
    def(0x42, "TIMESTAMP", 0, 1);
    def(0x43, "NUMBER", 0, 1);
    def(0x44, "PREVRANDAO", 0, 1);
    def(0x45, "GASLIMIT", 0, 1);
    def(0x46, "CHAINID", 0, 1);
    def(0x47, "SELFBALANCE", 0, 1);
    def(0x48, "BASEFEE", 0, 1);
    def(0x50, "POP", 1, 0);
    def(0x51, "MLOAD", 1, 1);
    def(0x52, "MSTORE", 2, 0);
    def(0x53, "MSTORE8", 2, 0);
    def(0x54, "SLOAD", 1, 1);
    def(0x55, "SSTORE", 2, 0);
    def(0x56, "JUMP", 1, 0);
    def(0x57, "JUMPI", 2, 0);
    def(0x58, "PC", 0, 1);
    def(0x59, "MSIZE", 0, 1);
    def(0x5a, "GAS", 0, 1);
    def(0x5b, "JUMPDEST", 0, 0);
    def(0x5f, "PUSH0", 0, 1);
    static const char* push_names[32] = {
        "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8",
        "PUSH9", "PUSH10", "PUSH11", "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16",
        "PUSH17", "PUSH18", "PUSH19", "PUSH20", "PUSH21", "PUSH22", "PUSH23", "PUSH24",
        "PUSH25", "PUSH26", "PUSH27", "PUSH28", "PUSH29", "PUSH30", "PUSH31", "PUSH32"};
    static const char* dup_names[16] = {"DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8",
                                        "DUP9", "DUP10", "DUP11", "DUP12", "DUP13", "DUP14", "DUP15", "DUP16"};
    static const char* swap_names[16] = {"SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6",
                                         "SWAP7", "SWAP8", "SWAP9", "SWAP10", "SWAP11", "SWAP12",
                                         "SWAP13", "SWAP14", "SWAP15", "SWAP16"};
    for (int i = 0; i < 32; ++i) def(static_cast<std::uint8_t>(0x60 + i), push_names[i], 0, 1);
    for (int i = 0; i < 16; ++i) def(static_cast<std::uint8_t>(0x80 + i), dup_names[i], i + 1, i + 2);
    for (int i = 0; i < 16; ++i) def(static_cast<std::uint8_t>(0x90 + i), swap_names[i], i + 2, i + 2);
    def(0xa0, "LOG0", 2, 0);
    def(0xa1, "LOG1", 3, 0);
    def(0xa2, "LOG2", 4, 0);
    def(0xa3, "LOG3", 5, 0);
    def(0xa4, "LOG4", 6, 0);
    def(0xf0, "CREATE", 3, 1);
    def(0xf1, "CALL", 7, 1);
    def(0xf2, "CALLCODE", 7, 1);
    def(0xf3, "RETURN", 2, 0);
    def(0xf4, "DELEGATECALL", 6, 1);
    def(0xf5, "CREATE2", 4, 1);
    def(0xfa, "STATICCALL", 6, 1);
    def(0xfd, "REVERT", 2, 0);
    def(0xfe, "INVALID", 0, 0);
    def(0xff, "SELFDESTRUCT", 1, 0);
    return t;
}

const OpcodeInfo kUnknown{"INVALID", 0, 0, false};

bool ends_block(std::uint8_t opcode, Terminator& kind) {
    switch (opcode) {
        case op::JUMP: kind = Terminator::Jump; return true;
        case op::JUMPI: kind = Terminator::ConditionalJump; return true;
        case op::STOP: kind = Terminator::Stop; return true;
        case op::RETURN: kind = Terminator::Return; return true;
        case op::REVERT: kind = Terminator::Revert; return true;
        case op::SELFDESTRUCT: kind = Terminator::SelfDestruct; return true;
        case op::INVALID: kind = Terminator::Invalid; return true;
        default:
            if (!opcode_info(opcode).defined) {
                kind = Terminator::Invalid;
                return true;
            }
            return false;
    }
}

}  // namespace

const OpcodeInfo& opcode_info(std::uint8_t opcode) {
    static const auto table = build_table();
    const auto& info = table[opcode];
    return info.defined ? info : kUnknown;
}

Word Instruction::push_value() const {
    if (!push_payload) return 0;
    return word_from_bytes(push_payload->data(), push_payload->size());
}

std::string_view terminator_name(Terminator t) {
    switch (t) {
        case Terminator::Jump: return "jump";
        case Terminator::ConditionalJump: return "conditional-jump";
        case Terminator::Fallthrough: return "fallthrough";
        case Terminator::Stop: return "stop";
        case Terminator::Return: return "return";
        case Terminator::Revert: return "revert";
        case Terminator::Invalid: return "invalid";
        case Terminator::SelfDestruct: return "selfdestruct";
    }
    return "?";
}

std::vector<Instruction> disassemble(const Bytes& bytecode) {
    std::vector<Instruction> out;
    std::size_t pc = 0;
    while (pc < bytecode.size()) {
        Instruction ins;
        ins.pc = pc;
        ins.opcode = bytecode[pc];
        ins.mnemonic = std::string(opcode_info(ins.opcode).mnemonic);
        ins.source_index = out.size();
        if (ins.is_push()) {
            std::size_t n = ins.opcode - 0x5f;
            Bytes payload(n, 0);
            for (std::size_t i = 0; i < n && pc + 1 + i < bytecode.size(); ++i) payload[i] = bytecode[pc + 1 + i];
            ins.push_payload = std::move(payload);
            pc += 1 + n;
        } else {
            pc += 1;
        }
        out.push_back(std::move(ins));
    }
    return out;
}

std::vector<BasicBlock> partition_blocks(const std::vector<Instruction>& instructions) {
    std::vector<BasicBlock> blocks;
    BasicBlock current;
    bool open = false;
    auto close = [&](Terminator kind) {
        current.end_pc = current.instructions.back().pc;
        current.terminator = kind;
        blocks.push_back(std::move(current));
        current = BasicBlock{};
        open = false;
    };
    for (const auto& ins : instructions) {
        if (ins.opcode == op::JUMPDEST && open) close(Terminator::Fallthrough);
        if (!open) {
            current.start_pc = ins.pc;
            open = true;
        }
        current.instructions.push_back(ins);
        Terminator kind;
        if (ends_block(ins.opcode, kind)) close(kind);
    }
    // running off the end of code halts like STOP
    if (open) close(Terminator::Stop);
    return blocks;
}

std::set<std::size_t> jumpdest_set(const std::vector<Instruction>& instructions) {
    std::set<std::size_t> out;
    for (const auto& ins : instructions)
        if (ins.opcode == op::JUMPDEST) out.insert(ins.pc);
    return out;
}

std::size_t code_length_without_metadata(const Bytes& bytecode) {
    if (bytecode.size() < 2) return bytecode.size();
    std::size_t meta = (std::size_t(bytecode[bytecode.size() - 2]) << 8) | bytecode.back();
    if (meta + 2 > bytecode.size()) return bytecode.size();
    std::size_t start = bytecode.size() - 2 - meta;
    // CBOR map header with a handful of entries
    std::uint8_t head = bytecode[start];
    if (head < 0xa1 || head > 0xa5) return bytecode.size();
    return start;
}

}  // namespace nftguard::disasm
