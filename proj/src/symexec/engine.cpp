#include <algorithm>

#include "nftguard/errors.hpp"
#include "nftguard/keccak.hpp"
#include "nftguard/symexec.hpp"

namespace nftguard::symexec {

namespace {

using disasm::opcode_info;
namespace op = disasm::op;

std::uint32_t id_of(Expr e) { return e ? e->id : 0; }

bool small_slot(const Word& w) { return w < (Word(1) << 64); }

std::string hex_id(Expr e) { return "e" + std::to_string(e->id); }

}  // namespace

bool StorageAddress::operator<(const StorageAddress& o) const {
    if (kind != o.kind) return kind < o.kind;
    if (base != o.base) return base < o.base;
    return id_of(key) < id_of(o.key);
}

bool StorageAddress::operator==(const StorageAddress& o) const {
    return kind == o.kind && base == o.base && id_of(key) == id_of(o.key);
}

std::string StorageAddress::to_string() const {
    switch (kind) {
        case Kind::ConcreteSlot: return "slot(" + word_to_hex(base) + ")";
        case Kind::MappingSlot: return "map(" + word_to_hex(base) + ")[" + render(key, 120) + "]";
        case Kind::ArrayElem: return "arr(" + word_to_hex(base) + ")[" + render(key, 120) + "]";
        case Kind::Opaque: return "opaque(" + render(key, 160) + ")";
    }
    return "?";
}

std::string_view kind_name(StorageAddress::Kind k) {
    switch (k) {
        case StorageAddress::Kind::ConcreteSlot: return "ConcreteSlot";
        case StorageAddress::Kind::MappingSlot: return "MappingSlot";
        case StorageAddress::Kind::ArrayElem: return "ArrayElem";
        case StorageAddress::Kind::Opaque: return "Opaque";
    }
    return "?";
}

StorageAddress classify_address(ExprPool& pool, Expr word) {
    using Kind = StorageAddress::Kind;
    if (word->is_const()) {
        const Word& w = word->value;
        if (const auto* image = pool.preimage(w)) {
            if (image->size() == 2 && small_slot((*image)[1]))
                return {Kind::MappingSlot, (*image)[1], pool.constant((*image)[0]), word};
            if (image->size() == 1 && small_slot((*image)[0])) return {Kind::ArrayElem, (*image)[0], pool.zero(), word};
        }
        if (auto arr = pool.array_base_for(w); arr && small_slot(arr->first))
            return {Kind::ArrayElem, arr->first, pool.constant(arr->second), word};
        if (small_slot(w)) return StorageAddress::concrete(word, w);
        return {Kind::Opaque, 0, word, word};
    }
    if (word->op == Op::Keccak) {
        if (word->value == 64 && word->args.size() == 2 && word->args[1]->is_const() && small_slot(word->args[1]->value))
            return {Kind::MappingSlot, word->args[1]->value, word->args[0], word};
        if (word->value == 32 && word->args.size() == 1 && word->args[0]->is_const() && small_slot(word->args[0]->value))
            return {Kind::ArrayElem, word->args[0]->value, pool.zero(), word};
        return {Kind::Opaque, 0, word, word};
    }
    if (word->op == Op::Add || word->op == Op::Sub) {
        LinearForm form = linear_form(word);
        // keccak(p) + index with a symbolic keccak image is not an array shape; only concrete digests are
        if (auto arr = pool.array_base_for(form.constant); arr && small_slot(arr->first)) {
            LinearForm index = form;
            index.constant = arr->second;
            return {Kind::ArrayElem, arr->first, from_linear(pool, index), word};
        }
    }
    return {Kind::Opaque, 0, word, word};
}

Expr MachineState::storage_value(ExprPool& pool, const StorageAddress& addr) const {
    if (auto it = storage.find(addr); it != storage.end()) return it->second;
    return pool.storage_read(addr.word);
}

std::vector<Expr> MachineState::constraint_exprs(std::size_t count) const {
    std::vector<Expr> out;
    count = std::min(count, cons.size());
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(cons[i].condition);
    return out;
}

std::string_view path_end_name(PathEnd e) {
    switch (e) {
        case PathEnd::Stop: return "stop";
        case PathEnd::Return: return "return";
        case PathEnd::Revert: return "revert";
        case PathEnd::Invalid: return "invalid";
        case PathEnd::SelfDestruct: return "selfdestruct";
        case PathEnd::Infeasible: return "infeasible";
        case PathEnd::LoopBound: return "loop_bound";
        case PathEnd::DepthBound: return "depth_bound";
        case PathEnd::PathBudget: return "path_budget";
        case PathEnd::StackError: return "stack_error";
        case PathEnd::BadJump: return "bad_jump";
        case PathEnd::SymbolicLength: return "symbolic_length";
        case PathEnd::Timeout: return "timeout";
    }
    return "?";
}

Program Program::from_bytecode(const Bytes& code) {
    Program p;
    p.code = code;
    p.instructions = disasm::disassemble(code);
    p.blocks = disasm::partition_blocks(p.instructions);
    for (std::size_t i = 0; i < p.instructions.size(); ++i) p.index_of_pc.emplace(p.instructions[i].pc, i);
    p.jumpdests = disasm::jumpdest_set(p.instructions);
    return p;
}

Engine::Engine(ExprPool& pool, Solver* solver, const Program& program, const ingest::CompilationUnit* unit,
               const AnalysisConfig& config)
    : pool_(pool), solver_(solver), program_(program), unit_(unit), config_(config) {
    contexts_.resize(program.instructions.size());
    if (unit_)
        for (std::size_t i = 0; i < contexts_.size(); ++i) contexts_[i] = ingest::function_at(*unit_, i);
    if (solver_) solver_->attach(pool_);
}

MachineState Engine::initial_state(std::uint32_t selector, const FunctionContext& entry) {
    MachineState s;
    s.selector = selector;
    s.entry = entry;
    s.context = entry;
    s.path_id = next_path_id_++;
    covered_blocks_.insert(0);
    return s;
}

EventOrigin Engine::origin_of(const MachineState& s, std::size_t index) const {
    EventOrigin at;
    at.pc = s.pc;
    at.instruction_index = index;
    at.context = s.context;
    if (unit_ && index < unit_->source_map.size()) {
        const auto& m = unit_->source_map[index];
        at.source = {m.offset, m.length, m.file_index};
    }
    return at;
}

SatResult Engine::feasible(const MachineState& s, Expr condition) {
    if (condition->is_const()) return condition->value.is_zero() ? SatResult::Unsat : SatResult::Sat;
    if (!solver_) return SatResult::Unknown;
    return solver_->check(s.constraint_exprs(), condition);
}

Expr Engine::calldata_word(const MachineState& s, Expr offset) {
    if (config_.concrete) {
        if (!offset->is_const()) return pool_.zero();
        const Bytes& cd = config_.concrete->calldata;
        Bytes chunk(32, 0);
        if (offset->value < Word(cd.size())) {
            auto start = static_cast<std::size_t>(word_to_u64(offset->value));
            for (std::size_t k = 0; k < 32 && start + k < cd.size(); ++k) chunk[k] = cd[start + k];
        }
        return pool_.constant(word_from_bytes(chunk.data(), chunk.size()));
    }
    if (offset->is_const()) {
        if (offset->value.is_zero()) {
            Expr tail = pool_.symbol("calldata@0", Origin::Calldata, 224);
            return pool_.make(Op::Or, pool_.constant(Word(s.selector) << 224), tail);
        }
        return pool_.symbol("calldata@" + word_to_hex(offset->value), Origin::Calldata);
    }
    return pool_.symbol("calldata@[" + hex_id(offset) + "]", Origin::Calldata);
}

void Engine::enter_block(MachineState& s, std::size_t target) {
    s.pc = target;
    ++s.depth;
    ++s.visit_counts[target];
    covered_blocks_.insert(target);
    if (s.visit_counts[target] > config_.loop_bound)
        pending_end_ = PathEnd::LoopBound;
    else if (s.depth > config_.depth_limit)
        pending_end_ = PathEnd::DepthBound;
}

std::vector<MachineState> Engine::step(MachineState& state) {
    std::vector<MachineState> forks;
    pending_end_.reset();
    if (advance(state, forks)) return {std::move(state)};
    if (forks.empty()) forks.push_back(std::move(state));
    return forks;
}

bool Engine::advance(MachineState& s, std::vector<MachineState>& forks) {
    auto found = program_.index_of_pc.find(s.pc);
    if (found == program_.index_of_pc.end()) {
        pending_end_ = PathEnd::Stop;
        return false;
    }
    const std::size_t index = found->second;
    const auto& ins = program_.instructions[index];
    const auto& info = opcode_info(ins.opcode);
    if (index < contexts_.size() && contexts_[index]) s.context = contexts_[index];

    if (!info.defined || ins.opcode == op::INVALID) {
        pending_end_ = PathEnd::Invalid;
        return false;
    }
    if (s.stack.size() < static_cast<std::size_t>(info.pops) ||
        s.stack.size() - info.pops + info.pushes > 1024) {
        pending_end_ = PathEnd::StackError;
        return false;
    }

    auto pop = [&] {
        Expr e = s.stack.back();
        s.stack.pop_back();
        return e;
    };
    auto push = [&](Expr e) { s.stack.push_back(e); };
    auto c = [&](const Word& w) { return pool_.constant(w); };
    auto env = [&](const std::string& name, Origin origin, unsigned width, const Word& concrete_value) {
        if (config_.concrete) return c(concrete_value);
        return pool_.symbol(name, origin, width);
    };

    if (config_.record_trace) {
        std::vector<Expr> operands(s.stack.end() - info.pops, s.stack.end());
        std::reverse(operands.begin(), operands.end());
        s.trace.emplace_back(StackEvent{origin_of(s, index), std::string(info.mnemonic), std::move(operands)});
    }

    const std::size_t next_pc = s.pc + 1 + (ins.push_payload ? ins.push_payload->size() : 0);
    const std::uint8_t o = ins.opcode;

    auto binary = [&](Op operation) {
        Expr a = pop();
        Expr b = pop();
        push(pool_.make(operation, a, b));
    };

    switch (o) {
        case op::STOP: pending_end_ = PathEnd::Stop; return false;
        case op::ADD: binary(Op::Add); break;
        case op::MUL: binary(Op::Mul); break;
        case op::SUB: binary(Op::Sub); break;
        case op::DIV: binary(Op::Div); break;
        case op::SDIV: binary(Op::SDiv); break;
        case op::MOD: binary(Op::Mod); break;
        case op::SMOD: binary(Op::SMod); break;
        case op::EXP: binary(Op::Exp); break;
        case op::SIGNEXTEND: binary(Op::SignExtend); break;
        case op::LT: binary(Op::Lt); break;
        case op::GT: binary(Op::Gt); break;
        case op::SLT: binary(Op::Slt); break;
        case op::SGT: binary(Op::Sgt); break;
        case op::EQ: binary(Op::Eq); break;
        case op::AND: binary(Op::And); break;
        case op::OR: binary(Op::Or); break;
        case op::XOR: binary(Op::Xor); break;
        case op::BYTE: binary(Op::Byte); break;
        case op::SHL: binary(Op::Shl); break;
        case op::SHR: binary(Op::Shr); break;
        case op::SAR: binary(Op::Sar); break;
        case op::ISZERO: push(pool_.make(Op::IsZero, pop())); break;
        case op::NOT: push(pool_.make(Op::Not, pop())); break;
        case op::ADDMOD:
        case op::MULMOD: {
            Expr a = pop();
            Expr b = pop();
            Expr n = pop();
            push(pool_.make(o == op::ADDMOD ? Op::AddMod : Op::MulMod, a, b, n));
            break;
        }
        case op::KECCAK256: {
            Expr offset = pop();
            Expr length = pop();
            if (!length->is_const() || length->value > Word(Memory::kLimit)) {
                pending_end_ = PathEnd::SymbolicLength;
                return false;
            }
            auto n = static_cast<std::size_t>(word_to_u64(length->value));
            if (auto bytes = s.memory.concrete_bytes(pool_, offset, n)) {
                Word digest = keccak_word(*bytes);
                if (n % 32 == 0 && n > 0) {
                    std::vector<Word> words;
                    for (std::size_t k = 0; k < n; k += 32)
                        words.push_back(word_from_bytes(bytes->data() + k, 32));
                    pool_.note_preimage(digest, std::move(words));
                }
                push(c(digest));
            } else {
                push(pool_.keccak(s.memory.words(pool_, offset, n), n));
            }
            break;
        }
        case op::ADDRESS:
            push(env("address", Origin::Address, 160, config_.concrete ? config_.concrete->address : Word(0)));
            break;
        case op::BALANCE: {
            Expr a = pop();
            push(env("balance[" + hex_id(a) + "]", Origin::Balance, 256, 0));
            break;
        }
        case op::ORIGIN:
            push(env("origin", Origin::TxOrigin, 160, config_.concrete ? config_.concrete->caller : Word(0)));
            break;
        case op::CALLER:
            push(env("caller", Origin::Caller, 160, config_.concrete ? config_.concrete->caller : Word(0)));
            break;
        case op::CALLVALUE:
            push(env("callvalue", Origin::CallValue, 256, config_.concrete ? config_.concrete->callvalue : Word(0)));
            break;
        case op::CALLDATALOAD: push(calldata_word(s, pop())); break;
        case op::CALLDATASIZE:
            push(env("calldatasize", Origin::Calldata, 64,
                     config_.concrete ? Word(config_.concrete->calldata.size()) : Word(0)));
            break;
        case op::CALLDATACOPY: {
            Expr dest = pop();
            Expr src = pop();
            Expr length = pop();
            auto word_at = [&](std::uint64_t k) {
                return calldata_word(s, pool_.make(Op::Add, src, c(Word(k))));
            };
            s.memory.copy_in(pool_, dest, length, word_at, "calldata[" + hex_id(src) + "]", Origin::Calldata);
            break;
        }
        case op::CODESIZE: push(c(Word(program_.code.size()))); break;
        case op::CODECOPY: {
            Expr dest = pop();
            Expr src = pop();
            Expr length = pop();
            auto word_at = [&](std::uint64_t k) -> Expr {
                Expr at = pool_.make(Op::Add, src, c(Word(k)));
                if (!at->is_const()) return pool_.symbol("code@" + hex_id(at), Origin::Environment);
                Bytes chunk(32, 0);
                if (at->value < Word(program_.code.size())) {
                    auto start = static_cast<std::size_t>(word_to_u64(at->value));
                    for (std::size_t i = 0; i < 32 && start + i < program_.code.size(); ++i)
                        chunk[i] = program_.code[start + i];
                }
                return c(word_from_bytes(chunk.data(), chunk.size()));
            };
            s.memory.copy_in(pool_, dest, length, word_at, "code[" + hex_id(src) + "]", Origin::Environment);
            break;
        }
        case op::GASPRICE: push(env("gasprice", Origin::Environment, 256, 1)); break;
        case op::EXTCODESIZE: {
            Expr a = pop();
            push(env("extcodesize[" + hex_id(a) + "]", Origin::ExtCode, 64, 0));
            break;
        }
        case op::EXTCODECOPY: {
            Expr a = pop();
            Expr dest = pop();
            pop();
            Expr length = pop();
            std::string tag = "extcode[" + hex_id(a) + "]";
            auto word_at = [&](std::uint64_t k) {
                return pool_.symbol(tag + "@" + std::to_string(k / 32), Origin::ExtCode);
            };
            s.memory.copy_in(pool_, dest, length, word_at, tag, Origin::ExtCode);
            break;
        }
        case op::RETURNDATASIZE:
            if (s.last_call == 0)
                push(pool_.zero());
            else
                push(pool_.symbol("returndatasize#" + std::to_string(s.last_call), Origin::ReturnData, 64));
            break;
        case op::RETURNDATACOPY: {
            Expr dest = pop();
            Expr src = pop();
            Expr length = pop();
            std::string tag = "returndata#" + std::to_string(s.last_call) + "[" + hex_id(src) + "]";
            auto word_at = [&](std::uint64_t k) {
                Expr at = pool_.make(Op::Add, src, c(Word(k)));
                return pool_.symbol("returndata#" + std::to_string(s.last_call) + "@" +
                                        (at->is_const() ? word_to_hex(at->value) : hex_id(at)),
                                    Origin::ReturnData);
            };
            s.memory.copy_in(pool_, dest, length, word_at, tag, Origin::ReturnData);
            break;
        }
        case op::EXTCODEHASH: {
            Expr a = pop();
            push(env("extcodehash[" + hex_id(a) + "]", Origin::ExtCode, 256, 0));
            break;
        }
        case op::BLOCKHASH: {
            Expr n = pop();
            push(env("blockhash[" + hex_id(n) + "]", Origin::Environment, 256, 0));
            break;
        }
        case op::COINBASE: push(env("coinbase", Origin::Environment, 160, 0)); break;
        case op::TIMESTAMP:
            push(env("timestamp", Origin::Timestamp, 64, config_.concrete ? config_.concrete->timestamp : Word(0)));
            break;
        case op::NUMBER:
            push(env("number", Origin::Number, 64, config_.concrete ? config_.concrete->number : Word(0)));
            break;
        case op::PREVRANDAO: push(env("prevrandao", Origin::Environment, 256, 0)); break;
        case op::GASLIMIT: push(env("gaslimit", Origin::Environment, 64, 30000000)); break;
        case op::CHAINID: push(env("chainid", Origin::Environment, 64, 1)); break;
        case op::SELFBALANCE: push(env("selfbalance", Origin::Balance, 256, 0)); break;
        case op::BASEFEE: push(env("basefee", Origin::Environment, 64, 0)); break;
        case op::POP: pop(); break;
        case op::MLOAD: {
            Expr addr = pop();
            Expr value = s.memory.load(pool_, addr);
            if (config_.record_trace) s.trace.emplace_back(MemoryEvent{origin_of(s, index), false, addr, value});
            push(value);
            break;
        }
        case op::MSTORE:
        case op::MSTORE8: {
            Expr addr = pop();
            Expr value = pop();
            if (o == op::MSTORE)
                s.memory.store(pool_, addr, value);
            else
                s.memory.store8(pool_, addr, value);
            if (config_.record_trace) s.trace.emplace_back(MemoryEvent{origin_of(s, index), true, addr, value});
            break;
        }
        case op::SLOAD: {
            Expr word = pop();
            StorageAddress addr = classify_address(pool_, word);
            Expr value;
            if (config_.concrete && !s.storage.count(addr))
                value = pool_.zero();
            else
                value = s.storage_value(pool_, addr);
            LoadEvent ev{origin_of(s, index), addr, value};
            if (config_.record_trace) s.trace.emplace_back(ev);
            s.loads.push_back(std::move(ev));
            push(value);
            break;
        }
        case op::SSTORE: {
            Expr word = pop();
            Expr value = pop();
            StorageAddress addr = classify_address(pool_, word);
            Expr previous = config_.concrete && !s.storage.count(addr) ? pool_.zero() : s.storage_value(pool_, addr);
            s.storage[addr] = value;
            StoreEvent ev{origin_of(s, index), addr, value, previous, s.cons.size(), s.stores.size()};
            if (config_.record_trace) s.trace.emplace_back(ev);
            s.stores.push_back(ev);
            if (observer_) observer_->on_store(s, s.stores.back());
            break;
        }
        case op::JUMP: {
            Expr target = pop();
            if (target->is_const()) {
                if (!fits_u64(target->value) ||
                    !program_.jumpdests.count(static_cast<std::size_t>(word_to_u64(target->value)))) {
                    pending_end_ = PathEnd::BadJump;
                    return false;
                }
                enter_block(s, static_cast<std::size_t>(word_to_u64(target->value)));
                return !pending_end_;
            }
            if (!solver_) {
                pending_end_ = PathEnd::BadJump;
                return false;
            }
            auto values = solver_->enumerate(s.constraint_exprs(), target, config_.jump_models);
            std::vector<std::size_t> targets;
            for (const auto& v : values)
                if (fits_u64(v) && program_.jumpdests.count(static_cast<std::size_t>(word_to_u64(v))))
                    targets.push_back(static_cast<std::size_t>(word_to_u64(v)));
            std::sort(targets.begin(), targets.end());
            if (targets.empty()) {
                pending_end_ = PathEnd::BadJump;
                return false;
            }
            for (std::size_t k = 0; k < targets.size(); ++k) {
                MachineState next = k + 1 == targets.size() ? std::move(s) : s;
                if (k > 0) next.path_id = next_path_id_++;
                next.cons.push_back({pool_.make(Op::Eq, target, c(Word(targets[k]))), ins.pc, index, false});
                forks.push_back(std::move(next));
            }
            // successors enter their blocks in explore so bound checks stay per state
            for (std::size_t k = 0; k < targets.size(); ++k) forks[k].pc = targets[k];
            return false;
        }
        case op::JUMPI: {
            Expr target = pop();
            Expr cond = pop();
            bool guard = unit_ && index < unit_->source_map.size() &&
                         unit_->source_map[index].file_index == unit_->source_file_index;
            auto target_ok = [&] {
                return target->is_const() && fits_u64(target->value) &&
                       program_.jumpdests.count(static_cast<std::size_t>(word_to_u64(target->value)));
            };
            if (cond->is_const()) {
                if (cond->value.is_zero()) {
                    enter_block(s, next_pc);
                    return !pending_end_;
                }
                if (!target_ok()) {
                    pending_end_ = PathEnd::BadJump;
                    return false;
                }
                enter_block(s, static_cast<std::size_t>(word_to_u64(target->value)));
                return !pending_end_;
            }
            Expr negated = pool_.make(Op::IsZero, cond);
            SatResult taken = target_ok() ? feasible(s, cond) : SatResult::Unsat;
            SatResult fallthrough = taken == SatResult::Unsat ? SatResult::Sat : feasible(s, negated);
            if (taken == SatResult::Unsat && fallthrough == SatResult::Unsat) {
                pending_end_ = PathEnd::Infeasible;
                return false;
            }
            if (taken == SatResult::Unsat || fallthrough == SatResult::Unsat) pending_infeasible_ += 1;
            if (taken != SatResult::Unsat) {
                MachineState next = fallthrough == SatResult::Unsat ? std::move(s) : s;
                next.cons.push_back({cond, ins.pc, index, guard});
                next.pc = static_cast<std::size_t>(word_to_u64(target->value));
                forks.push_back(std::move(next));
            }
            if (fallthrough != SatResult::Unsat) {
                MachineState next = std::move(s);
                if (!forks.empty()) next.path_id = next_path_id_++;
                next.cons.push_back({negated, ins.pc, index, guard});
                next.pc = next_pc;
                forks.push_back(std::move(next));
            }
            return false;
        }
        case op::PC: push(c(Word(ins.pc))); break;
        case op::MSIZE: push(env("msize", Origin::Environment, 64, 0)); break;
        case op::GAS: push(env("gas", Origin::Environment, 64, 1000000)); break;
        case op::JUMPDEST: break;
        case op::CREATE:
        case op::CREATE2: {
            for (int k = 0; k < info.pops; ++k) pop();
            push(pool_.symbol("created#" + std::to_string(++next_call_id_), Origin::ReturnData, 160));
            s.last_call = next_call_id_;
            break;
        }
        case op::CALL:
        case op::CALLCODE:
        case op::DELEGATECALL:
        case op::STATICCALL: {
            CallEvent ev;
            ev.at = origin_of(s, index);
            ev.opcode = o;
            ev.gas = pop();
            ev.target = pop();
            ev.value = (o == op::CALL || o == op::CALLCODE) ? pop() : pool_.zero();
            ev.args_offset = pop();
            ev.args_length = pop();
            ev.ret_offset = pop();
            ev.ret_length = pop();
            if (!(ev.args_length->is_const() && ev.args_length->value < 4)) {
                bool shifted = false;
                ev.resolved_selector = s.memory.selector_at(pool_, ev.args_offset, &shifted);
                ev.shifted_selector = ev.resolved_selector && shifted;
            }
            ev.cons_size = s.cons.size();
            ev.stores_before = s.stores.size();
            ev.call_index = ++next_call_id_;
            s.last_call = ev.call_index;
            const std::string id = std::to_string(ev.call_index);
            auto word_at = [&](std::uint64_t k) {
                return pool_.symbol("returndata#" + id + "@" + word_to_hex(Word(k)), Origin::ReturnData);
            };
            s.memory.copy_in(pool_, ev.ret_offset, ev.ret_length, word_at, "returndata#" + id, Origin::ReturnData);
            if (config_.record_trace) s.trace.emplace_back(ev);
            s.calls.push_back(ev);
            if (observer_) observer_->on_call(s, s.calls.back());
            push(pool_.symbol("success#" + id, Origin::ReturnData, 1));
            break;
        }
        case op::RETURN:
        case op::REVERT:
            pop();
            pop();
            pending_end_ = o == op::RETURN ? PathEnd::Return : PathEnd::Revert;
            return false;
        case op::SELFDESTRUCT:
            pop();
            pending_end_ = PathEnd::SelfDestruct;
            return false;
        default:
            if (ins.is_push() || o == op::PUSH0) {
                push(c(ins.is_push() ? ins.push_value() : Word(0)));
            } else if (o >= op::DUP1 && o <= op::DUP16) {
                push(s.stack[s.stack.size() - (o - op::DUP1 + 1)]);
            } else if (o >= op::SWAP1 && o <= op::SWAP16) {
                std::swap(s.stack.back(), s.stack[s.stack.size() - 1 - (o - op::SWAP1 + 1)]);
            } else if (o >= op::LOG0 && o <= op::LOG4) {
                for (int k = 0; k < info.pops; ++k) pop();
            } else {
                pending_end_ = PathEnd::Invalid;
                return false;
            }
            break;
    }

    if (program_.jumpdests.count(next_pc)) {
        enter_block(s, next_pc);
        return !pending_end_;
    }
    s.pc = next_pc;
    return true;
}

void Engine::finish(MachineState& s, PathEnd end, const Sink& sink) {
    auto& stats = sink.outcome->stats;
    ++stats.paths;
    ++stats.ends[std::string(path_end_name(end))];
    if (end == PathEnd::LoopBound || end == PathEnd::DepthBound) ++stats.bound_cuts;
    if (end == PathEnd::SymbolicLength) ++stats.symbolic_length_kills;
    if (sink.observer) sink.observer->on_path_end(s, end);
    if (config_.record_paths) {
        PathRecord rec;
        rec.path_id = s.path_id;
        rec.selector = s.selector;
        rec.entry = s.entry.name;
        rec.end = end;
        rec.depth = s.depth;
        rec.stores = s.stores;
        rec.calls = s.calls;
        rec.trace = s.trace;
        rec.final_stack = s.stack;
        sink.outcome->paths.push_back(std::move(rec));
    }
    if (sink.finals) sink.finals->push_back(std::move(s));
}

std::vector<MachineState> Engine::explore(MachineState start, PathObserver* observer, AnalysisOutcome& outcome,
                                          bool keep_finals) {
    std::vector<MachineState> finals;
    Sink sink{observer, &outcome, keep_finals ? &finals : nullptr};
    observer_ = observer;
    std::vector<MachineState> work;
    work.push_back(std::move(start));
    std::size_t ended = 0;
    std::size_t steps = 0;
    std::vector<MachineState> forks;
    while (!work.empty()) {
        MachineState s = std::move(work.back());
        work.pop_back();
        if (timed_out_ || ended >= config_.path_budget) {
            finish(s, timed_out_ ? PathEnd::Timeout : PathEnd::PathBudget, sink);
            ++ended;
            continue;
        }
        // a successor produced by a fork has its pc set but has not entered its block yet
        if (s.visit_pending) {
            s.visit_pending = false;
            pending_end_.reset();
            enter_block(s, s.pc);
            if (pending_end_) {
                finish(s, *pending_end_, sink);
                ++ended;
                continue;
            }
        }
        for (;;) {
            if ((++steps & 1023) == 0 && deadline_ && std::chrono::steady_clock::now() > *deadline_) timed_out_ = true;
            if (timed_out_) {
                finish(s, PathEnd::Timeout, sink);
                ++ended;
                break;
            }
            pending_end_.reset();
            forks.clear();
            if (advance(s, forks)) continue;
            if (pending_end_) {
                finish(s, *pending_end_, sink);
                ++ended;
                break;
            }
            outcome.stats.infeasible_branches += pending_infeasible_;
            pending_infeasible_ = 0;
            for (auto it = forks.rbegin(); it != forks.rend(); ++it) {
                it->visit_pending = true;
                work.push_back(std::move(*it));
            }
            break;
        }
    }
    observer_ = nullptr;
    return finals;
}

SatResult solve(Solver& solver, const std::vector<Constraint>& cons, Expr assertion) {
    std::vector<Expr> exprs;
    exprs.reserve(cons.size());
    for (const auto& c : cons) exprs.push_back(c.condition);
    return solver.check(exprs, assertion);
}

std::set<StorageAddress> extract_storage_addresses(ExprPool& pool, const std::vector<Expr>& exprs) {
    std::set<StorageAddress> out;
    std::set<std::uint32_t> seen;
    std::vector<Expr> todo(exprs.begin(), exprs.end());
    while (!todo.empty()) {
        Expr e = todo.back();
        todo.pop_back();
        if (!seen.insert(e->id).second) continue;
        if (e->op == Op::StorageRead) {
            out.insert(classify_address(pool, e->args[0]));
            continue;
        }
        for (auto a : e->args) todo.push_back(a);
    }
    return out;
}

std::set<StorageAddress> extract_storage_addresses(ExprPool& pool, const std::vector<Constraint>& cons) {
    std::vector<Expr> exprs;
    for (const auto& c : cons) exprs.push_back(c.condition);
    return extract_storage_addresses(pool, exprs);
}

std::optional<Word> infer_slot(const StorageAddress& addr) {
    if (addr.kind == StorageAddress::Kind::Opaque) return std::nullopt;
    return addr.base;
}

bool depends_on_caller(const std::set<StorageAddress>& addrs, const std::vector<Constraint>& cons) {
    for (const auto& c : cons)
        if (c.condition->caller_derived()) return true;
    for (const auto& a : addrs)
        if (a.key && a.key->caller_derived()) return true;
    return false;
}

namespace {

std::map<std::string, int> linearization_rank(const ingest::CompilationUnit& unit) {
    std::map<std::int64_t, std::string> names;
    std::vector<std::int64_t> order;
    for (const auto& node : unit.ast.value("nodes", ingest::Json::array())) {
        if (node.value("nodeType", "") != "ContractDefinition") continue;
        names[node.value("id", std::int64_t{-1})] = node.value("name", "");
        if (node.value("name", "") == unit.contract_name)
            for (const auto& id : node.value("linearizedBaseContracts", ingest::Json::array()))
                order.push_back(id.get<std::int64_t>());
    }
    std::map<std::string, int> rank;
    for (std::size_t i = 0; i < order.size(); ++i) rank.emplace(names[order[i]], static_cast<int>(i));
    return rank;
}

}  // namespace

AnalysisOutcome run(const ingest::CompilationUnit& unit, const ingest::SlotMap&, const ingest::KeywordIndex&,
                    const AnalysisConfig& config, Solver& solver, ExprPool& pool, PathObserver* observer) {
    AnalysisOutcome outcome;
    Program program = Program::from_bytecode(unit.runtime_bytecode);
    Engine engine(pool, &solver, program, &unit, config);
    engine.set_deadline(std::chrono::steady_clock::now() + std::chrono::seconds(config.timeout_s));
    const std::size_t queries_before = solver.queries();

    auto rank = linearization_rank(unit);
    std::vector<std::pair<std::uint32_t, std::string>> entries;
    for (const auto& [signature, selector] : unit.method_identifiers) entries.emplace_back(selector, signature);
    std::sort(entries.begin(), entries.end());

    for (const auto& [selector, signature] : entries) {
        FunctionContext entry{signature.substr(0, signature.find('(')), selector, 0, 0};
        const ingest::FunctionRange* best = nullptr;
        int best_rank = 0;
        for (const auto& r : unit.function_ranges) {
            if (r.selector != selector) continue;
            auto it = rank.find(r.contract);
            int rk = it == rank.end() ? 1 << 20 : it->second;
            if (!best || rk < best_rank) {
                best = &r;
                best_rank = rk;
            }
        }
        if (best) {
            entry.offset = best->offset;
            entry.length = best->length;
        }
        engine.explore(engine.initial_state(selector, entry), observer, outcome);
        if (engine.timed_out()) break;
    }
    outcome.partial = engine.timed_out();
    outcome.stats.blocks_total = program.blocks.size();
    outcome.stats.blocks_covered = engine.covered_block_count();
    outcome.stats.solver_calls = solver.queries() - queries_before;
    return outcome;
}

}  // namespace nftguard::symexec
