#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "nftguard/config.hpp"
#include "nftguard/disasm.hpp"
#include "nftguard/expr.hpp"
#include "nftguard/ingest.hpp"
#include "nftguard/smt.hpp"

namespace nftguard::symexec {

using ingest::FunctionContext;

struct StorageAddress {
    enum class Kind : std::uint8_t { ConcreteSlot, MappingSlot, ArrayElem, Opaque };
    Kind kind = Kind::Opaque;
    Word base = 0;         // slot id for every kind but Opaque
    Expr key = nullptr;    // mapping key, array index or the opaque address expression
    Expr word = nullptr;   // the address word as computed by the program

    static StorageAddress concrete(Expr word, const Word& slot) { return {Kind::ConcreteSlot, slot, nullptr, word}; }

    bool operator<(const StorageAddress& o) const;
    bool operator==(const StorageAddress& o) const;
    std::string to_string() const;
};

std::string_view kind_name(StorageAddress::Kind k);

// maps an SLOAD/SSTORE address expression onto the storage address shapes
StorageAddress classify_address(ExprPool& pool, Expr word);

struct Constraint {
    Expr condition = nullptr;  // must be non-zero
    std::size_t pc = 0;
    std::size_t instruction_index = 0;
    bool guard = false;  // branch written in user source rather than compiler-generated code
};

struct SourceLocation {
    std::int64_t offset = 0;
    std::int64_t length = 0;
    int file_index = -1;
};

struct EventOrigin {
    std::size_t pc = 0;
    std::size_t instruction_index = 0;
    SourceLocation source;
    std::optional<FunctionContext> context;
};

struct StackEvent {
    EventOrigin at;
    std::string op;
    std::vector<Expr> operands;
};

struct MemoryEvent {
    EventOrigin at;
    bool store = false;
    Expr address = nullptr;
    Expr value = nullptr;
};

struct StoreEvent {
    EventOrigin at;
    StorageAddress address;
    Expr value = nullptr;
    Expr previous = nullptr;
    std::size_t cons_size = 0;   // constraints in force when the store ran
    std::size_t store_index = 0; // position among this path's stores
};

struct LoadEvent {
    EventOrigin at;
    StorageAddress address;
    Expr value = nullptr;
};

struct CallEvent {
    EventOrigin at;
    std::uint8_t opcode = 0;
    Expr gas = nullptr;
    Expr target = nullptr;
    Expr value = nullptr;
    Expr args_offset = nullptr;
    Expr args_length = nullptr;
    Expr ret_offset = nullptr;
    Expr ret_length = nullptr;
    std::optional<std::uint32_t> resolved_selector;
    bool shifted_selector = false;
    std::size_t cons_size = 0;
    std::size_t stores_before = 0;
    std::size_t call_index = 0;
};

using TraceEvent = std::variant<StackEvent, MemoryEvent, StoreEvent, LoadEvent, CallEvent>;

// byte-addressed memory split into regions by symbolic base; each byte remembers its source word
class Memory {
public:
    struct Cell {
        Expr word = nullptr;  // null means never written
        std::uint8_t byte = 0;
    };

    Expr load(ExprPool& pool, Expr address) const;
    void store(ExprPool& pool, Expr address, Expr value);
    void store8(ExprPool& pool, Expr address, Expr value);
    // copies `length` bytes whose 32-byte words come from `word_at(offset)`
    void copy_in(ExprPool& pool, Expr dest, Expr length, const std::function<Expr(std::uint64_t)>& word_at,
                 const std::string& opaque_tag, Origin opaque_origin);
    std::optional<Bytes> concrete_bytes(ExprPool& pool, Expr address, std::size_t n) const;
    std::vector<Expr> words(ExprPool& pool, Expr address, std::size_t n_bytes) const;
    // the first 4 bytes at address when they are concrete; `shifted` tells whether they came from
    // a word holding only those 4 high-order bytes
    std::optional<std::uint32_t> selector_at(ExprPool& pool, Expr address, bool* shifted = nullptr) const;

    static constexpr std::uint64_t kLimit = 1u << 24;

private:
    struct Region {
        std::map<std::int64_t, Cell> cells;
        struct Opaque {
            std::int64_t start;
            std::string tag;
            Origin origin;
        };
        std::vector<Opaque> opaque_from;  // unknown contents from offset on
    };
    std::map<std::uint32_t, Region> regions_;  // keyed by base node id, 0 = absolute

    struct Place {
        std::uint32_t region = 0;
        Expr base = nullptr;
        std::int64_t offset = 0;
        bool ok = false;
    };
    Place place(ExprPool& pool, Expr address) const;
    Cell cell_at(ExprPool& pool, const Region* region, std::int64_t offset) const;
    Expr assemble(ExprPool& pool, const Place& p, std::size_t n) const;
};

struct MachineState {
    std::size_t pc = 0;
    std::vector<Expr> stack;
    Memory memory;
    std::map<StorageAddress, Expr> storage;  // written values (GS); unwritten reads yield GS0 leaves
    std::vector<Constraint> cons;
    std::optional<FunctionContext> context;
    FunctionContext entry;
    std::uint32_t selector = 0;
    std::map<std::size_t, unsigned> visit_counts;
    unsigned depth = 0;
    std::vector<StoreEvent> stores;
    std::vector<LoadEvent> loads;
    std::vector<CallEvent> calls;
    std::vector<TraceEvent> trace;
    std::size_t path_id = 0;
    std::size_t last_call = 0;  // 0 = no call yet
    bool visit_pending = false;  // forked successor that has not entered its block

    Expr storage_value(ExprPool& pool, const StorageAddress& addr) const;
    std::vector<Expr> constraint_exprs(std::size_t count = SIZE_MAX) const;
};

enum class PathEnd { Stop, Return, Revert, Invalid, SelfDestruct, Infeasible, LoopBound, DepthBound, PathBudget,
                     StackError, BadJump, SymbolicLength, Timeout };

std::string_view path_end_name(PathEnd e);

struct PathRecord {
    std::size_t path_id = 0;
    std::uint32_t selector = 0;
    std::string entry;
    PathEnd end = PathEnd::Stop;
    unsigned depth = 0;
    std::vector<StoreEvent> stores;
    std::vector<CallEvent> calls;
    std::vector<TraceEvent> trace;
    std::vector<Expr> final_stack;
};

struct CoverageStats {
    std::size_t paths = 0;
    std::size_t blocks_covered = 0;
    std::size_t blocks_total = 0;
    std::size_t solver_calls = 0;
    std::size_t symbolic_length_kills = 0;
    std::size_t bound_cuts = 0;
    std::size_t infeasible_branches = 0;
    std::map<std::string, std::size_t> ends;
};

struct AnalysisOutcome {
    std::vector<PathRecord> paths;
    CoverageStats stats;
    bool partial = false;
};

// hooks for rules evaluated while a path is live
class PathObserver {
public:
    virtual ~PathObserver() = default;
    virtual void on_store(const MachineState&, const StoreEvent&) {}
    virtual void on_call(const MachineState&, const CallEvent&) {}
    virtual void on_path_end(const MachineState&, PathEnd) {}
};

struct Program {
    Bytes code;
    std::vector<disasm::Instruction> instructions;
    std::vector<disasm::BasicBlock> blocks;
    std::unordered_map<std::size_t, std::size_t> index_of_pc;
    std::set<std::size_t> jumpdests;

    static Program from_bytecode(const Bytes& code);
};

class Engine {
public:
    Engine(ExprPool& pool, Solver* solver, const Program& program, const ingest::CompilationUnit* unit,
           const AnalysisConfig& config);

    MachineState initial_state(std::uint32_t selector, const FunctionContext& entry);
    std::vector<MachineState> step(MachineState& state);
    // explores from `start` depth-first; returns final states when `keep_finals` is set
    std::vector<MachineState> explore(MachineState start, PathObserver* observer, AnalysisOutcome& outcome,
                                      bool keep_finals = false);

    ExprPool& pool() { return pool_; }
    void set_deadline(std::chrono::steady_clock::time_point deadline) { deadline_ = deadline; }
    bool timed_out() const { return timed_out_; }
    std::size_t covered_block_count() const { return covered_blocks_.size(); }

private:
    ExprPool& pool_;
    Solver* solver_;
    const Program& program_;
    const ingest::CompilationUnit* unit_;
    const AnalysisConfig& config_;
    std::vector<std::optional<FunctionContext>> contexts_;
    std::optional<std::chrono::steady_clock::time_point> deadline_;
    bool timed_out_ = false;
    std::size_t next_path_id_ = 0;
    std::size_t next_call_id_ = 0;
    std::set<std::size_t> covered_blocks_;
    PathObserver* observer_ = nullptr;
    std::optional<PathEnd> pending_end_;
    std::size_t pending_infeasible_ = 0;

    struct Sink {
        PathObserver* observer;
        AnalysisOutcome* outcome;
        std::vector<MachineState>* finals;
    };

    // runs one instruction in place; false when the state forked (successors in `forks`) or ended
    bool advance(MachineState& s, std::vector<MachineState>& forks);
    void finish(MachineState& s, PathEnd end, const Sink& sink);
    EventOrigin origin_of(const MachineState& s, std::size_t index) const;
    SatResult feasible(const MachineState& s, Expr condition);
    Expr calldata_word(const MachineState& s, Expr offset);
    void enter_block(MachineState& s, std::size_t target);
    friend class EngineAccess;
};

SatResult solve(Solver& solver, const std::vector<Constraint>& cons, Expr assertion);

std::set<StorageAddress> extract_storage_addresses(ExprPool& pool, const std::vector<Constraint>& cons);
std::set<StorageAddress> extract_storage_addresses(ExprPool& pool, const std::vector<Expr>& exprs);
std::optional<Word> infer_slot(const StorageAddress& addr);
bool depends_on_caller(const std::set<StorageAddress>& addrs, const std::vector<Constraint>& cons);

// whole-contract exploration, one pass per public selector
AnalysisOutcome run(const ingest::CompilationUnit& unit, const ingest::SlotMap& slot_map,
                    const ingest::KeywordIndex& keyword_index, const AnalysisConfig& config, Solver& solver,
                    ExprPool& pool, PathObserver* observer = nullptr);

}  // namespace nftguard::symexec
