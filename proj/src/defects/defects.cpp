#include "nftguard/defects.hpp"

#include <algorithm>

namespace nftguard::defects {

using features::Role;
using symexec::Constraint;
using symexec::Expr;
using symexec::Op;
using symexec::Origin;
using symexec::SatResult;
using symexec::StorageAddress;
using symexec::StoreEvent;
using Kind = StorageAddress::Kind;

std::string_view kind_name(DefectKind k) {
    switch (k) {
        case DefectKind::RiskyMutableProxy: return "RiskyMutableProxy";
        case DefectKind::ERC721Reentrancy: return "ERC721Reentrancy";
        case DefectKind::UnlimitedMinting: return "UnlimitedMinting";
        case DefectKind::MissingRequirements: return "MissingRequirements";
        case DefectKind::PublicBurn: return "PublicBurn";
    }
    return "?";
}

std::optional<DefectKind> parse_kind(std::string_view text) {
    static const std::pair<std::string_view, DefectKind> shorts[] = {
        {"RMP", DefectKind::RiskyMutableProxy}, {"ER", DefectKind::ERC721Reentrancy},
        {"UM", DefectKind::UnlimitedMinting},   {"MR", DefectKind::MissingRequirements},
        {"PB", DefectKind::PublicBurn}};
    for (auto k : kAllKinds)
        if (kind_name(k) == text) return k;
    for (const auto& [name, k] : shorts)
        if (name == text) return k;
    return std::nullopt;
}

std::string rule_version(DefectKind k) { return k == DefectKind::PublicBurn ? "v1.1" : "v1"; }

const std::vector<RequirementSpec>& default_catalog() {
    static const std::vector<RequirementSpec> catalog{
        {Role::Approve, "approve-caller-authorization",
         "approve must be called by the token owner or an operator approved for all of the owner's tokens", true},
        {Role::Approve, "approve-not-current-owner", "approve must not target the current owner", false},
        {Role::Mint, "mint-nonzero-recipient", "mint must not assign a token to the zero address", true},
    };
    return catalog;
}

namespace {

std::vector<Constraint> guard_prefix(const MachineState& path, std::size_t count) {
    std::vector<Constraint> out;
    for (std::size_t i = 0; i < std::min(count, path.cons.size()); ++i)
        if (path.cons[i].guard) out.push_back(path.cons[i]);
    return out;
}

std::vector<Constraint> full_prefix(const MachineState& path, std::size_t count) {
    count = std::min(count, path.cons.size());
    return {path.cons.begin(), path.cons.begin() + static_cast<std::ptrdiff_t>(count)};
}

// storage contents of `addr` after the first `store_count` stores of the path
Expr value_at(const MachineState& path, const StorageAddress& addr, std::size_t store_count, symexec::ExprPool& pool) {
    for (std::size_t i = std::min(store_count, path.stores.size()); i-- > 0;)
        if (path.stores[i].address == addr) return path.stores[i].value;
    return pool.storage_read(addr.word);
}

SourceRange locate(const RuleContext& ctx, const MachineState& path, const symexec::EventOrigin& at) {
    SourceRange r;
    r.file = ctx.unit->source_path;
    if (at.source.file_index == ctx.unit->source_file_index && at.source.length > 0) {
        r.offset = at.source.offset;
        r.length = at.source.length;
    } else {
        r.offset = static_cast<std::int64_t>(path.entry.offset);
        r.length = static_cast<std::int64_t>(path.entry.length);
    }
    r.line = ctx.unit->line_of(static_cast<std::size_t>(r.offset));
    return r;
}

DefectReport make_report(DefectKind kind, const RuleContext& ctx, const MachineState& path,
                         const symexec::EventOrigin& at, std::string feature, const std::vector<Constraint>& cons,
                         const std::set<StorageAddress>& addresses) {
    DefectReport r;
    r.kind = kind;
    r.contract_name = ctx.unit->contract_name;
    r.function_name = path.entry.name;
    r.source_range = locate(ctx, path, at);
    r.evidence.feature = std::move(feature);
    for (const auto& c : cons) r.evidence.constraints.push_back(symexec::render(c.condition, 240));
    std::set<Word> slots;
    for (const auto& a : addresses)
        if (auto s = symexec::infer_slot(a)) slots.insert(*s);
    for (const auto& s : slots) r.evidence.slots.push_back(word_to_hex(s));
    r.rule_version = rule_version(kind);
    r.path_id = path.path_id;
    r.witness_length = path.depth;
    return r;
}

bool in_role(Role role, const StoreEvent& store, const MachineState& path, const features::PathFeatures& pf,
             const ingest::KeywordIndex& keywords) {
    if (features::validate_context(path.entry, pf, keywords) == role) return true;
    return store.at.context && features::validate_context(*store.at.context, pf, keywords) == role;
}

SatResult cached_check(const RuleContext& ctx, const std::vector<Constraint>& cons, Expr assertion) {
    std::string key;
    for (const auto& c : cons) key += std::to_string(c.condition->id) + ",";
    key += "|" + std::to_string(assertion->id);
    if (ctx.query_cache)
        if (auto it = ctx.query_cache->find(key); it != ctx.query_cache->end()) return it->second;
    SatResult r = symexec::solve(*ctx.solver, cons, assertion);
    if (ctx.query_cache) ctx.query_cache->emplace(key, r);
    return r;
}

void collect_nodes(Expr e, std::set<std::uint32_t>& seen, std::vector<Expr>& out, bool into_reads) {
    if (!seen.insert(e->id).second) return;
    out.push_back(e);
    if (e->op == Op::StorageRead && !into_reads) return;
    for (auto a : e->args) collect_nodes(a, seen, out, into_reads);
}

}  // namespace

std::optional<DefectReport> check_rmp(const StoreEvent& store, const MachineState& path, const RuleContext& ctx) {
    if (!store.value->user_input()) return std::nullopt;
    auto slot = symexec::infer_slot(store.address);
    if (!slot || !ctx.keywords->proxy_slots().count(*slot)) return std::nullopt;
    return make_report(DefectKind::RiskyMutableProxy, ctx, path, store.at,
                       "user-controlled value stored to " + store.address.to_string(), {}, {store.address});
}

std::optional<DefectReport> check_er(const features::ExternalInvocationFeature& invocation, const MachineState& path,
                                     const RuleContext& ctx) {
    if (invocation.selector != features::kOnErc721Received) return std::nullopt;
    const auto& call = invocation.call_event;
    auto guards = guard_prefix(path, call.cons_size);
    auto targets = symexec::extract_storage_addresses(*ctx.pool, guards);

    // the token's own ownership entry is written by the mint that performs the call
    auto owners = ctx.keywords->owner_slots();
    auto pf = features::collect(path);
    for (std::size_t i = 0; i < std::min(call.stores_before, path.stores.size()); ++i) {
        const auto& s = path.stores[i];
        if (features::is_ownership_store(s, owners) && in_role(Role::Mint, s, path, pf, *ctx.keywords))
            targets.erase(s.address);
    }

    for (const auto& t : targets)
        if (value_at(path, t, call.stores_before, *ctx.pool) != ctx.pool->storage_read(t.word)) return std::nullopt;

    std::string feature = "onERC721Received call before guard state is updated";
    if (!targets.empty()) {
        bool written_after = false;
        for (std::size_t i = call.stores_before; i < path.stores.size() && !written_after; ++i)
            written_after = targets.count(path.stores[i].address) > 0;
        if (!written_after) return std::nullopt;
        feature += "; guard state written after the call";
    }
    return make_report(DefectKind::ERC721Reentrancy, ctx, path, call.at, feature, guards, targets);
}

std::optional<DefectReport> check_um(const StoreEvent& ownership_store, const MachineState& path,
                                     const RuleContext& ctx) {
    auto guards = guard_prefix(path, ownership_store.cons_size);
    auto targets = symexec::extract_storage_addresses(*ctx.pool, guards);
    auto supply = ctx.keywords->supply_slots();
    for (const auto& t : targets)
        if (auto s = symexec::infer_slot(t); s && supply.count(*s)) return std::nullopt;
    return make_report(DefectKind::UnlimitedMinting, ctx, path, ownership_store.at,
                       "ownership store " + ownership_store.address.to_string() + " without a supply guard", guards,
                       targets);
}

std::vector<DefectReport> check_mr(const FunctionContext& context, const MachineState& path,
                                   const std::vector<RequirementSpec>& catalog, const RuleContext& ctx) {
    std::vector<DefectReport> out;
    auto& pool = *ctx.pool;
    auto pf = features::collect(path);
    auto owners = ctx.keywords->owner_slots();
    Expr caller = pool.symbol("caller", Origin::Caller, 160);
    Expr mask160 = pool.constant(low_mask(160));

    for (const auto& req : catalog) {
        if (!req.enabled) continue;
        if (req.id == "approve-caller-authorization") {
            if (features::validate_context(context, pf, *ctx.keywords) != Role::Approve) continue;
            const StoreEvent* critical = nullptr;
            for (const auto& s : path.stores)
                if (s.address.kind == Kind::MappingSlot && s.address.key->user_input()) {
                    critical = &s;
                    break;
                }
            if (!critical) continue;
            auto cons = full_prefix(path, critical->cons_size);

            std::vector<Expr> violated;
            for (const auto& b : owners) {
                bool mapping = false;
                for (const auto* info : ctx.slot_map->at_slot(b))
                    mapping = mapping || info->type_kind == ingest::TypeKind::Mapping;
                if (!mapping) continue;
                Expr word = pool.keccak({critical->address.key, pool.constant(b)}, 64);
                StorageAddress addr{Kind::MappingSlot, b, critical->address.key, word};
                Expr owner = pool.make(Op::And, mask160, value_at(path, addr, critical->store_index, pool));
                violated.push_back(pool.make(Op::IsZero, pool.make(Op::Eq, caller, owner)));
            }
            std::set<std::uint32_t> seen;
            std::vector<Expr> nodes;
            for (const auto& c : cons) collect_nodes(c.condition, seen, nodes, false);
            for (Expr n : nodes) {
                if (n->op == Op::StorageRead && n->args[0]->caller_derived() &&
                    symexec::classify_address(pool, n->args[0]).kind == Kind::Opaque)
                    violated.push_back(pool.make(Op::IsZero, pool.make(Op::And, pool.constant(0xff), n)));
                // solc also tests equality as ISZERO(SUB(a, b)) or ISZERO(XOR(a, b))
                if (n->op == Op::Eq || n->op == Op::Sub || n->op == Op::Xor) {
                    for (int i = 0; i < 2; ++i) {
                        Expr side = n->args[i];
                        Expr partner = n->args[1 - i];
                        if (side->caller_derived() && !partner->caller_derived())
                            violated.push_back(pool.make(
                                Op::IsZero, pool.make(Op::Eq, pool.make(Op::And, mask160, partner), caller)));
                    }
                }
            }
            if (violated.empty()) continue;
            Expr assertion = violated.front();
            for (std::size_t i = 1; i < violated.size(); ++i) assertion = pool.make(Op::And, assertion, violated[i]);
            if (cached_check(ctx, cons, assertion) == SatResult::Sat)
                out.push_back(make_report(DefectKind::MissingRequirements, ctx, path, critical->at,
                                          req.id + ": " + critical->address.to_string() +
                                              " reachable without owner or operator authorization",
                                          cons, {critical->address}));
        } else if (req.id == "mint-nonzero-recipient") {
            for (const auto& s : path.stores) {
                if (!features::is_ownership_store(s, owners) || !in_role(Role::Mint, s, path, pf, *ctx.keywords))
                    continue;
                auto cons = full_prefix(path, s.cons_size);
                Expr assertion = pool.make(Op::IsZero, pool.make(Op::And, mask160, s.value));
                if (cached_check(ctx, cons, assertion) == SatResult::Sat)
                    out.push_back(make_report(DefectKind::MissingRequirements, ctx, path, s.at,
                                              req.id + ": " + s.address.to_string() + " may receive the zero address",
                                              cons, {s.address}));
                break;
            }
        }
    }
    return out;
}

std::optional<DefectReport> check_pb(const features::DeleteFeature& deletion, const MachineState& path,
                                     const RuleContext& ctx) {
    if (deletion.store_index >= path.stores.size()) return std::nullopt;
    auto guards = guard_prefix(path, path.stores[deletion.store_index].cons_size);
    auto targets = symexec::extract_storage_addresses(*ctx.pool, guards);
    if (symexec::depends_on_caller(targets, guards)) return std::nullopt;
    return make_report(DefectKind::PublicBurn, ctx, path, path.stores[deletion.store_index].at,
                       "ownership entry " + deletion.address.to_string() + " erased without a caller check", guards,
                       targets);
}

namespace {

bool better(const DefectReport& a, const DefectReport& b) {
    if (a.witness_length != b.witness_length) return a.witness_length < b.witness_length;
    if (a.path_id != b.path_id) return a.path_id < b.path_id;
    return a.source_range.offset < b.source_range.offset;
}

}  // namespace

std::vector<DefectReport> aggregate(const std::vector<DefectReport>& reports) {
    std::map<std::pair<DefectKind, std::string>, DefectReport> best;
    for (const auto& r : reports) {
        auto key = std::make_pair(r.kind, r.function_name);
        auto it = best.find(key);
        if (it == best.end())
            best.emplace(key, r);
        else if (better(r, it->second))
            it->second = r;
    }
    std::vector<DefectReport> out;
    for (auto& [key, r] : best) out.push_back(std::move(r));
    return out;
}

RuleEngine::RuleEngine(const ingest::CompilationUnit& unit, const ingest::SlotMap& slot_map,
                       const ingest::KeywordIndex& keywords, symexec::ExprPool& pool, symexec::Solver& solver,
                       std::set<DefectKind> enabled)
    : unit_(unit), slot_map_(slot_map), keywords_(keywords), pool_(pool), solver_(solver),
      enabled_(std::move(enabled)) {}

void RuleEngine::add(DefectReport report) {
    auto key = std::make_pair(report.kind, report.function_name);
    auto it = best_.find(key);
    if (it == best_.end()) {
        best_.emplace(key, reports_.size());
        reports_.push_back(std::move(report));
    } else if (better(report, reports_[it->second])) {
        reports_[it->second] = std::move(report);
    }
}

void RuleEngine::on_path_end(const MachineState& state, symexec::PathEnd end) {
    using symexec::PathEnd;
    // reverted or malformed executions leave no state behind
    if (end == PathEnd::Revert || end == PathEnd::Invalid || end == PathEnd::Infeasible ||
        end == PathEnd::StackError || end == PathEnd::BadJump)
        return;
    RuleContext ctx{&unit_, &keywords_, &slot_map_, &pool_, &solver_, &query_cache_};
    auto pf = features::collect(state);
    auto owners = keywords_.owner_slots();

    if (on(DefectKind::RiskyMutableProxy))
        for (const auto& s : state.stores)
            if (auto r = check_rmp(s, state, ctx)) add(std::move(*r));

    if (on(DefectKind::ERC721Reentrancy))
        for (const auto& inv : pf.invocations)
            if (auto r = check_er(inv, state, ctx)) add(std::move(*r));

    if (on(DefectKind::UnlimitedMinting))
        for (const auto& s : state.stores)
            if (features::is_ownership_store(s, owners) && in_role(Role::Mint, s, state, pf, keywords_))
                if (auto r = check_um(s, state, ctx)) add(std::move(*r));

    if (on(DefectKind::MissingRequirements))
        for (auto& r : check_mr(state.entry, state, default_catalog(), ctx)) add(std::move(r));

    if (on(DefectKind::PublicBurn))
        for (const auto& d : pf.deletes) {
            if (d.address.kind != Kind::MappingSlot || !owners.count(d.address.base)) continue;
            const auto& store = state.stores[d.store_index];
            if (!in_role(Role::Burn, store, state, pf, keywords_)) continue;
            if (auto r = check_pb(d, state, ctx)) add(std::move(*r));
        }
}

}  // namespace nftguard::defects
