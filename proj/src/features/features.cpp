#include "nftguard/features.hpp"

namespace nftguard::features {

using symexec::Op;
using Kind = StorageAddress::Kind;

std::string_view role_name(Role r) {
    switch (r) {
        case Role::Mint: return "mint";
        case Role::Burn: return "burn";
        case Role::Approve: return "approve";
        case Role::Transfer: return "transfer";
        case Role::Other: return "other";
    }
    return "?";
}

std::optional<MappingStoreFeature> match_mapping_store(const StoreEvent& store, std::size_t path_id) {
    if (store.address.kind != Kind::MappingSlot) return std::nullopt;
    MappingStoreFeature f;
    f.address = store.address;
    f.stored_value = store.value;
    f.base_slot = store.address.base;
    f.key = store.address.key;
    f.pc = store.at.pc;
    f.context = store.at.context;
    f.path_id = path_id;
    f.store_index = store.store_index;
    return f;
}

namespace {

// mask of bits a store resets to zero while keeping the rest of the previous value
std::optional<Word> cleared_bits(const StoreEvent& store) {
    Expr v = store.value;
    if (v->is_const()) return v->value.is_zero() ? std::optional<Word>(~Word(0)) : std::nullopt;
    if (v->op != Op::And || v->args.size() != 2) return std::nullopt;
    for (int i = 0; i < 2; ++i) {
        Expr mask = v->args[i];
        Expr rest = v->args[1 - i];
        if (mask->is_const() && rest == store.previous && mask->value != ~Word(0)) return ~mask->value;
    }
    return std::nullopt;
}

}  // namespace

std::optional<DeleteFeature> match_delete(const StoreEvent& store, const std::vector<LoadEvent>& loads,
                                          std::size_t path_id) {
    auto cleared = cleared_bits(store);
    if (!cleared) return std::nullopt;
    const auto& addr = store.address;
    bool erasable = addr.kind == Kind::MappingSlot || addr.kind == Kind::ArrayElem;
    if (addr.kind == Kind::ConcreteSlot)
        for (const auto& l : loads)
            if (l.address == addr) erasable = true;
    if (!erasable) return std::nullopt;
    DeleteFeature f;
    f.address = addr;
    f.erased_previous = store.previous;
    f.cleared_mask = *cleared;
    f.pc = store.at.pc;
    f.context = store.at.context;
    f.path_id = path_id;
    f.store_index = store.store_index;
    return f;
}

std::optional<ExternalInvocationFeature> match_external_invocation(const CallEvent& call, std::size_t path_id) {
    if (!call.resolved_selector) return std::nullopt;
    ExternalInvocationFeature f;
    f.call_event = call;
    f.selector = *call.resolved_selector;
    f.shifted_selector_observed = call.shifted_selector;
    f.pc = call.at.pc;
    f.context = call.at.context;
    f.path_id = path_id;
    return f;
}

bool is_ownership_store(const StoreEvent& store, const std::set<Word>& owner_slots) {
    if (store.address.kind != Kind::MappingSlot || !owner_slots.count(store.address.base)) return false;
    if (store.value->is_const() && store.value->value.is_zero()) return false;
    return !cleared_bits(store);
}

PathFeatures collect(const symexec::MachineState& state) {
    PathFeatures out;
    for (const auto& s : state.stores) {
        if (auto f = match_mapping_store(s, state.path_id)) out.mapping_stores.push_back(std::move(*f));
        if (auto f = match_delete(s, state.loads, state.path_id)) out.deletes.push_back(std::move(*f));
    }
    for (const auto& c : state.calls)
        if (auto f = match_external_invocation(c, state.path_id)) out.invocations.push_back(std::move(*f));
    return out;
}

Role validate_context(const FunctionContext& context, const PathFeatures& features,
                      const ingest::KeywordIndex& keyword_index) {
    const auto& words = keyword_index.keyword_config;
    auto owners = keyword_index.owner_slots();
    if (ingest::name_matches(context.name, words.mint)) {
        for (const auto& m : features.mapping_stores) {
            if (!owners.count(m.base_slot)) continue;
            if (m.stored_value->is_const() && m.stored_value->value.is_zero()) continue;
            bool erasure = false;
            for (const auto& d : features.deletes) erasure = erasure || d.store_index == m.store_index;
            if (!erasure) return Role::Mint;
        }
    }
    if (ingest::name_matches(context.name, words.burn))
        for (const auto& d : features.deletes)
            if (d.address.kind == Kind::MappingSlot && owners.count(d.address.base)) return Role::Burn;
    if (context.selector == kApprove || context.name == "approve") return Role::Approve;
    if (context.selector == kTransferFrom || context.selector == kSafeTransferFrom ||
        context.selector == kSafeTransferFromData || context.name == "transferFrom" ||
        context.name == "safeTransferFrom")
        return Role::Transfer;
    return Role::Other;
}

}  // namespace nftguard::features
