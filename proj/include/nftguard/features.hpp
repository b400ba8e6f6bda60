#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "nftguard/ingest.hpp"
#include "nftguard/symexec.hpp"

namespace nftguard::features {

using symexec::CallEvent;
using symexec::Expr;
using symexec::FunctionContext;
using symexec::LoadEvent;
using symexec::StorageAddress;
using symexec::StoreEvent;

inline constexpr std::uint32_t kOnErc721Received = 0x150b7a02;
inline constexpr std::uint32_t kApprove = 0x095ea7b3;
inline constexpr std::uint32_t kTransferFrom = 0x23b872dd;
inline constexpr std::uint32_t kSafeTransferFrom = 0x42842e0e;
inline constexpr std::uint32_t kSafeTransferFromData = 0xb88d4fde;

struct MappingStoreFeature {
    StorageAddress address;
    Expr stored_value = nullptr;
    Word base_slot = 0;
    Expr key = nullptr;
    std::size_t pc = 0;
    std::optional<FunctionContext> context;
    std::size_t path_id = 0;
    std::size_t store_index = 0;
};

struct DeleteFeature {
    StorageAddress address;
    Expr erased_previous = nullptr;
    Word cleared_mask = 0;  // bits of the slot reset to zero
    std::size_t pc = 0;
    std::optional<FunctionContext> context;
    std::size_t path_id = 0;
    std::size_t store_index = 0;
};

struct ExternalInvocationFeature {
    CallEvent call_event;
    std::uint32_t selector = 0;
    bool shifted_selector_observed = false;
    std::size_t pc = 0;
    std::optional<FunctionContext> context;
    std::size_t path_id = 0;
};

enum class Role { Mint, Burn, Approve, Transfer, Other };

std::string_view role_name(Role r);

std::optional<MappingStoreFeature> match_mapping_store(const StoreEvent& store, std::size_t path_id = 0);
// `loads` are the path's storage reads, used to tell an erased plain slot from a first write
std::optional<DeleteFeature> match_delete(const StoreEvent& store, const std::vector<LoadEvent>& loads = {},
                                          std::size_t path_id = 0);
std::optional<ExternalInvocationFeature> match_external_invocation(const CallEvent& call, std::size_t path_id = 0);

// a mapping store writing a token owner: I_owner base, stored value neither zero nor an erasure
bool is_ownership_store(const StoreEvent& store, const std::set<Word>& owner_slots);

struct PathFeatures {
    std::vector<MappingStoreFeature> mapping_stores;
    std::vector<DeleteFeature> deletes;
    std::vector<ExternalInvocationFeature> invocations;
};

PathFeatures collect(const symexec::MachineState& state);

Role validate_context(const FunctionContext& context, const PathFeatures& features,
                      const ingest::KeywordIndex& keyword_index);

}  // namespace nftguard::features
