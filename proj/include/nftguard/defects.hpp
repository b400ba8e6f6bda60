#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nftguard/features.hpp"
#include "nftguard/ingest.hpp"
#include "nftguard/symexec.hpp"

namespace nftguard::defects {

using symexec::FunctionContext;
using symexec::MachineState;

enum class DefectKind { RiskyMutableProxy, ERC721Reentrancy, UnlimitedMinting, MissingRequirements, PublicBurn };

inline constexpr DefectKind kAllKinds[] = {DefectKind::RiskyMutableProxy, DefectKind::ERC721Reentrancy,
                                           DefectKind::UnlimitedMinting, DefectKind::MissingRequirements,
                                           DefectKind::PublicBurn};

std::string_view kind_name(DefectKind k);
std::optional<DefectKind> parse_kind(std::string_view text);  // full name or RMP/ER/UM/MR/PB
std::string rule_version(DefectKind k);

struct SourceRange {
    std::string file;
    std::int64_t offset = 0;
    std::int64_t length = 0;
    std::size_t line = 0;
};

struct Evidence {
    std::string feature;
    std::vector<std::string> constraints;
    std::vector<std::string> slots;
};

struct DefectReport {
    DefectKind kind = DefectKind::RiskyMutableProxy;
    std::string contract_name;
    std::string function_name;
    SourceRange source_range;
    Evidence evidence;
    std::string rule_version;
    std::size_t path_id = 0;
    std::size_t witness_length = 0;  // blocks on the witnessing path
};

struct RequirementSpec {
    features::Role role = features::Role::Other;
    std::string id;
    std::string description;
    bool enabled = true;
};

const std::vector<RequirementSpec>& default_catalog();

// inputs shared by the rule checks for one path of one contract
struct RuleContext {
    const ingest::CompilationUnit* unit = nullptr;
    const ingest::KeywordIndex* keywords = nullptr;
    const ingest::SlotMap* slot_map = nullptr;
    symexec::ExprPool* pool = nullptr;
    symexec::Solver* solver = nullptr;
    std::map<std::string, symexec::SatResult>* query_cache = nullptr;
};

std::optional<DefectReport> check_rmp(const symexec::StoreEvent& store, const MachineState& path, const RuleContext& ctx);
std::optional<DefectReport> check_er(const features::ExternalInvocationFeature& invocation, const MachineState& path,
                                     const RuleContext& ctx);
std::optional<DefectReport> check_um(const symexec::StoreEvent& ownership_store, const MachineState& path,
                                     const RuleContext& ctx);
std::vector<DefectReport> check_mr(const FunctionContext& context, const MachineState& path,
                                   const std::vector<RequirementSpec>& catalog, const RuleContext& ctx);
std::optional<DefectReport> check_pb(const features::DeleteFeature& deletion, const MachineState& path,
                                     const RuleContext& ctx);

// one entry per (kind, function), shortest witness first, ties broken by path id then location
std::vector<DefectReport> aggregate(const std::vector<DefectReport>& reports);

// evaluates every enabled rule on each finished path
class RuleEngine : public symexec::PathObserver {
public:
    RuleEngine(const ingest::CompilationUnit& unit, const ingest::SlotMap& slot_map,
               const ingest::KeywordIndex& keywords, symexec::ExprPool& pool, symexec::Solver& solver,
               std::set<DefectKind> enabled = {});

    void on_path_end(const MachineState& state, symexec::PathEnd end) override;
    const std::vector<DefectReport>& reports() const { return reports_; }

private:
    const ingest::CompilationUnit& unit_;
    const ingest::SlotMap& slot_map_;
    const ingest::KeywordIndex& keywords_;
    symexec::ExprPool& pool_;
    symexec::Solver& solver_;
    std::set<DefectKind> enabled_;
    std::map<std::string, symexec::SatResult> query_cache_;
    std::vector<DefectReport> reports_;
    std::map<std::pair<DefectKind, std::string>, std::size_t> best_;  // index into reports_

    bool on(DefectKind k) const { return enabled_.empty() || enabled_.count(k); }
    void add(DefectReport report);
};

}  // namespace nftguard::defects
