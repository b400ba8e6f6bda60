#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nftguard/word.hpp"

namespace nftguard::ingest {

using Json = nlohmann::json;

inline constexpr const char* kDefaultCompilerVersion = "0.8.16";

enum class JumpKind { IntoFunction, OutOfFunction, Regular };

struct SourceMapEntry {
    std::int64_t offset = 0;
    std::int64_t length = 0;
    int file_index = -1;
    JumpKind jump = JumpKind::Regular;
    int modifier_depth = 0;

    bool generated() const { return file_index < 0; }
    bool operator==(const SourceMapEntry&) const = default;
};

std::vector<SourceMapEntry> decode_source_map(std::string_view raw, std::size_t instruction_count);

struct FunctionRange {
    std::string name;
    std::optional<std::uint32_t> selector;
    std::size_t offset = 0;
    std::size_t length = 0;
    int file_index = 0;
    std::string contract;
    std::string kind;  // function, constructor, fallback, receive, modifier
};

struct FunctionContext {
    std::string name;
    std::optional<std::uint32_t> selector;
    std::size_t offset = 0;
    std::size_t length = 0;

    bool operator==(const FunctionContext&) const = default;
};

struct CompilationUnit {
    std::string contract_name;
    std::string compiler_version;
    std::string source_path;
    Bytes runtime_bytecode;
    std::vector<SourceMapEntry> source_map;
    Json ast;  // SourceUnit of the analysed file
    std::string source_text;
    int source_file_index = 0;
    std::vector<FunctionRange> function_ranges;
    std::map<std::string, std::uint32_t> method_identifiers;  // signature -> selector
    Json storage_layout;                                      // kept for differential checks only

    std::size_t line_of(std::size_t offset) const;
};

struct CompileOptions {
    std::string solc_path;
    std::string compiler_version = kDefaultCompilerVersion;
    std::optional<std::string> contract_filter;
};

std::vector<CompilationUnit> compile(const std::string& source_path, const CompileOptions& options);
// same as compile but from an in-memory source, named `virtual_path` for the compiler
std::vector<CompilationUnit> compile_source(const std::string& source_text, const std::string& virtual_path,
                                            const CompileOptions& options);
std::string compiler_version(const std::string& solc_path);

enum class TypeKind { Value, Mapping, DynamicArray, StaticArray, Struct };

std::string_view type_kind_name(TypeKind k);

struct SlotInfo {
    std::string name;
    std::string contract;
    Word slot_id = 0;
    unsigned byte_offset = 0;
    TypeKind type_kind = TypeKind::Value;
    std::string declared_type;
    Word default_value = 0;
};

struct SlotMap {
    std::vector<SlotInfo> entries;  // declaration order, bases first

    const SlotInfo* find(std::string_view name) const;
    std::vector<const SlotInfo*> at_slot(const Word& slot) const;
};

SlotMap derive_slot_map(const Json& source_unit_ast, std::string_view contract_name);

struct KeywordConfig {
    std::vector<std::string> proxy{"proxy"};
    std::vector<std::string> owner{"owner", "_owners", "ownership"};
    std::vector<std::string> supply{"supply", "max", "limit", "total"};
    std::vector<std::string> mint{"mint", "reserve", "airdrop"};
    std::vector<std::string> burn{"burn"};
};

struct KeywordIndex {
    std::map<std::string, std::set<Word>> sets;
    KeywordConfig keyword_config;

    const std::set<Word>& slots(const std::string& keyword) const;
    std::set<Word> any_of(const std::vector<std::string>& keywords) const;
    std::set<Word> proxy_slots() const { return any_of(keyword_config.proxy); }
    std::set<Word> owner_slots() const { return any_of(keyword_config.owner); }
    std::set<Word> supply_slots() const { return any_of(keyword_config.supply); }
};

KeywordIndex index_keywords(const SlotMap& slot_map, const std::vector<std::string>& keywords);
KeywordIndex index_keywords(const SlotMap& slot_map, const KeywordConfig& config);
bool name_matches(std::string_view name, const std::vector<std::string>& keywords);

std::optional<FunctionContext> function_at(const CompilationUnit& unit, std::size_t instruction_index);

}  // namespace nftguard::ingest
