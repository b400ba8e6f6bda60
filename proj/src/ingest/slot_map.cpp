#include <algorithm>
#include <cctype>
#include <unordered_map>

#include "nftguard/errors.hpp"
#include "nftguard/ingest.hpp"

namespace nftguard::ingest {

namespace {

struct Layout {
    TypeKind kind = TypeKind::Value;
    unsigned bytes = 32;  // value types: packed width; others: 32 * slots
    Word slots = 1;
};

class LayoutEngine {
public:
    explicit LayoutEngine(const Json& root) { index(root); }

    const Json* node(std::int64_t id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : it->second;
    }

    Layout layout_of(const Json& type_name) const {
        auto node_type = type_name.value("nodeType", "");
        if (node_type == "ElementaryTypeName") return elementary(type_name.value("name", ""));
        if (node_type == "Mapping") return {TypeKind::Mapping, 32, 1};
        if (node_type == "FunctionTypeName") {
            bool external = type_name.value("visibility", "") == "external";
            return {TypeKind::Value, external ? 24u : 8u, 1};
        }
        if (node_type == "ArrayTypeName") {
            if (!type_name.contains("length") || type_name["length"].is_null()) return {TypeKind::DynamicArray, 32, 1};
            auto length = array_length(type_name);
            auto elem = layout_of(type_name["baseType"]);
            Word slots;
            if (elem.kind == TypeKind::Value) {
                unsigned per_slot = 32 / elem.bytes;
                slots = (length + per_slot - 1) / per_slot;
            } else {
                slots = length * elem.slots;
            }
            return {TypeKind::StaticArray, 32, slots};
        }
        if (node_type == "UserDefinedTypeName") {
            auto ref = type_name.contains("referencedDeclaration") ? type_name["referencedDeclaration"].get<std::int64_t>()
                                                                   : -1;
            const Json* decl = node(ref);
            if (!decl) throw UnsupportedType("unresolved user-defined type " + type_string(type_name));
            auto decl_type = decl->value("nodeType", "");
            if (decl_type == "ContractDefinition") return {TypeKind::Value, 20, 1};
            if (decl_type == "EnumDefinition") {
                auto members = (*decl)["members"].size();
                unsigned bytes = 1;
                while (members > (std::size_t(1) << (8 * bytes))) ++bytes;
                return {TypeKind::Value, bytes, 1};
            }
            if (decl_type == "UserDefinedValueTypeDefinition") return layout_of((*decl)["underlyingType"]);
            if (decl_type == "StructDefinition") {
                Word slot = 0;
                unsigned offset = 0;
                for (const auto& member : (*decl)["members"]) place(layout_of(member["typeName"]), slot, offset);
                if (offset > 0) slot += 1;
                return {TypeKind::Struct, 32, slot == 0 ? Word(1) : slot};
            }
            throw UnsupportedType("unsupported user-defined type " + decl_type);
        }
        throw UnsupportedType("unsupported storage type node " + node_type);
    }

    // assigns storage for one item, advancing the cursor; returns (slot, offset)
    static std::pair<Word, unsigned> place(const Layout& l, Word& slot, unsigned& offset) {
        if (l.kind == TypeKind::Value) {
            if (offset + l.bytes > 32) {
                slot += 1;
                offset = 0;
            }
            auto at = std::make_pair(slot, offset);
            offset += l.bytes;
            return at;
        }
        if (offset > 0) {
            slot += 1;
            offset = 0;
        }
        auto at = std::make_pair(slot, 0u);
        slot += l.slots;
        return at;
    }

    static std::string type_string(const Json& type_name) {
        if (type_name.contains("typeDescriptions"))
            return type_name["typeDescriptions"].value("typeString", "");
        return type_name.value("name", "");
    }

private:
    std::unordered_map<std::int64_t, const Json*> by_id_;

    void index(const Json& n) {
        if (n.is_object()) {
            if (n.contains("id") && n["id"].is_number_integer() && n.contains("nodeType")) by_id_[n["id"].get<std::int64_t>()] = &n;
            for (const auto& [k, v] : n.items())
                if (v.is_structured()) index(v);
        } else if (n.is_array()) {
            for (const auto& v : n) index(v);
        }
    }

    static Layout elementary(const std::string& name) {
        if (name == "bool") return {TypeKind::Value, 1, 1};
        if (name == "address" || name == "address payable") return {TypeKind::Value, 20, 1};
        if (name == "string" || name == "bytes") return {TypeKind::DynamicArray, 32, 1};
        auto width = [&](std::size_t prefix) -> unsigned {
            auto digits = name.substr(prefix);
            if (digits.empty()) return 256;
            if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }))
                throw UnsupportedType("unsupported elementary type " + name);
            return static_cast<unsigned>(std::stoul(digits));
        };
        if (name.rfind("uint", 0) == 0) return {TypeKind::Value, width(4) / 8, 1};
        if (name.rfind("int", 0) == 0) return {TypeKind::Value, width(3) / 8, 1};
        if (name.rfind("bytes", 0) == 0) return {TypeKind::Value, width(5), 1};
        throw UnsupportedType("unsupported elementary type " + name);
    }

    static Word array_length(const Json& type_name) {
        auto ts = type_string(type_name);
        auto close = ts.rfind(']');
        auto open = ts.rfind('[', close);
        if (close == std::string::npos || open == std::string::npos || close == open + 1)
            throw UnsupportedType("cannot determine array length of " + ts);
        auto digits = ts.substr(open + 1, close - open - 1);
        if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }))
            throw UnsupportedType("cannot determine array length of " + ts);
        return Word(digits);
    }
};

}  // namespace

std::string_view type_kind_name(TypeKind k) {
    switch (k) {
        case TypeKind::Value: return "value";
        case TypeKind::Mapping: return "mapping";
        case TypeKind::DynamicArray: return "dynamic-array";
        case TypeKind::StaticArray: return "static-array";
        case TypeKind::Struct: return "struct";
    }
    return "?";
}

const SlotInfo* SlotMap::find(std::string_view name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::vector<const SlotInfo*> SlotMap::at_slot(const Word& slot) const {
    std::vector<const SlotInfo*> out;
    for (const auto& e : entries)
        if (e.slot_id == slot) out.push_back(&e);
    return out;
}

SlotMap derive_slot_map(const Json& source_unit_ast, std::string_view contract_name) {
    LayoutEngine engine(source_unit_ast);
    const Json* contract = nullptr;
    for (const auto& n : source_unit_ast["nodes"])
        if (n.value("nodeType", "") == "ContractDefinition" && n.value("name", "") == contract_name) contract = &n;
    if (!contract) throw UnsupportedType("contract " + std::string(contract_name) + " not present in AST");
    if (!contract->contains("linearizedBaseContracts"))
        throw UnsupportedType("AST lacks linearized base contracts for " + std::string(contract_name));

    std::vector<std::int64_t> order = (*contract)["linearizedBaseContracts"].get<std::vector<std::int64_t>>();
    std::reverse(order.begin(), order.end());

    SlotMap map;
    Word slot = 0;
    unsigned offset = 0;
    for (auto id : order) {
        const Json* base = engine.node(id);
        if (!base) throw UnsupportedType("base contract " + std::to_string(id) + " not present in AST");
        for (const auto& member : (*base)["nodes"]) {
            if (member.value("nodeType", "") != "VariableDeclaration") continue;
            if (member.value("constant", false)) continue;
            auto mutability = member.value("mutability", "mutable");
            if (mutability == "constant" || mutability == "immutable") continue;
            auto layout = engine.layout_of(member["typeName"]);
            auto [at_slot, at_offset] = LayoutEngine::place(layout, slot, offset);
            SlotInfo info;
            info.name = member.value("name", "");
            info.contract = base->value("name", "");
            info.slot_id = at_slot;
            info.byte_offset = at_offset;
            info.type_kind = layout.kind;
            info.declared_type = LayoutEngine::type_string(member["typeName"]);
            map.entries.push_back(std::move(info));
        }
    }
    return map;
}

bool name_matches(std::string_view name, const std::vector<std::string>& keywords) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const auto& k : keywords) {
        std::string key = k;
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
        if (!key.empty() && lower.find(key) != std::string::npos) return true;
    }
    return false;
}

const std::set<Word>& KeywordIndex::slots(const std::string& keyword) const {
    static const std::set<Word> empty;
    auto it = sets.find(keyword);
    return it == sets.end() ? empty : it->second;
}

std::set<Word> KeywordIndex::any_of(const std::vector<std::string>& keywords) const {
    std::set<Word> out;
    for (const auto& k : keywords) {
        const auto& s = slots(k);
        out.insert(s.begin(), s.end());
    }
    return out;
}

KeywordIndex index_keywords(const SlotMap& slot_map, const std::vector<std::string>& keywords) {
    KeywordIndex index;
    for (const auto& k : keywords) {
        auto& set = index.sets[k];
        for (const auto& e : slot_map.entries)
            if (name_matches(e.name, {k})) set.insert(e.slot_id);
    }
    return index;
}

KeywordIndex index_keywords(const SlotMap& slot_map, const KeywordConfig& config) {
    std::vector<std::string> all;
    for (const auto* list : {&config.proxy, &config.owner, &config.supply})
        all.insert(all.end(), list->begin(), list->end());
    auto index = index_keywords(slot_map, all);
    index.keyword_config = config;
    return index;
}

}  // namespace nftguard::ingest
