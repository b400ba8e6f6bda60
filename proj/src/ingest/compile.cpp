#include <fstream>
#include <iterator>
#include <mutex>

#include "nftguard/disasm.hpp"
#include "nftguard/errors.hpp"
#include "nftguard/ingest.hpp"
#include "nftguard/process.hpp"

namespace nftguard::ingest {

namespace {

struct SrcRange {
    std::size_t offset = 0;
    std::size_t length = 0;
    int file = -1;
};

SrcRange parse_src(const std::string& src) {
    SrcRange r;
    auto a = src.find(':');
    auto b = src.find(':', a + 1);
    if (a == std::string::npos || b == std::string::npos) return r;
    r.offset = std::stoull(src.substr(0, a));
    r.length = std::stoull(src.substr(a + 1, b - a - 1));
    r.file = std::stoi(src.substr(b + 1));
    return r;
}

void collect_ranges(const Json& node, const std::string& contract, std::vector<FunctionRange>& out) {
    if (node.is_array()) {
        for (const auto& child : node) collect_ranges(child, contract, out);
        return;
    }
    if (!node.is_object()) return;
    std::string owner = contract;
    auto type = node.value("nodeType", "");
    if (type == "ContractDefinition") owner = node.value("name", "");
    if (type == "FunctionDefinition" || type == "ModifierDefinition") {
        auto range = parse_src(node.value("src", ""));
        FunctionRange f;
        f.name = node.value("name", "");
        f.kind = type == "ModifierDefinition" ? "modifier" : node.value("kind", "function");
        if (f.name.empty()) f.name = f.kind;
        f.offset = range.offset;
        f.length = range.length;
        f.file_index = range.file;
        f.contract = owner;
        if (node.contains("functionSelector"))
            f.selector = static_cast<std::uint32_t>(std::stoul(node["functionSelector"].get<std::string>(), nullptr, 16));
        out.push_back(std::move(f));
    }
    for (auto it = node.begin(); it != node.end(); ++it)
        if (it->is_structured()) collect_ranges(*it, owner, out);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string locate_solc(const std::string& configured) {
    auto exe = resolve_executable(configured.empty() ? std::string("solc") : configured);
    if (exe.empty()) throw CompilerNotFound("solidity compiler not found: " + (configured.empty() ? "solc" : configured));
    return exe;
}

}  // namespace

std::size_t CompilationUnit::line_of(std::size_t offset) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < source_text.size(); ++i)
        if (source_text[i] == '\n') ++line;
    return line;
}

std::string compiler_version(const std::string& solc_path) {
    static std::mutex mu;
    static std::map<std::string, std::string> cache;
    auto exe = locate_solc(solc_path);
    std::lock_guard lock(mu);
    if (auto it = cache.find(exe); it != cache.end()) return it->second;
    auto res = run_process(exe, {"--version"}, "");
    auto pos = res.out.find("Version: ");
    if (res.exit_code != 0 || pos == std::string::npos) throw CompilerNotFound("cannot query version of " + exe);
    auto start = pos + 9;
    auto end = res.out.find_first_of(" \r\n", start);
    auto version = res.out.substr(start, end - start);
    cache[exe] = version;
    return version;
}

std::vector<CompilationUnit> compile(const std::string& source_path, const CompileOptions& options) {
    return compile_source(read_file(source_path), source_path, options);
}

std::vector<CompilationUnit> compile_source(const std::string& source_text, const std::string& virtual_path,
                                            const CompileOptions& options) {
    auto exe = locate_solc(options.solc_path);
    auto version = compiler_version(exe);
    if (version.rfind(options.compiler_version, 0) != 0 ||
        (version.size() > options.compiler_version.size() && version[options.compiler_version.size()] != '+'))
        throw VersionMismatch("compiler at " + exe + " is " + version + ", requested " + options.compiler_version);

    Json input = {
        {"language", "Solidity"},
        {"sources", {{virtual_path, {{"content", source_text}}}}},
        {"settings",
         {{"optimizer", {{"enabled", false}}},
          {"outputSelection",
           {{"*",
             {{"*",
               {"evm.deployedBytecode.object", "evm.deployedBytecode.sourceMap", "storageLayout",
                "evm.methodIdentifiers"}},
              {"", {"ast"}}}}}}}}};
    auto res = run_process(exe, {"--standard-json"}, input.dump());
    Json output;
    try {
        output = Json::parse(res.out);
    } catch (const std::exception&) {
        throw CompilationFailed("compiler produced no JSON output", {res.err});
    }

    std::vector<std::string> diagnostics;
    bool version_problem = false;
    for (const auto& e : output.value("errors", Json::array())) {
        if (e.value("severity", "") != "error") continue;
        auto msg = e.value("formattedMessage", e.value("message", ""));
        if (msg.find("requires different compiler version") != std::string::npos) version_problem = true;
        diagnostics.push_back(msg);
    }
    if (version_problem) throw VersionMismatch(diagnostics.front());
    if (!diagnostics.empty()) throw CompilationFailed("compilation failed", diagnostics);

    const auto& source_entry = output["sources"][virtual_path];
    const Json& ast = source_entry["ast"];
    int file_index = source_entry.value("id", 0);

    std::vector<FunctionRange> ranges;
    collect_ranges(ast, "", ranges);

    std::vector<CompilationUnit> units;
    bool filter_hit = false;
    for (const auto& node : ast["nodes"]) {
        if (node.value("nodeType", "") != "ContractDefinition") continue;
        if (node.value("contractKind", "") != "contract" || node.value("abstract", false)) continue;
        auto name = node.value("name", "");
        if (options.contract_filter && *options.contract_filter != name) continue;
        filter_hit = true;
        const auto& c = output["contracts"][virtual_path][name];
        CompilationUnit unit;
        unit.contract_name = name;
        unit.compiler_version = version;
        unit.source_path = virtual_path;
        unit.runtime_bytecode = bytes_from_hex(c["evm"]["deployedBytecode"]["object"].get<std::string>());
        unit.ast = ast;
        unit.source_text = source_text;
        unit.source_file_index = file_index;
        unit.function_ranges = ranges;
        unit.storage_layout = c.value("storageLayout", Json::object());
        for (auto& [sig, sel] : c["evm"]["methodIdentifiers"].items())
            unit.method_identifiers[sig] = static_cast<std::uint32_t>(std::stoul(sel.get<std::string>(), nullptr, 16));

        // the source map stops at the metadata trailer; trailer instructions count as generated
        auto code_len = disasm::code_length_without_metadata(unit.runtime_bytecode);
        auto instructions = disasm::disassemble(unit.runtime_bytecode);
        std::size_t code_count = 0;
        while (code_count < instructions.size() && instructions[code_count].pc < code_len) ++code_count;
        // the INVALID separator in front of the metadata section carries no mapping entry
        if (code_len < unit.runtime_bytecode.size() && code_count > 0 &&
            instructions[code_count - 1].opcode == disasm::op::INVALID && instructions[code_count - 1].pc + 1 == code_len)
            --code_count;
        // every separator in the compiler's map opens an entry, including a final one
        unit.source_map = decode_source_map(c["evm"]["deployedBytecode"]["sourceMap"].get<std::string>() + ";",
                                            code_count);
        unit.source_map.resize(instructions.size(), SourceMapEntry{});
        units.push_back(std::move(unit));
    }
    if (options.contract_filter && !filter_hit)
        throw Error("no deployable contract named " + *options.contract_filter + " in " + virtual_path);
    return units;
}

namespace {

const FunctionRange* innermost(const CompilationUnit& unit, const SourceMapEntry& e, bool modifiers) {
    auto begin = static_cast<std::size_t>(e.offset);
    auto end = begin + static_cast<std::size_t>(e.length);
    const FunctionRange* best = nullptr;
    for (const auto& f : unit.function_ranges) {
        if ((f.kind == "modifier") != modifiers || f.file_index != e.file_index) continue;
        if (f.offset <= begin && end <= f.offset + f.length)
            if (!best || f.length < best->length) best = &f;
    }
    return best;
}

bool user_code(const CompilationUnit& unit, const SourceMapEntry& e) {
    return e.file_index == unit.source_file_index && e.offset >= 0;
}

}  // namespace

std::optional<FunctionContext> function_at(const CompilationUnit& unit, std::size_t instruction_index) {
    if (instruction_index >= unit.source_map.size()) return std::nullopt;
    const auto& e = unit.source_map[instruction_index];
    if (!user_code(unit, e)) return std::nullopt;
    const FunctionRange* best = innermost(unit, e, false);
    if (!best && innermost(unit, e, true)) {
        // modifier bodies are inlined after the code of the function that invokes them
        for (std::size_t i = instruction_index; i-- > 0 && !best;) {
            const auto& prev = unit.source_map[i];
            if (!user_code(unit, prev)) continue;
            best = innermost(unit, prev, false);
            if (!best && !innermost(unit, prev, true)) break;
        }
    }
    if (!best) return std::nullopt;
    return FunctionContext{best->name, best->selector, best->offset, best->length};
}

}  // namespace nftguard::ingest
