#include "nftguard/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "nftguard/errors.hpp"
#include "nftguard/process.hpp"

namespace nftguard::cli {

namespace fs = std::filesystem;
using defects::DefectKind;
using Json = nlohmann::ordered_json;

std::string_view status_name(Status s) {
    switch (s) {
        case Status::Clean: return "clean";
        case Status::Defective: return "defective";
        case Status::Partial: return "partial";
        case Status::Error: return "error";
    }
    return "?";
}

std::set<DefectKind> ContractVerdict::kinds() const {
    std::set<DefectKind> out;
    for (const auto& r : reports) out.insert(r.kind);
    return out;
}

void resolve_tools(AnalysisConfig& config) {
    auto pick = [](std::string& path, const char* env, const char* fallback) {
        if (path.empty())
            if (const char* v = std::getenv(env); v && *v) path = v;
        if (path.empty()) path = fallback;
    };
    pick(config.solc_path, "NFTG_SOLC", "solc");
    pick(config.smt_path, "NFTG_SMT", "z3");
}

namespace {

ContractVerdict analyze_unit(const ingest::CompilationUnit& unit, const AnalysisConfig& config,
                             symexec::Solver& solver, const std::string& display) {
    ContractVerdict v;
    v.file = display;
    v.contract = unit.contract_name;
    auto started = std::chrono::steady_clock::now();
    try {
        auto slot_map = ingest::derive_slot_map(unit.ast, unit.contract_name);
        auto keywords = ingest::index_keywords(slot_map, config.keywords);
        symexec::ExprPool pool;
        std::set<DefectKind> enabled;
        for (const auto& k : config.only_kinds)
            if (auto kind = defects::parse_kind(k)) enabled.insert(*kind);
        defects::RuleEngine rules(unit, slot_map, keywords, pool, solver, enabled);
        auto outcome = symexec::run(unit, slot_map, keywords, config, solver, pool, &rules);
        v.reports = defects::aggregate(rules.reports());
        v.stats.paths = outcome.stats.paths;
        v.stats.blocks_covered = outcome.stats.blocks_covered;
        v.stats.blocks_total = outcome.stats.blocks_total;
        v.stats.solver_calls = outcome.stats.solver_calls;
        if (outcome.partial)
            v.status = Status::Partial;
        else
            v.status = v.reports.empty() ? Status::Clean : Status::Defective;
    } catch (const std::exception& e) {
        v.status = Status::Error;
        v.error = e.what();
        v.reports.clear();
    }
    v.stats.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return v;
}

ContractVerdict error_verdict(const std::string& file, const std::string& contract, const std::string& message) {
    ContractVerdict v;
    v.file = file;
    v.contract = contract;
    v.status = Status::Error;
    v.error = message;
    return v;
}

std::vector<ContractVerdict> analyze_with(const std::string& path, const AnalysisConfig& config,
                                          const std::string& display, symexec::Solver* solver) {
    std::vector<ContractVerdict> out;
    const std::string name = display.empty() ? path : display;
    std::vector<ingest::CompilationUnit> units;
    try {
        if (!fs::is_regular_file(path)) throw Error("cannot read " + path);
        ingest::CompileOptions options{config.solc_path, config.compiler_version, config.contract_filter};
        units = ingest::compile(path, options);
    } catch (const CompilationFailed& e) {
        std::string message = e.what();
        for (const auto& d : e.diagnostics) message += "\n" + d;
        out.push_back(error_verdict(name, config.contract_filter.value_or(""), message));
        return out;
    } catch (const std::exception& e) {
        out.push_back(error_verdict(name, config.contract_filter.value_or(""), e.what()));
        return out;
    }
    for (const auto& unit : units) {
        try {
            if (solver) {
                out.push_back(analyze_unit(unit, config, *solver, name));
            } else {
                symexec::Solver own(config.smt_path, config.solver_timeout_s * 1000);
                out.push_back(analyze_unit(unit, config, own, name));
            }
        } catch (const std::exception& e) {
            out.push_back(error_verdict(name, unit.contract_name, e.what()));
        }
    }
    return out;
}

Json report_json(const defects::DefectReport& r) {
    Json j;
    j["kind"] = defects::kind_name(r.kind);
    j["contract"] = r.contract_name;
    j["function"] = r.function_name;
    j["source_range"] = {{"file", r.source_range.file},
                         {"offset", r.source_range.offset},
                         {"length", r.source_range.length},
                         {"line", r.source_range.line}};
    j["evidence"] = {{"feature", r.evidence.feature},
                     {"constraints", r.evidence.constraints},
                     {"slots", r.evidence.slots}};
    j["rule_version"] = r.rule_version;
    j["path_id"] = r.path_id;
    return j;
}

}  // namespace

std::vector<ContractVerdict> analyze(const std::string& path, const AnalysisConfig& config,
                                     const std::string& display_name) {
    return analyze_with(path, config, display_name, nullptr);
}

int exit_code(const std::vector<ContractVerdict>& verdicts) {
    int code = 0;
    for (const auto& v : verdicts) {
        if (v.status == Status::Error || v.status == Status::Partial) return 2;
        if (v.status == Status::Defective) code = 1;
    }
    return code;
}

Json to_json(const std::vector<ContractVerdict>& verdicts, const AnalysisConfig& config, bool timing) {
    Json doc;
    doc["tool_version"] = kToolVersion;
    Json versions = Json::object();
    for (auto k : defects::kAllKinds) versions[std::string(defects::kind_name(k))] = defects::rule_version(k);
    doc["rule_versions"] = versions;
    doc["compiler_version"] = config.compiler_version;
    Json contracts = Json::array();
    for (const auto& v : verdicts) {
        Json c;
        c["file"] = v.file;
        c["contract"] = v.contract;
        c["status"] = status_name(v.status);
        if (!v.error.empty()) c["error"] = v.error;
        Json reports = Json::array();
        for (const auto& r : v.reports) reports.push_back(report_json(r));
        c["reports"] = reports;
        c["stats"] = {{"paths", v.stats.paths},
                      {"blocks_covered", v.stats.blocks_covered},
                      {"blocks_total", v.stats.blocks_total},
                      {"solver_calls", v.stats.solver_calls}};
        contracts.push_back(c);
    }
    doc["contracts"] = contracts;
    if (timing) {
        Json t = Json::array();
        for (const auto& v : verdicts)
            t.push_back({{"file", v.file}, {"contract", v.contract}, {"wall_time_s", v.stats.wall_time_s}});
        doc["timing"] = t;
    }
    return doc;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read manifest " + path);
    auto doc = nlohmann::json::parse(in);
    std::vector<ManifestEntry> out;
    for (const auto& rec : doc) {
        ManifestEntry e;
        e.file = rec.at("file").get<std::string>();
        e.contract = rec.value("contract", "");
        for (const auto& k : rec.value("expected", nlohmann::json::array())) {
            auto kind = defects::parse_kind(k.get<std::string>());
            if (!kind) throw Error("unknown defect kind in manifest: " + k.get<std::string>());
            e.expected.insert(*kind);
        }
        out.push_back(std::move(e));
    }
    return out;
}

double KindScore::precision() const {
    auto d = true_positive + false_positive;
    return d == 0 ? 1.0 : static_cast<double>(true_positive) / static_cast<double>(d);
}

double KindScore::recall() const {
    auto d = true_positive + false_negative;
    return d == 0 ? 1.0 : static_cast<double>(true_positive) / static_cast<double>(d);
}

CorpusResult corpus(const std::string& dir, const std::vector<ManifestEntry>& manifest, const AnalysisConfig& config) {
    CorpusResult result;
    std::vector<std::string> files;
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".sol") files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());

    struct Task {
        std::string file;
        std::optional<std::string> contract;
    };
    std::vector<Task> tasks;
    for (const auto& f : files) {
        std::set<std::string> named;
        for (const auto& m : manifest)
            if (m.file == f && !m.contract.empty()) named.insert(m.contract);
        if (named.empty())
            tasks.push_back({f, config.contract_filter});
        else
            for (const auto& c : named) tasks.push_back({f, c});
    }

    std::vector<std::vector<ContractVerdict>> slots(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        std::unique_ptr<symexec::Solver> solver;
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            AnalysisConfig local = config;
            local.contract_filter = tasks[i].contract;
            try {
                if (!solver) solver = std::make_unique<symexec::Solver>(config.smt_path, config.solver_timeout_s * 1000);
                slots[i] = analyze_with((fs::path(dir) / tasks[i].file).string(), local, tasks[i].file, solver.get());
            } catch (const std::exception& e) {
                slots[i] = {error_verdict(tasks[i].file, tasks[i].contract.value_or(""), e.what())};
                solver.reset();
            }
        }
    };
    unsigned n = std::max(1u, std::min<unsigned>(config.worker_count, static_cast<unsigned>(tasks.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w + 1 < n; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (auto& s : slots)
        for (auto& v : s) result.verdicts.push_back(std::move(v));
    std::stable_sort(result.verdicts.begin(), result.verdicts.end(), [](const auto& a, const auto& b) {
        return std::tie(a.file, a.contract) < std::tie(b.file, b.contract);
    });

    for (auto k : defects::kAllKinds) result.scores[k] = {};
    auto join = [](const std::set<DefectKind>& kinds) {
        std::string out;
        for (auto k : kinds) out += (out.empty() ? "" : ",") + std::string(defects::kind_name(k));
        return out.empty() ? std::string("none") : out;
    };
    for (const auto& m : manifest) {
        const ContractVerdict* found = nullptr;
        for (const auto& v : result.verdicts)
            if (v.file == m.file && (m.contract.empty() || v.contract == m.contract)) found = &v;
        std::string label = m.file + (m.contract.empty() ? "" : ":" + m.contract);
        if (!found) {
            result.mismatches.push_back(label + ": not analysed");
            continue;
        }
        if (found->status == Status::Error) {
            result.mismatches.push_back(label + ": error: " + found->error);
            continue;
        }
        if (found->status == Status::Partial) {
            result.mismatches.push_back(label + ": partial result, expected " + join(m.expected));
            continue;
        }
        auto got = found->kinds();
        for (auto k : defects::kAllKinds) {
            bool e = m.expected.count(k) > 0;
            bool g = got.count(k) > 0;
            auto& s = result.scores[k];
            if (e && g) ++s.true_positive;
            if (!e && g) ++s.false_positive;
            if (e && !g) ++s.false_negative;
        }
        if (got != m.expected) result.mismatches.push_back(label + ": expected " + join(m.expected) + ", got " + join(got));
    }
    return result;
}

std::string summary_table(const CorpusResult& result) {
    std::ostringstream out;
    out << std::left << std::setw(28) << "contract" << std::setw(11) << "status" << "kinds\n";
    for (const auto& v : result.verdicts) {
        std::string kinds;
        for (auto k : v.kinds()) kinds += (kinds.empty() ? "" : ",") + std::string(defects::kind_name(k));
        out << std::left << std::setw(28) << (v.contract.empty() ? v.file : v.contract) << std::setw(11)
            << status_name(v.status) << (kinds.empty() ? "-" : kinds) << "\n";
    }
    out << "\n" << std::left << std::setw(22) << "kind" << std::setw(6) << "tp" << std::setw(6) << "fp" << std::setw(6)
        << "fn" << std::setw(11) << "precision" << "recall\n";
    for (const auto& [k, s] : result.scores)
        out << std::left << std::setw(22) << defects::kind_name(k) << std::setw(6) << s.true_positive << std::setw(6)
            << s.false_positive << std::setw(6) << s.false_negative << std::setw(11) << std::fixed
            << std::setprecision(3) << s.precision() << s.recall() << "\n";
    for (const auto& m : result.mismatches) out << "mismatch: " << m << "\n";
    return out.str();
}

namespace {

void print_verdicts(const std::vector<ContractVerdict>& verdicts, std::ostream& out) {
    for (const auto& v : verdicts) {
        out << v.file << ":" << v.contract << " " << status_name(v.status);
        out << " (" << v.stats.paths << " paths, " << v.stats.blocks_covered << "/" << v.stats.blocks_total
            << " blocks, " << v.stats.solver_calls << " solver calls, " << std::fixed << std::setprecision(1)
            << v.stats.wall_time_s << " s)\n";
        if (!v.error.empty()) out << "  error: " << v.error << "\n";
        for (const auto& r : v.reports)
            out << "  " << defects::kind_name(r.kind) << " in " << r.function_name << " at line "
                << r.source_range.line << ": " << r.evidence.feature << "\n";
    }
}

void write_json(const Json& doc, const std::string& path) {
    if (path.empty()) return;
    if (path == "-") {
        std::cout << doc.dump(2) << "\n";
        return;
    }
    std::ofstream out(path);
    out << doc.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NFT contract defect detector"};
    app.require_subcommand(1);
    AnalysisConfig config;
    std::string only;
    std::string json_out;
    bool timing = false;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--contract", config.contract_filter, "contract name");
        cmd->add_option("--solc", config.solc_path, "solidity compiler executable");
        cmd->add_option("--smt", config.smt_path, "SMT-LIB solver executable");
        cmd->add_option("--timeout", config.timeout_s, "wall budget per contract in seconds")->check(CLI::PositiveNumber);
        cmd->add_option("--loop-bound", config.loop_bound, "visits per block per path")->check(CLI::PositiveNumber);
        cmd->add_option("--depth", config.depth_limit, "blocks per path")->check(CLI::PositiveNumber);
        cmd->add_option("--solver-timeout", config.solver_timeout_s, "seconds per solver query")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--only", only, "comma separated defect kinds");
        cmd->add_option("--json", json_out, "write the JSON report to this path, - for stdout");
        cmd->add_flag("--timing", timing, "include wall times in the JSON report");
        cmd->add_option("--workers", config.worker_count, "parallel contracts")->check(CLI::PositiveNumber);
    };

    std::string file;
    auto* analyze_cmd = app.add_subcommand("analyze", "analyse one Solidity file");
    analyze_cmd->add_option("file", file, "Solidity source")->required();
    common(analyze_cmd);

    std::string dir;
    std::string manifest_path;
    auto* corpus_cmd = app.add_subcommand("corpus", "analyse a directory and compare with a manifest");
    corpus_cmd->add_option("dir", dir, "directory of Solidity sources")->required();
    corpus_cmd->add_option("--manifest", manifest_path, "expected defect kinds per fixture")->required();
    common(corpus_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    resolve_tools(config);
    std::stringstream ss(only);
    for (std::string k; std::getline(ss, k, ',');) {
        if (k.empty()) continue;
        if (!defects::parse_kind(k)) {
            std::cerr << "unknown defect kind: " << k << "\n";
            return 2;
        }
        config.only_kinds.insert(std::string(defects::kind_name(*defects::parse_kind(k))));
    }

    if (*analyze_cmd) {
        auto verdicts = analyze(file, config);
        print_verdicts(verdicts, json_out == "-" ? std::cerr : std::cout);
        write_json(to_json(verdicts, config, timing), json_out);
        return exit_code(verdicts);
    }

    std::vector<ManifestEntry> manifest;
    try {
        manifest = load_manifest(manifest_path);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    auto result = corpus(dir, manifest, config);
    (json_out == "-" ? std::cerr : std::cout) << summary_table(result);
    write_json(to_json(result.verdicts, config, timing), json_out);
    if (!result.mismatches.empty()) return 1;
    for (const auto& v : result.verdicts)
        if (v.status == Status::Error) return 2;
    return 0;
}

}  // namespace nftguard::cli
