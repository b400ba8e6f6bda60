#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nftguard/config.hpp"
#include "nftguard/defects.hpp"

namespace nftguard::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Status { Clean, Defective, Partial, Error };

std::string_view status_name(Status s);

struct VerdictStats {
    std::size_t paths = 0;
    std::size_t blocks_covered = 0;
    std::size_t blocks_total = 0;
    std::size_t solver_calls = 0;
    double wall_time_s = 0;
};

struct ContractVerdict {
    std::string file;  // as given, or relative to the corpus directory
    std::string contract;
    Status status = Status::Clean;
    std::string error;
    std::vector<defects::DefectReport> reports;
    VerdictStats stats;

    std::set<defects::DefectKind> kinds() const;
};

// compiles `path` and analyses each deployable contract with a private solver session
std::vector<ContractVerdict> analyze(const std::string& path, const AnalysisConfig& config,
                                     const std::string& display_name = {});

int exit_code(const std::vector<ContractVerdict>& verdicts);

// canonical report document; `timing` adds wall times outside the comparable fields
nlohmann::ordered_json to_json(const std::vector<ContractVerdict>& verdicts, const AnalysisConfig& config,
                               bool timing = false);

struct ManifestEntry {
    std::string file;
    std::string contract;
    std::set<defects::DefectKind> expected;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);

struct KindScore {
    std::size_t true_positive = 0;
    std::size_t false_positive = 0;
    std::size_t false_negative = 0;
    double precision() const;
    double recall() const;
};

struct CorpusResult {
    std::vector<ContractVerdict> verdicts;  // sorted by (file, contract)
    std::map<defects::DefectKind, KindScore> scores;
    std::vector<std::string> mismatches;
};

CorpusResult corpus(const std::string& dir, const std::vector<ManifestEntry>& manifest, const AnalysisConfig& config);

std::string summary_table(const CorpusResult& result);

// resolves executable paths from flags, then NFTG_SOLC / NFTG_SMT, then PATH
void resolve_tools(AnalysisConfig& config);

int main(int argc, char** argv);

}  // namespace nftguard::cli
