#pragma once

#include <optional>
#include <set>
#include <string>

#include "nftguard/ingest.hpp"
#include "nftguard/word.hpp"

namespace nftguard {

// fixed inputs for running the engine without symbolic environment values
struct ConcreteInputs {
    Bytes calldata;
    Word caller = Word("0x00000000000000000000000000000000000000ca11e5");
    Word callvalue = 0;
    Word address = Word("0x0000000000000000000000000000000000000c0de");
    Word timestamp = 1700000000;
    Word number = 18000000;
};

struct AnalysisConfig {
    std::string solc_path;
    std::string smt_path;
    std::string compiler_version = ingest::kDefaultCompilerVersion;
    unsigned timeout_s = 600;
    unsigned loop_bound = 10;
    unsigned depth_limit = 200;
    unsigned solver_timeout_s = 10;
    unsigned jump_models = 4;
    unsigned path_budget = 20000;  // completed or cut paths per entry selector
    unsigned worker_count = 1;
    ingest::KeywordConfig keywords;
    std::set<std::string> only_kinds;  // empty means every rule
    std::optional<std::string> contract_filter;
    std::optional<ConcreteInputs> concrete;
    bool record_paths = false;
    bool record_trace = false;
};

}  // namespace nftguard
