#pragma once

#include <memory>
#include <string>
#include <vector>

namespace nftguard {

struct ProcessResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

// resolves a program name against PATH; returns empty when nothing executable is found
std::string resolve_executable(const std::string& name);

ProcessResult run_process(const std::string& exe, const std::vector<std::string>& args, const std::string& input);

// line-oriented conversation with a long-running child
class Conversation {
public:
    Conversation(const std::string& exe, const std::vector<std::string>& args);
    ~Conversation();
    Conversation(const Conversation&) = delete;
    Conversation& operator=(const Conversation&) = delete;

    void send(const std::string& text);
    bool read_line(std::string& line);
    bool running();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace nftguard
