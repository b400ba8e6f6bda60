#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "nftguard/expr.hpp"

namespace nftguard::symexec {

enum class SatResult { Sat, Unsat, Unknown };

std::string_view sat_name(SatResult r);

// SMT-LIB v2 session with an external solver process (QF_BV over 256-bit words).
// Constraints are word expressions that must be non-zero.
class Solver {
public:
    Solver(const std::string& solver_path, unsigned timeout_ms);
    ~Solver();
    Solver(const Solver&) = delete;
    Solver& operator=(const Solver&) = delete;

    SatResult check(const std::vector<Expr>& constraints, Expr assertion = nullptr);
    // up to `limit` distinct values `target` can take under the constraints
    std::vector<Word> enumerate(const std::vector<Expr>& constraints, Expr target, std::size_t limit);
    std::optional<Word> model_value(const std::vector<Expr>& constraints, Expr target);

    void attach(const ExprPool& pool);
    std::size_t queries() const { return queries_; }
    const std::string& path() const { return path_; }

private:
    struct Session;
    std::unique_ptr<Session> session_;
    std::string path_;
    unsigned timeout_ms_;
    std::uint64_t generation_ = 0;
    std::unordered_set<std::uint32_t> defined_;
    std::unordered_set<std::string> functions_;
    std::vector<Expr> asserted_;
    std::size_t queries_ = 0;

    void start();
    void reset();
    void define(Expr e, std::string& out);
    void sync_prefix(const std::vector<Expr>& constraints);
    SatResult read_result();
    std::string read_response();
};

std::string smt_term(Expr e);  // name used for a defined node

}  // namespace nftguard::symexec
