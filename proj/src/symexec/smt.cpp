#include "nftguard/smt.hpp"

#include <sstream>

#include "nftguard/errors.hpp"
#include "nftguard/process.hpp"

namespace nftguard::symexec {

namespace {

std::string bv(const Word& w) { return "(_ bv" + w.str() + " 256)"; }

const char* kZero = "(_ bv0 256)";
const char* kOne = "(_ bv1 256)";

std::string boolean(const std::string& cond) { return "(ite " + cond + " " + kOne + " " + kZero + ")"; }

}  // namespace

std::string_view sat_name(SatResult r) {
    switch (r) {
        case SatResult::Sat: return "sat";
        case SatResult::Unsat: return "unsat";
        case SatResult::Unknown: return "unknown";
    }
    return "?";
}

std::string smt_term(Expr e) {
    if (e->is_const()) return bv(e->value);
    return "e" + std::to_string(e->id);
}

struct Solver::Session {
    Conversation conversation;
    Session(const std::string& path) : conversation(path, {"-in"}) {}
};

Solver::Solver(const std::string& solver_path, unsigned timeout_ms) : timeout_ms_(timeout_ms) {
    path_ = resolve_executable(solver_path.empty() ? std::string("z3") : solver_path);
    if (path_.empty()) throw SolverFailure("SMT solver not found: " + (solver_path.empty() ? "z3" : solver_path));
    start();
}

Solver::~Solver() = default;

void Solver::start() {
    session_ = std::make_unique<Session>(path_);
    defined_.clear();
    functions_.clear();
    asserted_.clear();
    std::ostringstream s;
    s << "(set-option :global-declarations true)\n(set-option :timeout " << timeout_ms_ << ")\n";
    session_->conversation.send(s.str());
}

void Solver::reset() {
    defined_.clear();
    functions_.clear();
    asserted_.clear();
    std::ostringstream s;
    s << "(reset)\n(set-option :global-declarations true)\n(set-option :timeout " << timeout_ms_ << ")\n";
    session_->conversation.send(s.str());
}

void Solver::attach(const ExprPool& pool) {
    if (pool.generation() == generation_) return;
    generation_ = pool.generation();
    reset();
}

void Solver::define(Expr root, std::string& out) {
    std::vector<std::pair<Expr, bool>> stack{{root, false}};
    while (!stack.empty()) {
        auto [e, expanded] = stack.back();
        stack.pop_back();
        if (e->is_const() || defined_.count(e->id)) continue;
        if (!expanded) {
            stack.push_back({e, true});
            for (auto a : e->args) stack.push_back({a, false});
            continue;
        }
        defined_.insert(e->id);
        auto name = smt_term(e);
        auto arg = [&](std::size_t i) { return smt_term(e->args[i]); };
        std::string body;
        switch (e->op) {
            case Op::Symbol:
                if (e->width >= 256 || e->width == 0) {
                    out += "(declare-const " + name + " (_ BitVec 256))\n";
                } else {
                    out += "(declare-const r" + name + " (_ BitVec " + std::to_string(e->width) + "))\n";
                    out += "(define-fun " + name + " () (_ BitVec 256) ((_ zero_extend " +
                           std::to_string(256 - e->width) + ") r" + name + "))\n";
                }
                continue;
            case Op::StorageRead:
                out += "(declare-const " + name + " (_ BitVec 256))\n";
                continue;
            case Op::Keccak: {
                auto fn = "keccak" + std::to_string(e->args.size()) + "_" + e->value.str();
                if (functions_.insert(fn).second) {
                    out += "(declare-fun " + fn + " (";
                    for (std::size_t i = 0; i < e->args.size(); ++i) out += "(_ BitVec 256) ";
                    out += ") (_ BitVec 256))\n";
                }
                body = "(" + fn;
                for (std::size_t i = 0; i < e->args.size(); ++i) body += " " + arg(i);
                body += ")";
                break;
            }
            case Op::Add: body = "(bvadd " + arg(0) + " " + arg(1) + ")"; break;
            case Op::Mul: body = "(bvmul " + arg(0) + " " + arg(1) + ")"; break;
            case Op::Sub: body = "(bvsub " + arg(0) + " " + arg(1) + ")"; break;
            case Op::Div:
                body = "(ite (= " + arg(1) + " " + kZero + ") " + kZero + " (bvudiv " + arg(0) + " " + arg(1) + "))";
                break;
            case Op::SDiv:
                body = "(ite (= " + arg(1) + " " + kZero + ") " + kZero + " (bvsdiv " + arg(0) + " " + arg(1) + "))";
                break;
            case Op::Mod:
                body = "(ite (= " + arg(1) + " " + kZero + ") " + kZero + " (bvurem " + arg(0) + " " + arg(1) + "))";
                break;
            case Op::SMod:
                body = "(ite (= " + arg(1) + " " + kZero + ") " + kZero + " (bvsrem " + arg(0) + " " + arg(1) + "))";
                break;
            case Op::Exp: {
                // exponent must be concrete to be expressible; otherwise the result is left free
                if (e->args[1]->is_const()) {
                    Word k = e->args[1]->value;
                    std::string result = kOne, base = arg(0);
                    int guard = 0;
                    while (k != 0 && guard++ < 256) {
                        if (bit_test(k, 0)) result = "(bvmul " + result + " " + base + ")";
                        k >>= 1;
                        if (k != 0) base = "(bvmul " + base + " " + base + ")";
                    }
                    body = result;
                } else {
                    out += "(declare-const " + name + " (_ BitVec 256))\n";
                    continue;
                }
                break;
            }
            case Op::Shl: body = "(bvshl " + arg(1) + " " + arg(0) + ")"; break;
            case Op::Shr: body = "(bvlshr " + arg(1) + " " + arg(0) + ")"; break;
            case Op::Sar: body = "(bvashr " + arg(1) + " " + arg(0) + ")"; break;
            case Op::And: body = "(bvand " + arg(0) + " " + arg(1) + ")"; break;
            case Op::Or: body = "(bvor " + arg(0) + " " + arg(1) + ")"; break;
            case Op::Xor: body = "(bvxor " + arg(0) + " " + arg(1) + ")"; break;
            case Op::Not: body = "(bvnot " + arg(0) + ")"; break;
            case Op::Lt: body = boolean("(bvult " + arg(0) + " " + arg(1) + ")"); break;
            case Op::Gt: body = boolean("(bvugt " + arg(0) + " " + arg(1) + ")"); break;
            case Op::Slt: body = boolean("(bvslt " + arg(0) + " " + arg(1) + ")"); break;
            case Op::Sgt: body = boolean("(bvsgt " + arg(0) + " " + arg(1) + ")"); break;
            case Op::Eq: body = boolean("(= " + arg(0) + " " + arg(1) + ")"); break;
            case Op::IsZero: body = boolean("(= " + arg(0) + " " + kZero + ")"); break;
            case Op::Byte:
                body = "(ite (bvult " + arg(0) + " (_ bv32 256)) (bvand (bvlshr " + arg(1) +
                       " (bvmul (bvsub (_ bv31 256) " + arg(0) + ") (_ bv8 256))) (_ bv255 256)) " + kZero + ")";
                break;
            case Op::SignExtend: {
                auto shift = "(bvsub (_ bv248 256) (bvmul " + arg(0) + " (_ bv8 256)))";
                body = "(ite (bvult " + arg(0) + " (_ bv31 256)) (bvashr (bvshl " + arg(1) + " " + shift + ") " + shift +
                       ") " + arg(1) + ")";
                break;
            }
            case Op::AddMod:
            case Op::MulMod: {
                auto wide = [&](std::size_t i) { return "((_ zero_extend 256) " + arg(i) + ")"; };
                auto combined = std::string(e->op == Op::AddMod ? "(bvadd " : "(bvmul ") + wide(0) + " " + wide(1) + ")";
                body = "(ite (= " + arg(2) + " " + kZero + ") " + kZero + " ((_ extract 255 0) (bvurem " + combined +
                       " " + wide(2) + ")))";
                break;
            }
            case Op::Const: break;
        }
        out += "(define-fun " + name + " () (_ BitVec 256) " + body + ")\n";
    }
}

void Solver::sync_prefix(const std::vector<Expr>& constraints) {
    std::size_t common = 0;
    while (common < asserted_.size() && common < constraints.size() && asserted_[common] == constraints[common]) ++common;
    std::string out;
    if (asserted_.size() > common) out += "(pop " + std::to_string(asserted_.size() - common) + ")\n";
    asserted_.resize(common);
    for (std::size_t i = common; i < constraints.size(); ++i) {
        define(constraints[i], out);
        out += "(push 1)\n(assert (not (= " + smt_term(constraints[i]) + " " + kZero + ")))\n";
        asserted_.push_back(constraints[i]);
    }
    if (!out.empty()) session_->conversation.send(out);
}

std::string Solver::read_response() {
    std::string acc, line;
    int depth = 0;
    do {
        if (!session_->conversation.read_line(line)) throw SolverFailure("solver process terminated");
        if (line.rfind("(error", 0) == 0) throw SolverFailure("solver error: " + line);
        for (char c : line) depth += c == '(' ? 1 : (c == ')' ? -1 : 0);
        acc += line;
    } while (depth > 0);
    return acc;
}

SatResult Solver::read_result() {
    auto r = read_response();
    if (r == "sat") return SatResult::Sat;
    if (r == "unsat") return SatResult::Unsat;
    if (r == "unknown" || r == "timeout") return SatResult::Unknown;
    throw SolverFailure("unexpected solver reply: " + r);
}

SatResult Solver::check(const std::vector<Expr>& constraints, Expr assertion) {
    ++queries_;
    try {
        sync_prefix(constraints);
        std::string out;
        if (assertion) {
            define(assertion, out);
            out += "(push 1)\n(assert (not (= " + smt_term(assertion) + " " + kZero + ")))\n(check-sat)\n(pop 1)\n";
        } else {
            out += "(check-sat)\n";
        }
        session_->conversation.send(out);
        return read_result();
    } catch (const SolverFailure&) {
        start();
        generation_ = 0;
        throw;
    }
}

std::optional<Word> Solver::model_value(const std::vector<Expr>& constraints, Expr target) {
    auto v = enumerate(constraints, target, 1);
    if (v.empty()) return std::nullopt;
    return v.front();
}

std::vector<Word> Solver::enumerate(const std::vector<Expr>& constraints, Expr target, std::size_t limit) {
    std::vector<Word> found;
    if (target->is_const()) return {target->value};
    try {
        sync_prefix(constraints);
        std::string out;
        define(target, out);
        out += "(push 1)\n";
        session_->conversation.send(out);
        while (found.size() < limit) {
            ++queries_;
            session_->conversation.send("(check-sat)\n");
            if (read_result() != SatResult::Sat) break;
            session_->conversation.send("(get-value (" + smt_term(target) + "))\n");
            auto reply = read_response();
            auto pos = reply.find("#x");
            Word value = 0;
            if (pos != std::string::npos) {
                auto end = reply.find_first_not_of("0123456789abcdefABCDEF", pos + 2);
                value = word_from_hex(reply.substr(pos + 2, end - pos - 2));
            } else if ((pos = reply.find("#b")) != std::string::npos) {
                auto end = reply.find_first_not_of("01", pos + 2);
                for (auto c : reply.substr(pos + 2, end - pos - 2)) value = (value << 1) | (c == '1' ? 1 : 0);
            } else if ((pos = reply.find("(_ bv")) != std::string::npos) {
                auto end = reply.find(' ', pos + 5);
                value = Word(reply.substr(pos + 5, end - pos - 5));
            } else {
                throw SolverFailure("cannot parse model: " + reply);
            }
            found.push_back(value);
            session_->conversation.send("(assert (not (= " + smt_term(target) + " " + bv(value) + ")))\n");
        }
        session_->conversation.send("(pop 1)\n");
    } catch (const SolverFailure&) {
        start();
        generation_ = 0;
        throw;
    }
    return found;
}

}  // namespace nftguard::symexec
