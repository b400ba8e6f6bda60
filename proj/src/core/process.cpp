#include "nftguard/process.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>

#include <boost/filesystem.hpp>
#include <boost/process.hpp>
#include <fcntl.h>
#include <unistd.h>

#include "nftguard/errors.hpp"

namespace bp = boost::process;
namespace fs = boost::filesystem;

namespace nftguard {

namespace {

fs::path temp_file(const char* tag) {
    static std::atomic<unsigned> counter{0};
    auto name = std::string("nftguard-") + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++) + ".tmp";
    return fs::temp_directory_path() / name;
}

std::mutex& spawn_mutex() {
    static std::mutex m;
    return m;
}

void close_on_exec(int fd) {
    if (fd >= 0) ::fcntl(fd, F_SETFD, ::fcntl(fd, F_GETFD) | FD_CLOEXEC);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p.string(), std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

std::string resolve_executable(const std::string& name) {
    if (name.empty()) return {};
    if (name.find('/') != std::string::npos) {
        fs::path p(name);
        boost::system::error_code ec;
        if (fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0) return p.string();
        return {};
    }
    auto found = bp::search_path(name);
    return found.empty() ? std::string{} : found.string();
}

ProcessResult run_process(const std::string& exe, const std::vector<std::string>& args, const std::string& input) {
    auto in_path = temp_file("in");
    auto out_path = temp_file("out");
    auto err_path = temp_file("err");
    {
        std::ofstream f(in_path.string(), std::ios::binary);
        f << input;
    }
    ProcessResult result;
    try {
        bp::child child;
        {
            std::lock_guard<std::mutex> lock(spawn_mutex());
            child = bp::child(exe, bp::args(args), bp::std_in < in_path, bp::std_out > out_path,
                              bp::std_err > err_path);
        }
        child.wait();
        result.exit_code = child.exit_code();
    } catch (const std::exception& e) {
        fs::remove(in_path);
        fs::remove(out_path);
        fs::remove(err_path);
        throw Error(std::string("cannot run ") + exe + ": " + e.what());
    }
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    fs::remove(in_path);
    fs::remove(out_path);
    fs::remove(err_path);
    return result;
}

struct Conversation::Impl {
    bp::opstream in;
    bp::ipstream out;
    bp::child child;
    Impl(const std::string& exe, const std::vector<std::string>& args) {
        std::lock_guard<std::mutex> lock(spawn_mutex());
        child = bp::child(exe, bp::args(args), bp::std_in < in, bp::std_out > out, bp::std_err > bp::null);
        close_on_exec(in.pipe().native_sink());
        close_on_exec(out.pipe().native_source());
    }
};

Conversation::Conversation(const std::string& exe, const std::vector<std::string>& args) {
    try {
        impl_ = std::make_unique<Impl>(exe, args);
    } catch (const std::exception& e) {
        throw Error(std::string("cannot start ") + exe + ": " + e.what());
    }
}

Conversation::~Conversation() {
    if (!impl_) return;
    try {
        if (impl_->child.running()) {
            impl_->in << "(exit)" << std::endl;
            impl_->in.pipe().close();
            if (!impl_->child.wait_for(std::chrono::milliseconds(500))) impl_->child.terminate();
        }
        impl_->child.wait();
    } catch (...) {
    }
}

void Conversation::send(const std::string& text) {
    impl_->in << text;
    impl_->in.flush();
}

bool Conversation::read_line(std::string& line) { return static_cast<bool>(std::getline(impl_->out, line)); }

bool Conversation::running() { return impl_->child.running(); }

}  // namespace nftguard
