#include "abmscope/io/output_dir.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

namespace abmscope::io {

namespace fs = std::filesystem;

namespace {

std::mutex g_fault_mutex;
std::optional<std::string> g_fault_override;
std::atomic<unsigned> g_counter{0};

fs::path sibling(const fs::path& target, const std::string& tag) {
    const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
    return parent / ("." + target.filename().string() + "." + tag + "-" + std::to_string(::getpid()) + "-" +
                     std::to_string(g_counter.fetch_add(1)));
}

} // namespace

void set_fault_point(std::string point) {
    std::lock_guard lock(g_fault_mutex);
    g_fault_override = std::move(point);
}

std::string fault_point() {
    {
        std::lock_guard lock(g_fault_mutex);
        if (g_fault_override) return *g_fault_override;
    }
    const char* env = std::getenv("ABMSCOPE_FAULT_INJECT");
    return env ? env : "";
}

OutputDir::OutputDir(fs::path target) : target_(std::move(target)) {
    if (target_.empty()) throw std::invalid_argument("out: output directory must be given");
    while (!target_.has_filename() && target_.has_parent_path()) target_ = target_.parent_path();
    if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
    staging_ = sibling(target_, "staging");
    fs::create_directories(staging_);
}

OutputDir::~OutputDir() {
    if (committed_) return;
    std::error_code ec;
    fs::remove_all(staging_, ec);
}

fs::path OutputDir::file(const std::string& name) {
    if (committed_) throw std::logic_error("output directory already committed");
    if (!artifacts_.empty() && fault_point() == "write") throw std::runtime_error("injected fault: write");
    const fs::path path = staging_ / name;
    for (const auto& a : artifacts_)
        if (a == name) return path;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    artifacts_.push_back(name);
    return path;
}

void OutputDir::commit() {
    if (committed_) return;
    if (fault_point() == "commit") throw std::runtime_error("injected fault: commit");
    std::optional<fs::path> backup;
    if (fs::exists(target_)) {
        backup = sibling(target_, "old");
        fs::rename(target_, *backup);
    }
    try {
        fs::rename(staging_, target_);
    } catch (...) {
        if (backup) fs::rename(*backup, target_);
        throw;
    }
    committed_ = true;
    if (backup) {
        std::error_code ec;
        fs::remove_all(*backup, ec);
    }
}

} // namespace abmscope::io
