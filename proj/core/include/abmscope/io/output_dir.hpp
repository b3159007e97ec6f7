#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace abmscope::io {

// Artifacts are written into a hidden staging directory next to the target
// and moved into place by commit(). If commit() is never reached the staging
// directory is removed, so the target is either absent, untouched, or complete.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path target);
    ~OutputDir();
    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;

    const std::filesystem::path& target() const { return target_; }
    const std::filesystem::path& staging() const { return staging_; }

    // Staging path for artifact `name`; the name is recorded for the manifest.
    std::filesystem::path file(const std::string& name);
    const std::vector<std::string>& artifacts() const { return artifacts_; }

    // Replaces any existing target directory.
    void commit();

private:
    std::filesystem::path target_;
    std::filesystem::path staging_;
    std::vector<std::string> artifacts_;
    bool committed_ = false;
};

// Fault injection for tests. Points: "write" (throws when a second artifact
// is requested) and "commit" (throws just before the rename). The
// ABMSCOPE_FAULT_INJECT environment variable is consulted when no override is set.
void set_fault_point(std::string point);
std::string fault_point();

} // namespace abmscope::io
