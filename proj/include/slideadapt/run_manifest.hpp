#pragma once

#include <string>
#include <vector>

namespace slideadapt {

// Provenance record written beside every command's outputs: the resolved
// configuration, the inputs, and a checksum for each produced artifact.
class RunManifest {
public:
    RunManifest(std::string command, std::uint64_t seed);

    void add_input(const std::string& path);
    void add_config_line(const std::string& key, const std::string& value);
    void add_config_text(const std::string& text);  // "key = value" lines
    void add_artifact(const std::string& path);     // hashed at write time

    void write(const std::string& path) const;

private:
    std::string command_;
    std::uint64_t seed_;
    std::string start_time_;
    std::vector<std::string> inputs_;
    std::vector<std::pair<std::string, std::string>> config_;
    std::vector<std::string> artifacts_;
};

}  // namespace slideadapt
