#include "slideadapt/run_manifest.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "slideadapt/errors.hpp"
#include "slideadapt/hash.hpp"

namespace slideadapt {

namespace {

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

RunManifest::RunManifest(std::string command, std::uint64_t seed)
    : command_(std::move(command)), seed_(seed), start_time_(now_utc()) {}

void RunManifest::add_input(const std::string& path) { inputs_.push_back(path); }

void RunManifest::add_config_line(const std::string& key, const std::string& value) {
    config_.emplace_back(key, value);
}

void RunManifest::add_config_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        config_.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void RunManifest::add_artifact(const std::string& path) { artifacts_.push_back(path); }

void RunManifest::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write run manifest: " + path);
    out << "command=" << command_ << "\n";
    out << "seed=" << seed_ << "\n";
    out << "start_time=" << start_time_ << "\n";
    out << "end_time=" << now_utc() << "\n";
    for (const std::string& in : inputs_) out << "input path=" << in << "\n";
    for (const auto& [k, v] : config_) out << "config " << k << "=" << v << "\n";
    for (const std::string& a : artifacts_)
        out << "artifact path=" << a << " fnv64=" << hash_hex(hash_file(a)) << "\n";
}

}  // namespace slideadapt
