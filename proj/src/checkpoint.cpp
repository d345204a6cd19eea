#include "slideadapt/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "slideadapt/errors.hpp"
#include "slideadapt/hash.hpp"

namespace slideadapt {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'D', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const auto len = read_pod<std::uint64_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw DataError("checkpoint: truncated string");
    return s;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    write_string(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.shape()) write_pod<std::int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(double) * t.numel()));
}

void read_tensor_into(std::istream& is, const std::string& expected_name, Tensor& t) {
    const std::string name = read_string(is);
    if (name != expected_name)
        throw DataError("checkpoint: expected tensor " + expected_name + ", found " + name);
    const auto ndim = read_pod<std::uint32_t>(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = read_pod<std::int32_t>(is);
    if (shape != t.shape()) throw ConfigError("checkpoint: shape mismatch for " + name);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.numel()));
    if (!is) throw DataError("checkpoint: truncated tensor data");
}

}  // namespace

void ModelBundle::init(Rng& rng) {
    source_mapper.init(rng);
    classifier.init(rng);
    discriminator.init(rng);
    head.init(rng);
    target_mapper.copy_from(source_mapper);
}

std::vector<ParamRef> ModelBundle::named_params() {
    std::vector<ParamRef> params;
    source_mapper.collect("theta_s.mapper", params);
    classifier.collect("theta_s.classifier", params);
    target_mapper.collect("theta_t", params);
    discriminator.collect("theta_d", params);
    head.collect("theta_f_head", params);
    return params;
}

std::vector<StateRef> ModelBundle::named_state() {
    std::vector<StateRef> state;
    source_mapper.collect_state("theta_s.mapper", state);
    target_mapper.collect_state("theta_t", state);
    return state;
}

std::uint64_t ModelBundle::source_hash() {
    std::vector<ParamRef> params;
    source_mapper.collect("theta_s.mapper", params);
    classifier.collect("theta_s.classifier", params);
    return params_hash(std::move(params));
}

std::uint64_t ModelBundle::target_hash() { return params_hash(target_mapper.params("theta_t")); }
std::uint64_t ModelBundle::discriminator_hash() { return params_hash(discriminator.params("theta_d")); }
std::uint64_t ModelBundle::head_hash() { return params_hash(head.params("theta_f_head")); }

void save_checkpoint(const std::string& path, ModelBundle& bundle) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kFormatVersion);
    write_string(os, bundle.config.to_text());
    write_pod<std::int64_t>(os, bundle.step);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(bundle.loss_tail.size()));
    for (const std::string& line : bundle.loss_tail) write_string(os, line);

    const auto params = bundle.named_params();
    const auto state = bundle.named_state();
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size() + state.size()));
    for (const ParamRef& p : params) write_tensor(os, p.name, *p.value);
    for (const StateRef& s : state) write_tensor(os, s.name, *s.value);
    if (!os) throw DataError("checkpoint write failed: " + path);
}

std::unique_ptr<ModelBundle> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("missing checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a checkpoint file: " + path);
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kFormatVersion)
        throw DataError("unsupported checkpoint format version " + std::to_string(version));

    const std::string config_text = read_string(is);
    // Reparse through the strict loader so defaults and validation apply.
    KeyValueFile kv = KeyValueFile::parse_text(config_text);
    const TrainConfig cfg = TrainConfig::from_kv(kv);

    auto bundle = std::make_unique<ModelBundle>(cfg);
    bundle->step = read_pod<std::int64_t>(is);
    const auto tail_count = read_pod<std::uint32_t>(is);
    bundle->loss_tail.resize(tail_count);
    for (auto& line : bundle->loss_tail) line = read_string(is);

    const auto tensor_count = read_pod<std::uint32_t>(is);
    const auto params = bundle->named_params();
    const auto state = bundle->named_state();
    if (tensor_count != params.size() + state.size())
        throw ConfigError("checkpoint: tensor count mismatch (incompatible architecture)");
    for (const ParamRef& p : params) read_tensor_into(is, p.name, *p.value);
    for (const StateRef& s : state) read_tensor_into(is, s.name, *s.value);
    return bundle;
}

}  // namespace slideadapt
