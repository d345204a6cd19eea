#include "slideadapt/config.hpp"

#include <fstream>
#include <sstream>

#include "slideadapt/errors.hpp"

namespace slideadapt {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

KeyValueFile KeyValueFile::parse_text(const std::string& text) {
    KeyValueFile kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        if (key.empty()) throw ParseError("config line " + std::to_string(lineno) + ": empty key");
        if (kv.values_.count(key)) throw ParseError("config line " + std::to_string(lineno) + ": duplicate key " + key);
        kv.values_[key] = val;
    }
    return kv;
}

int KeyValueFile::get_int(const std::string& key, int def) {
    const auto it = values_.find(key);
    consumed_[key] = true;
    if (it == values_.end()) return def;
    try {
        std::size_t pos = 0;
        const int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected integer, got '" + it->second + "'");
    }
}

double KeyValueFile::get_double(const std::string& key, double def) {
    const auto it = values_.find(key);
    consumed_[key] = true;
    if (it == values_.end()) return def;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected number, got '" + it->second + "'");
    }
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t def) {
    const auto it = values_.find(key);
    consumed_[key] = true;
    if (it == values_.end()) return def;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected unsigned integer, got '" + it->second + "'");
    }
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& def) {
    const auto it = values_.find(key);
    consumed_[key] = true;
    return it == values_.end() ? def : it->second;
}

std::vector<int> KeyValueFile::get_int_list(const std::string& key, const std::vector<int>& def) {
    const auto it = values_.find(key);
    consumed_[key] = true;
    if (it == values_.end()) return def;
    std::vector<int> out;
    std::istringstream is(it->second);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        try {
            out.push_back(std::stoi(trim(tok)));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": expected comma-separated integers");
        }
    }
    if (out.empty()) throw ConfigError("config key " + key + ": empty list");
    return out;
}

void KeyValueFile::reject_unknown() const {
    for (const auto& [key, _] : values_)
        if (!consumed_.count(key)) throw ParseError("unknown config key: " + key);
}

void SynthConfig::validate() const {
    if (n_slides_per_class <= 0) throw ConfigError("n_slides_per_class must be positive");
    if (patches_per_slide_min <= 0 || patches_per_slide_max < patches_per_slide_min)
        throw ConfigError("patches_per_slide range invalid");
    if (patch_size < 32) throw ConfigError("patch_size must be >= 32");
    if (shift.brightness_scale <= 0.0) throw ConfigError("brightness_scale must be > 0");
    if (shift.blur_sigma < 0.0 || shift.noise_std < 0.0) throw ConfigError("blur_sigma/noise_std must be >= 0");
    auto check_texture = [](const TextureParams& t, const char* which) {
        if (t.blob_count_min <= 0 || t.blob_count_max < t.blob_count_min)
            throw ConfigError(std::string(which) + " blob count range invalid");
        if (t.radius_min <= 0.0 || t.radius_max < t.radius_min)
            throw ConfigError(std::string(which) + " radius range invalid");
    };
    check_texture(texture_low, "texture_low");
    check_texture(texture_high, "texture_high");
}

SynthConfig SynthConfig::load(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    SynthConfig c;
    c.n_slides_per_class = kv.get_int("n_slides_per_class", c.n_slides_per_class);
    c.patches_per_slide_min = kv.get_int("patches_per_slide_min", c.patches_per_slide_min);
    c.patches_per_slide_max = kv.get_int("patches_per_slide_max", c.patches_per_slide_max);
    c.patch_size = kv.get_int("patch_size", c.patch_size);
    c.texture_low.blob_count_min = kv.get_int("low_blob_count_min", c.texture_low.blob_count_min);
    c.texture_low.blob_count_max = kv.get_int("low_blob_count_max", c.texture_low.blob_count_max);
    c.texture_low.radius_min = kv.get_double("low_radius_min", c.texture_low.radius_min);
    c.texture_low.radius_max = kv.get_double("low_radius_max", c.texture_low.radius_max);
    c.texture_high.blob_count_min = kv.get_int("high_blob_count_min", c.texture_high.blob_count_min);
    c.texture_high.blob_count_max = kv.get_int("high_blob_count_max", c.texture_high.blob_count_max);
    c.texture_high.radius_min = kv.get_double("high_radius_min", c.texture_high.radius_min);
    c.texture_high.radius_max = kv.get_double("high_radius_max", c.texture_high.radius_max);
    c.shift.hue_rotation = kv.get_double("shift_hue_rotation", c.shift.hue_rotation);
    c.shift.brightness_scale = kv.get_double("shift_brightness_scale", c.shift.brightness_scale);
    c.shift.blur_sigma = kv.get_double("shift_blur_sigma", c.shift.blur_sigma);
    c.shift.noise_std = kv.get_double("shift_noise_std", c.shift.noise_std);
    c.seed = kv.get_u64("seed", c.seed);
    kv.reject_unknown();
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (source_epochs <= 0) throw ConfigError("source_epochs must be positive");
    if (adapt_iterations < 0) throw ConfigError("adapt_iterations must be >= 0");
    if (lr_source < 0 || lr_discriminator < 0 || lr_target < 0 || lr_head < 0)
        throw ConfigError("learning rates must be >= 0");
    if (pair_batch_size <= 0) throw ConfigError("pair_batch_size must be positive");
    if (positive_pair_fraction <= 0.0 || positive_pair_fraction >= 1.0)
        throw ConfigError("positive_pair_fraction must be in (0,1)");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("val_fraction must be in [0,1)");
    if (split_ratio <= 0.0 || split_ratio >= 1.0) throw ConfigError("split_ratio must be in (0,1)");
    if (input_crop <= 0 || input_resize < input_crop) throw ConfigError("input_resize must be >= input_crop > 0");
    arch.validate();
}

TrainConfig TrainConfig::load(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    return from_kv(kv);
}

TrainConfig TrainConfig::from_kv(KeyValueFile& kv) {
    TrainConfig c;
    c.batch_size = kv.get_int("batch_size", c.batch_size);
    c.source_epochs = kv.get_int("source_epochs", c.source_epochs);
    c.adapt_iterations = kv.get_int("adapt_iterations", c.adapt_iterations);
    c.lr_source = kv.get_double("lr_source", c.lr_source);
    c.lr_discriminator = kv.get_double("lr_discriminator", c.lr_discriminator);
    c.lr_target = kv.get_double("lr_target", c.lr_target);
    c.lr_head = kv.get_double("lr_head", c.lr_head);
    c.adam_beta1 = kv.get_double("adam_beta1", c.adam_beta1);
    c.adam_beta2 = kv.get_double("adam_beta2", c.adam_beta2);
    c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
    c.seed = kv.get_u64("seed", c.seed);
    c.pair_batch_size = kv.get_int("pair_batch_size", c.pair_batch_size);
    c.positive_pair_fraction = kv.get_double("positive_pair_fraction", c.positive_pair_fraction);
    c.val_fraction = kv.get_double("val_fraction", c.val_fraction);
    c.split_ratio = kv.get_double("split_ratio", c.split_ratio);
    c.input_resize = kv.get_int("input_resize", c.input_resize);
    c.input_crop = kv.get_int("input_crop", c.input_crop);
    c.arch.conv_channels = kv.get_int_list("conv_channels", c.arch.conv_channels);
    c.arch.disc_hidden = kv.get_int("disc_hidden", c.arch.disc_hidden);
    kv.reject_unknown();
    c.validate();
    return c;
}

std::string TrainConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "batch_size = " << batch_size << "\n"
       << "source_epochs = " << source_epochs << "\n"
       << "adapt_iterations = " << adapt_iterations << "\n"
       << "lr_source = " << lr_source << "\n"
       << "lr_discriminator = " << lr_discriminator << "\n"
       << "lr_target = " << lr_target << "\n"
       << "lr_head = " << lr_head << "\n"
       << "adam_beta1 = " << adam_beta1 << "\n"
       << "adam_beta2 = " << adam_beta2 << "\n"
       << "adam_eps = " << adam_eps << "\n"
       << "seed = " << seed << "\n"
       << "pair_batch_size = " << pair_batch_size << "\n"
       << "positive_pair_fraction = " << positive_pair_fraction << "\n"
       << "val_fraction = " << val_fraction << "\n"
       << "split_ratio = " << split_ratio << "\n"
       << "input_resize = " << input_resize << "\n"
       << "input_crop = " << input_crop << "\n";
    os << "conv_channels = ";
    for (std::size_t i = 0; i < arch.conv_channels.size(); ++i)
        os << (i ? "," : "") << arch.conv_channels[i];
    os << "\n"
       << "disc_hidden = " << arch.disc_hidden << "\n";
    return os.str();
}

}  // namespace slideadapt
