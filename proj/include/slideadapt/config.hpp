#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slideadapt/networks.hpp"

namespace slideadapt {

// Strict line-oriented "key = value" parser. Unknown keys are rejected so a
// typo cannot silently fall back to a default.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    int get_int(const std::string& key, int def);
    double get_double(const std::string& key, double def);
    std::uint64_t get_u64(const std::string& key, std::uint64_t def);
    std::string get_string(const std::string& key, const std::string& def);
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def);

    // Throws ParseError if any parsed key was never consumed by a getter.
    void reject_unknown() const;

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> consumed_;
};

struct TextureParams {
    int blob_count_min = 0;
    int blob_count_max = 0;
    double radius_min = 0.0;
    double radius_max = 0.0;
};

struct DomainShift {
    double hue_rotation = 0.0;      // degrees
    double brightness_scale = 1.0;  // multiplicative, > 0
    double blur_sigma = 0.0;        // pixels
    double noise_std = 0.0;         // additive Gaussian, 0-255 scale

    bool is_identity() const {
        return hue_rotation == 0.0 && brightness_scale == 1.0 && blur_sigma == 0.0 && noise_std == 0.0;
    }
};

struct SynthConfig {
    int n_slides_per_class = 8;
    int patches_per_slide_min = 6;
    int patches_per_slide_max = 12;
    int patch_size = 64;
    TextureParams texture_low{3, 6, 6.0, 10.0};     // sparse large blobs
    TextureParams texture_high{26, 40, 2.0, 3.5};   // dense small blobs
    DomainShift shift{40.0, 0.8, 1.0, 4.0};
    std::uint64_t seed = 1;

    void validate() const;
    static SynthConfig load(const std::string& path);
};

struct TrainConfig {
    int batch_size = 32;
    int source_epochs = 20;
    int adapt_iterations = 2000;
    double lr_source = 1e-4;
    double lr_discriminator = 1e-4;
    double lr_target = 1e-5;
    double lr_head = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    int pair_batch_size = 32;
    double positive_pair_fraction = 0.5;
    double val_fraction = 0.1;  // carved from the training slides for model selection
    double split_ratio = 0.8;   // patient-disjoint train fraction
    int input_resize = 256;
    int input_crop = 224;
    ArchConfig arch;

    void validate() const;
    static TrainConfig load(const std::string& path);
    static TrainConfig from_kv(KeyValueFile& kv);
    std::string to_text() const;
};

}  // namespace slideadapt
