#pragma once

#include <memory>
#include <string>
#include <vector>

#include "slideadapt/config.hpp"
#include "slideadapt/networks.hpp"

namespace slideadapt {

// All four parameter sets plus their batch-norm running statistics.
struct ModelBundle {
    explicit ModelBundle(const TrainConfig& cfg)
        : config(cfg),
          source_mapper(cfg.arch),
          target_mapper(cfg.arch),
          classifier(cfg.arch.feature_dim()),
          discriminator(cfg.arch.feature_dim(), cfg.arch.disc_hidden),
          head(cfg.arch.feature_dim()) {}

    TrainConfig config;
    Mapper source_mapper;   // theta_S, mapper part
    Mapper target_mapper;   // theta_T
    Classifier classifier;  // theta_S, prediction layer
    Discriminator discriminator;  // theta_D
    SiameseHead head;             // theta_F head
    std::int64_t step = 0;
    std::vector<std::string> loss_tail;

    void init(Rng& rng);

    std::vector<ParamRef> named_params();
    std::vector<StateRef> named_state();

    std::uint64_t source_hash();
    std::uint64_t target_hash();
    std::uint64_t discriminator_hash();
    std::uint64_t head_hash();
};

// Binary container with a format-version tag; round-trips bit-exactly.
void save_checkpoint(const std::string& path, ModelBundle& bundle);
std::unique_ptr<ModelBundle> load_checkpoint(const std::string& path);

}  // namespace slideadapt
