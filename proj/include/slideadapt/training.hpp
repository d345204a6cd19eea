#pragma once

#include <memory>
#include <ostream>
#include <vector>

#include "slideadapt/checkpoint.hpp"
#include "slideadapt/ingest.hpp"
#include "slideadapt/losses.hpp"

namespace slideadapt {

enum class AdaptMode { AdvOnly, AdvPlusSiamese };
enum class WhichMapper { Source, Target };

struct PairBatch {
    Tensor a;       // B x 3 x crop x crop
    Tensor b;       // B x 3 x crop x crop
    Tensor labels;  // B x 1, 1 = same slide
};

// ceil(size * positive_fraction) positive pairs (two distinct patches of one
// slide), the rest negative (patches from two distinct slides).
PairBatch sample_pair_batch(const std::vector<Slide>& target_train, int size,
                            double positive_fraction, std::uint64_t seed,
                            int resize, int crop);

// Stage 1: supervised training of theta_S on labeled source slides, with a
// validation subset carved from the training slides for model selection by
// patch accuracy. The returned bundle has theta_T initialized to a copy of
// the source mapper.
std::unique_ptr<ModelBundle> train_source(const DatasetSplit& split, const TrainConfig& config,
                                          std::ostream* loss_log = nullptr);

// Parameter-set hashes recorded around each stage-2 substep, used to verify
// update scoping (which parameters each step is allowed to touch).
struct AdaptStepTrace {
    int iteration = 0;
    std::string phase;  // "start", "after_disc", "after_target", "after_siamese"
    std::uint64_t hash_source = 0;
    std::uint64_t hash_target = 0;
    std::uint64_t hash_disc = 0;
    std::uint64_t hash_head = 0;
};

// Stage 2 driver. Per iteration: sample equal-size source/target batches,
// map both, step the discriminator on its loss, step the target mapper on
// the mapping loss, and (in AdvPlusSiamese mode) step the Siamese head plus
// the shared target mapper on the pair loss. theta_S is never updated.
void adapt_target(ModelBundle& bundle, const std::vector<Slide>& source_train,
                  const std::vector<Slide>& target_train, AdaptMode mode,
                  std::ostream* loss_log = nullptr,
                  std::vector<AdaptStepTrace>* trace = nullptr);

// High-grade probability for every patch of every slide, eval mode, using
// the frozen source classifier on top of the chosen mapper's features.
std::vector<std::vector<double>> predict_patches(ModelBundle& bundle, WhichMapper which,
                                                 const std::vector<Slide>& slides);

// Mean patch accuracy of the chosen mapper against slide labels.
double patch_accuracy(ModelBundle& bundle, WhichMapper which, const std::vector<Slide>& slides);

// Fraction of held-out feature batches the discriminator labels correctly.
double discriminator_accuracy(ModelBundle& bundle, const std::vector<Slide>& source_slides,
                              const std::vector<Slide>& target_slides, std::uint64_t seed);

}  // namespace slideadapt
