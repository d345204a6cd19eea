#pragma once

#include <vector>

#include "slideadapt/config.hpp"
#include "slideadapt/ingest.hpp"

namespace slideadapt {

enum class Domain { Source, Target };

// Hue rotation -> brightness scaling (clamped) -> Gaussian blur -> additive
// seeded Gaussian noise (clamped). Identity parameters return the input
// unchanged, bit for bit.
Image apply_shift(const Image& pixels, const DomainShift& shift, std::uint64_t seed);

// Deterministic two-domain benchmark: Low-grade slides carry sparse large
// blobs, High-grade slides dense small blobs, on a pink background that
// always passes the tissue filter. The target domain gets the configured
// appearance shift applied after rendering; slide content is seeded
// independently of the domain, so an identity shift makes the two domains
// pixel-identical.
std::vector<Slide> generate_dataset(const SynthConfig& config, Domain domain);

}  // namespace slideadapt
