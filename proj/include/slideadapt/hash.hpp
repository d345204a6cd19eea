#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "slideadapt/tensor.hpp"

namespace slideadapt {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t hash_tensor(const Tensor& t, std::uint64_t h = kFnvOffset) {
    return fnv1a64(t.data(), sizeof(double) * static_cast<std::size_t>(t.numel()), h);
}

inline std::uint64_t hash_tensors(const std::vector<const Tensor*>& ts) {
    std::uint64_t h = kFnvOffset;
    for (const Tensor* t : ts) h = hash_tensor(*t, h);
    return h;
}

std::uint64_t hash_file(const std::string& path);

std::string hash_hex(std::uint64_t h);

}  // namespace slideadapt
