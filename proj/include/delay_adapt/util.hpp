#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace da {

// splitmix64 finalizer; used to derive independent RNG streams from
// (master seed, job index) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master ^ mix64(index));
}

// FNV-1a over raw bytes; used for input digests in run manifests.
std::uint64_t fnv1a_file(const std::filesystem::path& p);
std::string hex64(std::uint64_t v);

// Write-temp-then-rename so long runs never leave torn output files.
void atomic_write(const std::filesystem::path& p, const std::string& content);

}  // namespace da
