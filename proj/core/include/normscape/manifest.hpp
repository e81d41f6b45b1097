#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normscape/image.hpp"
#include "normscape/patches.hpp"
#include "normscape/psnr.hpp"
#include "normscape/rng.hpp"

namespace normscape {

struct ManifestEntry {
    std::string path;
    std::string sha256;
};

// A dataset is a role ("train", "validation" or "eval"), the scale factor it
// is prepared for, and checksummed image files.
struct DatasetManifest {
    std::string role;
    int scale = 2;
    std::vector<ManifestEntry> entries;
};

// Lowercase hex SHA-256 of a file's bytes. DataError on unreadable files.
std::string sha256_file(const std::string& path);

// Builds a manifest from explicit file paths, computing checksums.
DatasetManifest build_manifest(const std::string& role, int scale,
                               const std::vector<std::string>& paths);

void write_manifest(const std::string& manifest_path, const DatasetManifest& manifest);

DatasetManifest read_manifest(const std::string& manifest_path);

// Entry paths may be relative to the manifest file's directory; this returns
// the resolved path for entry i of a manifest loaded from manifest_path.
std::string resolve_entry_path(const std::string& manifest_path, const std::string& entry_path);

// Checks existence and checksum of every entry; DataError with the offending
// path on the first mismatch.
void verify_manifest(const std::string& manifest_path, const DatasetManifest& manifest);

// Deterministic holdout split: returns (kept indices, held-out indices) of
// 0..n-1, both ascending. The held-out set is chosen by a seeded shuffle.
std::pair<std::vector<int64_t>, std::vector<int64_t>> split_holdout(int64_t n,
                                                                    int64_t holdout_count,
                                                                    uint64_t seed);

template <std::floating_point T>
std::vector<SourceImage<T>> load_source_images(const std::string& manifest_path,
                                               const DatasetManifest& manifest) {
    std::vector<SourceImage<T>> out;
    out.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        const std::string path = resolve_entry_path(manifest_path, e.path);
        out.push_back({e.path, load_image_luminance<T>(path)});
    }
    return out;
}

template <std::floating_point T>
std::vector<EvalPair<T>> prepare_eval_pairs(const std::string& manifest_path,
                                            const DatasetManifest& manifest, int scale) {
    std::vector<EvalPair<T>> out;
    out.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        const std::string path = resolve_entry_path(manifest_path, e.path);
        out.push_back(prepare_eval_pair<T>(e.path, load_image_luminance<T>(path), scale));
    }
    return out;
}

}  // namespace normscape
