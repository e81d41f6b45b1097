#include "normscape/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "normscape/errors.hpp"

namespace normscape {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return it.key() == k;
            }) == allowed.end()) {
            throw DataError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

}  // namespace

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for hashing: " + path);

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw DataError("SHA-256 initialization failed");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const std::streamsize got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(got)) != 1) {
            throw DataError("SHA-256 update failed for " + path);
        }
    }
    if (in.bad()) throw DataError("read error while hashing " + path);

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw DataError("SHA-256 finalization failed for " + path);
    }
    static const char* hex = "0123456789abcdef";
    std::string out(static_cast<size_t>(len) * 2, '0');
    for (unsigned int i = 0; i < len; ++i) {
        out[2 * i] = hex[digest[i] >> 4];
        out[2 * i + 1] = hex[digest[i] & 0xf];
    }
    return out;
}

DatasetManifest build_manifest(const std::string& role, int scale,
                               const std::vector<std::string>& paths) {
    if (role != "train" && role != "validation" && role != "eval") {
        throw ConfigError("manifest role must be train, validation or eval, got '" + role + "'");
    }
    if (scale < 1) throw ConfigError("manifest scale must be >= 1");
    DatasetManifest m;
    m.role = role;
    m.scale = scale;
    for (const std::string& p : paths) m.entries.push_back({p, sha256_file(p)});
    return m;
}

void write_manifest(const std::string& manifest_path, const DatasetManifest& manifest) {
    nlohmann::ordered_json j;
    j["role"] = manifest.role;
    j["scale"] = manifest.scale;
    j["entries"] = nlohmann::ordered_json::array();
    for (const ManifestEntry& e : manifest.entries) {
        j["entries"].push_back({{"path", e.path}, {"sha256", e.sha256}});
    }
    std::ofstream out(manifest_path);
    if (!out) throw DataError("cannot write manifest: " + manifest_path);
    out << j.dump(2) << "\n";
    if (!out) throw DataError("write failed: " + manifest_path);
}

DatasetManifest read_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("invalid manifest JSON in " + manifest_path + ": " + e.what());
    }
    if (!j.is_object()) throw DataError("manifest must be a JSON object: " + manifest_path);
    reject_unknown_keys(j, {"role", "scale", "entries"}, manifest_path);

    DatasetManifest m;
    try {
        m.role = j.at("role").get<std::string>();
        m.scale = j.at("scale").get<int>();
        for (const json& e : j.at("entries")) {
            reject_unknown_keys(e, {"path", "sha256"}, manifest_path + " entry");
            m.entries.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + manifest_path + ": " + e.what());
    }
    if (m.role != "train" && m.role != "validation" && m.role != "eval") {
        throw DataError("manifest role must be train, validation or eval: " + manifest_path);
    }
    return m;
}

std::string resolve_entry_path(const std::string& manifest_path, const std::string& entry_path) {
    const std::filesystem::path entry(entry_path);
    if (entry.is_absolute()) return entry_path;
    return (std::filesystem::path(manifest_path).parent_path() / entry).string();
}

void verify_manifest(const std::string& manifest_path, const DatasetManifest& manifest) {
    for (const ManifestEntry& e : manifest.entries) {
        const std::string path = resolve_entry_path(manifest_path, e.path);
        if (!std::filesystem::exists(path)) {
            throw DataError("manifest entry missing on disk: " + path);
        }
        const std::string got = sha256_file(path);
        if (got != e.sha256) {
            throw DataError("checksum mismatch for " + path + ": manifest " + e.sha256 +
                            ", file " + got);
        }
    }
}

std::pair<std::vector<int64_t>, std::vector<int64_t>> split_holdout(int64_t n,
                                                                    int64_t holdout_count,
                                                                    uint64_t seed) {
    if (n < 0 || holdout_count < 0) throw ConfigError("split_holdout: negative sizes");
    if (holdout_count >= n && n > 0) {
        throw ConfigError("holdout of " + std::to_string(holdout_count) +
                          " would consume the entire set of " + std::to_string(n));
    }
    Rng rng(derive_seed(seed, "holdout"));
    std::vector<int64_t> perm = rng.permutation(n);
    std::vector<int64_t> held(perm.begin(), perm.begin() + holdout_count);
    std::vector<int64_t> kept(perm.begin() + holdout_count, perm.end());
    std::sort(held.begin(), held.end());
    std::sort(kept.begin(), kept.end());
    return {kept, held};
}

}  // namespace normscape
