#include "normscape/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "normscape/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; byte swapping is not implemented");

namespace normscape {
namespace {

using nlohmann::json;

template <std::floating_point T>
const char* dtype_token() {
    if constexpr (std::is_same_v<T, float>) return "f32";
    else return "f64";
}

json config_to_json(const ModelConfig& cfg) {
    nlohmann::ordered_json j;
    j["embed_features"] = cfg.embed_features;
    j["wide_features"] = cfg.wide_features;
    j["narrow_features"] = cfg.narrow_features;
    j["recurrences"] = cfg.recurrences;
    j["kernel_size"] = cfg.kernel_size;
    j["scale_factor"] = cfg.scale_factor;
    j["input_skip"] = cfg.input_skip;
    return j;
}

ModelConfig config_from_json(const json& j, const std::string& path) {
    ModelConfig cfg;
    try {
        cfg.embed_features = j.at("embed_features").get<int64_t>();
        cfg.wide_features = j.at("wide_features").get<int64_t>();
        cfg.narrow_features = j.at("narrow_features").get<int64_t>();
        cfg.recurrences = j.at("recurrences").get<int64_t>();
        cfg.kernel_size = j.at("kernel_size").get<int>();
        cfg.scale_factor = j.at("scale_factor").get<int>();
        cfg.input_skip = j.at("input_skip").get<bool>();
    } catch (const json::exception& e) {
        throw DataError("malformed model config in checkpoint " + path + ": " + e.what());
    }
    return cfg;
}

json load_manifest_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("invalid checkpoint JSON in " + path + ": " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "normscape-checkpoint") {
        throw DataError("not a checkpoint manifest: " + path);
    }
    return j;
}

}  // namespace

template <std::floating_point T>
void save_checkpoint(const std::string& path, const ModelParams<T>& params,
                     const TrainStateInfo* state) {
    const std::string bin_name = std::filesystem::path(path).filename().string() + ".bin";
    const std::string bin_path = path + ".bin";

    nlohmann::ordered_json j;
    j["format"] = "normscape-checkpoint";
    j["version"] = 1;
    j["dtype"] = dtype_token<T>();
    j["data_file"] = bin_name;
    j["model_config"] = config_to_json(params.config);
    j["layers"] = nlohmann::ordered_json::array();

    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw DataError("cannot write checkpoint data: " + bin_path);
    int64_t offset = 0;
    for (auto layer : params.layers()) {
        nlohmann::ordered_json lj;
        lj["name"] = layer.name;
        lj["subnet"] = subnet_tag(layer.subnet);
        lj["shape"] = layer.tensor->shape();
        lj["byte_offset"] = offset;
        lj["elements"] = layer.tensor->size();
        j["layers"].push_back(lj);
        bin.write(reinterpret_cast<const char*>(layer.tensor->data()),
                  static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(layer.tensor->size())));
        offset += static_cast<int64_t>(sizeof(T)) * layer.tensor->size();
    }
    bin.flush();
    if (!bin) throw DataError("write failed: " + bin_path);

    if (state && state->present) {
        nlohmann::ordered_json sj;
        sj["epoch"] = state->epoch;
        sj["global_step"] = state->global_step;
        sj["lr"] = state->lr;
        sj["best_validation_error"] = state->best_validation_error;
        sj["stale_epochs"] = state->stale_epochs;
        sj["lr_drops"] = state->lr_drops;
        sj["setting"] = state->setting;
        j["train_state"] = sj;
    }

    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint manifest: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

template <std::floating_point T>
ModelParams<T> load_checkpoint(const std::string& path, TrainStateInfo* state_out) {
    const json j = load_manifest_json(path);
    if (j.value("dtype", "") != dtype_token<T>()) {
        throw DataError("checkpoint " + path + " has dtype '" + j.value("dtype", "") +
                        "', expected '" + dtype_token<T>() + "'");
    }
    const ModelConfig cfg = config_from_json(j.at("model_config"), path);
    ModelParams<T> params = ModelParams<T>::zeros(cfg);

    const std::string bin_path =
        (std::filesystem::path(path).parent_path() / j.at("data_file").get<std::string>())
            .string();
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw DataError("cannot open checkpoint data: " + bin_path);

    auto layers = params.layers();
    if (!j.contains("layers") || j.at("layers").size() != layers.size()) {
        throw DataError("checkpoint " + path + " does not hold exactly " +
                        std::to_string(layers.size()) + " layers");
    }
    size_t matched = 0;
    for (const json& lj : j.at("layers")) {
        const std::string name = lj.at("name").get<std::string>();
        bool found = false;
        for (auto layer : layers) {
            if (name != layer.name) continue;
            found = true;
            ++matched;
            const std::vector<int64_t> shape = lj.at("shape").get<std::vector<int64_t>>();
            if (shape != layer.tensor->shape()) {
                throw DataError("checkpoint layer '" + name + "' has shape " + shape_str(shape) +
                                ", expected " + shape_str(layer.tensor->shape()));
            }
            if (lj.at("subnet").get<std::string>() != subnet_tag(layer.subnet)) {
                throw DataError("checkpoint layer '" + name + "' carries the wrong subnet tag");
            }
            const int64_t elements = lj.at("elements").get<int64_t>();
            if (elements != layer.tensor->size()) {
                throw DataError("checkpoint layer '" + name + "' element count mismatch");
            }
            bin.seekg(lj.at("byte_offset").get<int64_t>());
            bin.read(reinterpret_cast<char*>(layer.tensor->data()),
                     static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(elements)));
            if (!bin) throw DataError("truncated checkpoint data: " + bin_path);
            break;
        }
        if (!found) throw DataError("checkpoint has unknown layer '" + name + "': " + path);
    }
    if (matched != layers.size()) {
        throw DataError("checkpoint " + path + " misses layers (duplicate names?)");
    }

    if (state_out) {
        *state_out = TrainStateInfo{};
        if (j.contains("train_state")) {
            const json& sj = j.at("train_state");
            try {
                state_out->epoch = sj.at("epoch").get<int64_t>();
                state_out->global_step = sj.at("global_step").get<int64_t>();
                state_out->lr = sj.at("lr").get<double>();
                // JSON has no infinity literal; a null here means "no
                // validation result yet".
                state_out->best_validation_error =
                    sj.at("best_validation_error").is_null()
                        ? std::numeric_limits<double>::infinity()
                        : sj.at("best_validation_error").get<double>();
                state_out->stale_epochs = sj.at("stale_epochs").get<int64_t>();
                state_out->lr_drops = sj.at("lr_drops").get<int64_t>();
                state_out->setting = sj.at("setting").get<std::string>();
                state_out->present = true;
            } catch (const json::exception& e) {
                throw DataError("malformed train state in checkpoint " + path + ": " + e.what());
            }
        }
    }
    return params;
}

std::string checkpoint_dtype(const std::string& path) {
    return load_manifest_json(path).value("dtype", "");
}

template void save_checkpoint<float>(const std::string&, const ModelParams<float>&,
                                     const TrainStateInfo*);
template void save_checkpoint<double>(const std::string&, const ModelParams<double>&,
                                      const TrainStateInfo*);
template ModelParams<float> load_checkpoint<float>(const std::string&, TrainStateInfo*);
template ModelParams<double> load_checkpoint<double>(const std::string&, TrainStateInfo*);

}  // namespace normscape
