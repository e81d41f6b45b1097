#include "normscape/run_config.hpp"

#include <algorithm>
#include <fstream>

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
            throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
        }
    }
}

const json* child_object(const json& root, const char* key) {
    if (!root.contains(key)) return nullptr;
    const json& j = root.at(key);
    if (!j.is_object()) throw ConfigError(std::string("config key '") + key + "' must be an object");
    return &j;
}

template <typename T>
void read_field(const json& obj, const char* key, T& target, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        target = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
    }
}

}  // namespace

RunConfig parse_run_config_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown_keys(j, {"model", "objective", "train", "paths", "precision", "settings"},
                        "<root>");

    RunConfig cfg;
    if (const json* m = child_object(j, "model")) {
        reject_unknown_keys(*m,
                            {"embed_features", "wide_features", "narrow_features", "recurrences",
                             "kernel_size", "scale_factor", "input_skip"},
                            "model");
        read_field(*m, "embed_features", cfg.model.embed_features, "model");
        read_field(*m, "wide_features", cfg.model.wide_features, "model");
        read_field(*m, "narrow_features", cfg.model.narrow_features, "model");
        read_field(*m, "recurrences", cfg.model.recurrences, "model");
        read_field(*m, "kernel_size", cfg.model.kernel_size, "model");
        read_field(*m, "scale_factor", cfg.model.scale_factor, "model");
        read_field(*m, "input_skip", cfg.model.input_skip, "model");
    }
    if (const json* o = child_object(j, "objective")) {
        reject_unknown_keys(*o, {"lambda", "alpha", "squared_l2"}, "objective");
        read_field(*o, "lambda", cfg.objective.lambda, "objective");
        read_field(*o, "alpha", cfg.objective.alpha, "objective");
        read_field(*o, "squared_l2", cfg.objective.squared_l2, "objective");
    }
    if (const json* t = child_object(j, "train")) {
        reject_unknown_keys(*t,
                            {"epochs", "lr_initial", "lr_decay_factor", "plateau_epochs",
                             "batch_size", "seed", "checkpoint_every", "alpha_policy",
                             "clip_norm"},
                            "train");
        read_field(*t, "epochs", cfg.train.epochs, "train");
        read_field(*t, "lr_initial", cfg.train.lr_initial, "train");
        read_field(*t, "lr_decay_factor", cfg.train.lr_decay_factor, "train");
        read_field(*t, "plateau_epochs", cfg.train.plateau_epochs, "train");
        read_field(*t, "batch_size", cfg.train.batch_size, "train");
        read_field(*t, "seed", cfg.train.seed, "train");
        read_field(*t, "checkpoint_every", cfg.train.checkpoint_every, "train");
        if (t->contains("alpha_policy")) {
            std::string token;
            read_field(*t, "alpha_policy", token, "train");
            cfg.train.alpha_policy = parse_alpha_policy(token);
        }
        read_field(*t, "clip_norm", cfg.train.clip_norm, "train");
    }
    if (const json* p = child_object(j, "paths")) {
        reject_unknown_keys(*p, {"train_manifest", "validation_manifest", "eval_manifest"},
                            "paths");
        read_field(*p, "train_manifest", cfg.paths.train_manifest, "paths");
        read_field(*p, "validation_manifest", cfg.paths.validation_manifest, "paths");
        read_field(*p, "eval_manifest", cfg.paths.eval_manifest, "paths");
    }
    read_field(j, "precision", cfg.precision, "<root>");
    if (j.contains("settings")) {
        if (!j.at("settings").is_array()) throw ConfigError("config key 'settings' must be an array");
        cfg.settings.clear();
        for (const json& s : j.at("settings")) {
            if (!s.is_string()) throw ConfigError("config key 'settings' must hold strings");
            cfg.settings.push_back(parse_setting(s.get<std::string>()));
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config_json(text);
}

std::string run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["model"] = {{"embed_features", cfg.model.embed_features},
                  {"wide_features", cfg.model.wide_features},
                  {"narrow_features", cfg.model.narrow_features},
                  {"recurrences", cfg.model.recurrences},
                  {"kernel_size", cfg.model.kernel_size},
                  {"scale_factor", cfg.model.scale_factor},
                  {"input_skip", cfg.model.input_skip}};
    j["objective"] = {{"lambda", cfg.objective.lambda},
                      {"alpha", cfg.objective.alpha},
                      {"squared_l2", cfg.objective.squared_l2}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"lr_initial", cfg.train.lr_initial},
                  {"lr_decay_factor", cfg.train.lr_decay_factor},
                  {"plateau_epochs", cfg.train.plateau_epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"seed", cfg.train.seed},
                  {"checkpoint_every", cfg.train.checkpoint_every},
                  {"alpha_policy", alpha_policy_token(cfg.train.alpha_policy)},
                  {"clip_norm", cfg.train.clip_norm}};
    j["paths"] = {{"train_manifest", cfg.paths.train_manifest},
                  {"validation_manifest", cfg.paths.validation_manifest},
                  {"eval_manifest", cfg.paths.eval_manifest}};
    j["precision"] = cfg.precision;
    nlohmann::ordered_json settings = nlohmann::ordered_json::array();
    for (NormSetting s : cfg.settings) settings.push_back(setting_token(s));
    j["settings"] = settings;
    return j.dump(2) + "\n";
}

}  // namespace normscape
