#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "normscape/checkpoint.hpp"
#include "normscape/landscape.hpp"
#include "normscape/objective.hpp"
#include "normscape/patches.hpp"
#include "normscape/psnr.hpp"
#include "normscape/scheduler.hpp"

namespace normscape {

enum class AlphaPolicy { constant, linear_decay };

inline const char* alpha_policy_token(AlphaPolicy p) {
    return p == AlphaPolicy::constant ? "constant" : "linear-decay";
}

inline AlphaPolicy parse_alpha_policy(const std::string& token) {
    if (token == "constant") return AlphaPolicy::constant;
    if (token == "linear-decay") return AlphaPolicy::linear_decay;
    throw ConfigError("unknown alpha policy '" + token + "' (expected constant or linear-decay)");
}

struct TrainConfig {
    int64_t epochs = 45;
    double lr_initial = 0.01;
    double lr_decay_factor = 10.0;
    int64_t plateau_epochs = 5;
    int64_t batch_size = 64;
    uint64_t seed = 1;
    int64_t checkpoint_every = 1;  // epochs between checkpoints
    AlphaPolicy alpha_policy = AlphaPolicy::constant;
    double clip_norm = 0.0;  // 0 disables gradient clipping

    void validate() const {
        if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
        if (!(lr_initial > 0.0)) throw ConfigError("train config: lr_initial must be > 0");
        if (!(lr_decay_factor > 1.0)) throw ConfigError("train config: lr_decay_factor must be > 1");
        if (plateau_epochs < 1) throw ConfigError("train config: plateau_epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
        if (checkpoint_every < 1) throw ConfigError("train config: checkpoint_every must be >= 1");
        if (clip_norm < 0.0) throw ConfigError("train config: clip_norm must be >= 0");
    }

    PlateauConfig plateau() const { return {lr_initial, lr_decay_factor, plateau_epochs}; }
};

// alpha for a 1-based epoch: constant keeps the configured value; the decay
// policy runs linearly from 1 at the first epoch to 0 at the last.
inline double alpha_for_epoch(AlphaPolicy policy, double constant_alpha, int64_t epoch,
                              int64_t total_epochs) {
    if (policy == AlphaPolicy::constant) return constant_alpha;
    if (total_epochs <= 1) return 1.0;
    return 1.0 - static_cast<double>(epoch - 1) / static_cast<double>(total_epochs - 1);
}

// Plain SGD: w <- w - lr * g on every layer.
template <std::floating_point T>
void sgd_step(ModelParams<T>& params, const ModelParams<T>& grads, double lr) {
    auto p_layers = params.layers();
    auto g_layers = grads.layers();
    for (size_t i = 0; i < p_layers.size(); ++i) {
        axpy_inplace(*p_layers[i].tensor, static_cast<T>(-lr), *g_layers[i].tensor);
    }
}

template <std::floating_point T>
double grad_global_norm(const ModelParams<T>& grads) {
    double acc = 0.0;
    for (auto layer : grads.layers()) acc += sum_squares(*layer.tensor);
    return std::sqrt(acc);
}

template <std::floating_point T>
void scale_grads(ModelParams<T>& grads, double factor) {
    for (auto layer : grads.layers()) {
        Tensor<T>& g = *layer.tensor;
        const T f = static_cast<T>(factor);
        for (int64_t i = 0; i < g.size(); ++i) g[i] *= f;
    }
}

// Empirical error of the final output over every patch of a holdout set,
// evaluated in fixed-size chunks: (1/2P) * sum of squared differences.
template <std::floating_point T>
double validation_error(const ModelParams<T>& params, const PatchSet<T>& holdout,
                        int64_t chunk_size = 64) {
    const int64_t p_count = holdout.count();
    if (p_count == 0) throw ConfigError("validation_error: empty holdout set");
    double acc = 0.0;
    std::vector<int64_t> indices;
    for (int64_t start = 0; start < p_count; start += chunk_size) {
        const int64_t end = std::min(p_count, start + chunk_size);
        indices.resize(static_cast<size_t>(end - start));
        for (int64_t i = start; i < end; ++i) indices[static_cast<size_t>(i - start)] = i;
        auto [in, tg] = gather_batch(holdout, indices);
        Tensor<T> out = forward_eval(params, in);
        for (int64_t i = 0; i < out.size(); ++i) {
            const double d = static_cast<double>(out[i]) - static_cast<double>(tg[i]);
            acc += d * d;
        }
    }
    return acc / (2.0 * static_cast<double>(p_count));
}

template <std::floating_point T>
struct TrainResult {
    ModelParams<T> params;
    std::vector<LandscapeRecord> records;  // records produced by this run
    TrainStateInfo final_state;
};

struct TrainOptions {
    std::string out_dir;      // empty: no checkpoints or run logs written
    std::string resume_path;  // empty: fresh initialization
    std::function<void(const LandscapeRecord&)> on_epoch;  // optional
};

namespace detail {

inline std::string checkpoint_path(const std::string& out_dir, const std::string& token,
                                   int64_t epoch) {
    return out_dir + "/" + token + "_" + std::to_string(epoch) + ".ckpt";
}

inline void check_config_match(const ModelConfig& a, const ModelConfig& b) {
    const bool same = a.embed_features == b.embed_features && a.wide_features == b.wide_features &&
                      a.narrow_features == b.narrow_features && a.recurrences == b.recurrences &&
                      a.kernel_size == b.kernel_size && a.scale_factor == b.scale_factor &&
                      a.input_skip == b.input_skip;
    if (!same) throw ConfigError("resume checkpoint was trained with a different model config");
}

}  // namespace detail

// One full training run for one norm setting. Deterministic given
// (configs, seed, data): batch permutations derive from (seed, epoch), so a
// resumed run replays exactly the epochs an uninterrupted run would.
template <std::floating_point T>
TrainResult<T> train(const ModelConfig& model_cfg, const ObjectiveConfig& objective_cfg,
                     const TrainConfig& train_cfg, NormSetting setting,
                     const PatchSet<T>& train_set, const PatchSet<T>& holdout_set,
                     const std::vector<EvalPair<T>>& eval_pairs, const TrainOptions& opts) {
    model_cfg.validate();
    objective_cfg.validate();
    train_cfg.validate();
    const std::string token = setting_token(setting);

    const int64_t p_count = train_set.count();
    const int64_t steps_per_epoch = p_count / train_cfg.batch_size;
    if (steps_per_epoch < 1) {
        throw ConfigError("training set has " + std::to_string(p_count) +
                          " patches, fewer than one batch of " +
                          std::to_string(train_cfg.batch_size));
    }
    if (holdout_set.count() == 0) throw ConfigError("holdout set is empty");

    TrainResult<T> result;
    PlateauScheduler scheduler(train_cfg.plateau());
    int64_t start_epoch = 1;
    int64_t global_step = 0;

    const std::string records_path =
        opts.out_dir.empty() ? std::string() : opts.out_dir + "/" + token + "_records.jsonl";

    if (!opts.resume_path.empty()) {
        TrainStateInfo state;
        result.params = load_checkpoint<T>(opts.resume_path, &state);
        detail::check_config_match(result.params.config, model_cfg);
        if (!state.present) {
            throw ConfigError("checkpoint " + opts.resume_path + " carries no training state");
        }
        if (state.setting != token) {
            throw ConfigError("checkpoint setting '" + state.setting +
                              "' does not match requested '" + token + "'");
        }
        scheduler.restore(state.best_validation_error, state.stale_epochs, state.lr_drops);
        start_epoch = state.epoch + 1;
        global_step = state.global_step;
    } else {
        result.params = build_model<T>(model_cfg, train_cfg.seed);
        // A fresh run owns its log file; stale rows would break determinism.
        if (!records_path.empty()) {
            std::remove(records_path.c_str());
        }
    }

    const int64_t shave = model_cfg.scale_factor;
    for (int64_t epoch = start_epoch; epoch <= train_cfg.epochs; ++epoch) {
        const double lr = scheduler.lr();
        const double alpha =
            alpha_for_epoch(train_cfg.alpha_policy, objective_cfg.alpha, epoch, train_cfg.epochs);
        const auto batches =
            make_epoch_batches(p_count, train_cfg.batch_size, train_cfg.seed, epoch);

        double sum_l1 = 0.0, sum_l2 = 0.0, sum_l3 = 0.0, sum_total = 0.0;
        for (size_t step = 0; step < batches.size(); ++step) {
            auto [in, tg] = gather_batch(train_set, batches[step]);
            LossAndGrads<T> lag;
            try {
                lag = total_loss_and_grads(result.params, in, tg, setting, objective_cfg, alpha);
            } catch (const NumericError& e) {
                std::string indices;
                for (int64_t idx : batches[step]) {
                    if (!indices.empty()) indices += ",";
                    indices += std::to_string(idx);
                }
                if (!opts.out_dir.empty()) {
                    TrainStateInfo state;
                    state.epoch = epoch - 1;
                    state.global_step = global_step;
                    state.lr = lr;
                    state.best_validation_error = scheduler.best();
                    state.stale_epochs = scheduler.stale_epochs();
                    state.lr_drops = scheduler.drops();
                    state.setting = token;
                    state.present = true;
                    save_checkpoint(opts.out_dir + "/" + token + "_abort.ckpt", result.params,
                                    &state);
                }
                throw NumericError("epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step + 1) + ": " + e.what() +
                                   "; batch patch indices: " + indices);
            }
            if (train_cfg.clip_norm > 0.0) {
                const double norm = grad_global_norm(lag.grads);
                if (norm > train_cfg.clip_norm) {
                    scale_grads(lag.grads, train_cfg.clip_norm / norm);
                }
            }
            sgd_step(result.params, lag.grads, lr);
            ++global_step;
            sum_l1 += lag.breakdown.l1_term;
            sum_l2 += lag.breakdown.l2_term;
            sum_l3 += lag.breakdown.l3_term;
            sum_total += lag.breakdown.total;
        }

        const double steps = static_cast<double>(batches.size());
        LandscapeRecord rec;
        rec.setting = token;
        rec.epoch = epoch;
        rec.global_step = global_step;
        rec.lr = lr;
        rec.alpha = alpha;
        rec.l1_term = sum_l1 / steps;
        rec.l2_term = sum_l2 / steps;
        rec.l3_term = sum_l3 / steps;
        rec.total_loss = sum_total / steps;
        rec.validation_error = validation_error(result.params, holdout_set);
        rec.psnr_eval = eval_pairs.empty()
                            ? std::numeric_limits<double>::quiet_NaN()
                            : evaluate_model(result.params, eval_pairs, shave).mean_psnr;
        rec.stage = stage_of_epoch(epoch);
        result.records.push_back(rec);
        if (!records_path.empty()) append_record_jsonl(records_path, rec);
        if (opts.on_epoch) opts.on_epoch(rec);

        scheduler.observe(rec.validation_error);

        if (!opts.out_dir.empty() &&
            (epoch % train_cfg.checkpoint_every == 0 || epoch == train_cfg.epochs)) {
            TrainStateInfo state;
            state.epoch = epoch;
            state.global_step = global_step;
            state.lr = scheduler.lr();
            state.best_validation_error = scheduler.best();
            state.stale_epochs = scheduler.stale_epochs();
            state.lr_drops = scheduler.drops();
            state.setting = token;
            state.present = true;
            save_checkpoint(detail::checkpoint_path(opts.out_dir, token, epoch), result.params,
                            &state);
        }
    }

    result.final_state.epoch = train_cfg.epochs;
    result.final_state.global_step = global_step;
    result.final_state.lr = scheduler.lr();
    result.final_state.best_validation_error = scheduler.best();
    result.final_state.stale_epochs = scheduler.stale_epochs();
    result.final_state.lr_drops = scheduler.drops();
    result.final_state.setting = token;
    result.final_state.present = true;
    return result;
}

}  // namespace normscape
