// normscape: command-line driver for the capacity-controlled
// super-resolution experiments. Subcommands cover the full workflow:
// prepare-data -> train / experiment -> eval, plus gradcheck and
// param-count diagnostics.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "normscape/checkpoint.hpp"
#include "normscape/errors.hpp"
#include "normscape/fdcheck.hpp"
#include "normscape/landscape.hpp"
#include "normscape/manifest.hpp"
#include "normscape/model.hpp"
#include "normscape/objective.hpp"
#include "normscape/patches.hpp"
#include "normscape/psnr.hpp"
#include "normscape/run_config.hpp"
#include "normscape/trainer.hpp"

namespace fs = std::filesystem;
using namespace normscape;

namespace {

// Step total of the reference 45-epoch experiment; prepare-data reports the
// delta so dataset changes that shift the step budget are visible up front.
constexpr int64_t kReferenceStepBudget = 6601;

constexpr double kSparsityEpsilon = 1e-3;

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

bool is_loadable_ext(const std::string& e) { return e == ".png" || e == ".bmp"; }

bool is_known_image_ext(const std::string& e) {
    static const std::vector<std::string> known = {".jpg",  ".jpeg", ".tif", ".tiff",
                                                   ".gif",  ".ppm",  ".pgm", ".webp"};
    return std::find(known.begin(), known.end(), e) != known.end();
}

struct DirScan {
    std::vector<std::string> loadable;  // absolute paths, name order
    std::vector<std::string> foreign;   // image files in formats we do not read
};

DirScan scan_image_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    DirScan scan;
    for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = lower_ext(entry.path());
        if (is_loadable_ext(ext)) {
            scan.loadable.push_back(fs::absolute(entry.path()).lexically_normal().string());
        } else if (is_known_image_ext(ext)) {
            scan.foreign.push_back(fs::absolute(entry.path()).lexically_normal().string());
        }
    }
    std::sort(scan.loadable.begin(), scan.loadable.end());
    std::sort(scan.foreign.begin(), scan.foreign.end());
    return scan;
}

// Tries to decode everything the scan surfaced. Failures are reported and
// skipped; only a directory with no usable image at all is fatal.
std::vector<std::string> decode_pass(const std::string& dir, const DirScan& scan) {
    std::vector<std::string> good;
    for (const std::string& p : scan.foreign) {
        std::cout << "skipping " << p << ": unsupported image format\n";
    }
    for (const std::string& p : scan.loadable) {
        try {
            load_image_u8(p);
            good.push_back(p);
        } catch (const DataError& e) {
            std::cout << "skipping " << p << ": " << e.what() << "\n";
        }
    }
    if (scan.loadable.empty() && scan.foreign.empty()) {
        throw DataError("no image files in " + dir);
    }
    if (good.empty()) throw DataError("no decodable images in " + dir);
    return good;
}

void print_patch_report(const std::vector<PatchReportRow>& rows) {
    size_t name_w = 5;
    for (const PatchReportRow& r : rows) name_w = std::max(name_w, r.name.size());
    std::cout << std::left << std::setw(static_cast<int>(name_w) + 2) << "image" << std::right
              << std::setw(12) << "size" << std::setw(10) << "patches"
              << "\n";
    for (const PatchReportRow& r : rows) {
        std::ostringstream size;
        size << r.height << "x" << r.width;
        std::cout << std::left << std::setw(static_cast<int>(name_w) + 2)
                  << fs::path(r.name).filename().string() << std::right << std::setw(12)
                  << size.str() << std::setw(10) << r.patches << (r.skipped ? "  (skipped)" : "")
                  << "\n";
    }
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
    std::string train_dir;
    std::string eval_dir;
    std::string out;
    int scale = 2;
    int64_t holdout = 5;
    uint64_t seed = 1;
    int64_t batch_size = 64;
    int64_t epochs = 45;
};

int cmd_prepare_data(const PrepareArgs& a) {
    fs::create_directories(a.out);

    const std::vector<std::string> train_files = decode_pass(a.train_dir, scan_image_dir(a.train_dir));
    auto [kept, held] = split_holdout(static_cast<int64_t>(train_files.size()), a.holdout, a.seed);
    std::vector<std::string> train_paths, holdout_paths;
    for (int64_t i : kept) train_paths.push_back(train_files[static_cast<size_t>(i)]);
    for (int64_t i : held) holdout_paths.push_back(train_files[static_cast<size_t>(i)]);

    const std::string train_manifest = (fs::path(a.out) / "train_manifest.json").string();
    const std::string validation_manifest = (fs::path(a.out) / "validation_manifest.json").string();
    const std::string eval_manifest = (fs::path(a.out) / "eval_manifest.json").string();

    const DatasetManifest train_m = build_manifest("train", a.scale, train_paths);
    write_manifest(train_manifest, train_m);
    const DatasetManifest val_m = build_manifest("validation", a.scale, holdout_paths);
    write_manifest(validation_manifest, val_m);

    const std::vector<std::string> eval_files = decode_pass(a.eval_dir, scan_image_dir(a.eval_dir));
    const DatasetManifest eval_m = build_manifest("eval", a.scale, eval_files);
    write_manifest(eval_manifest, eval_m);

    std::cout << "train:      " << train_m.entries.size() << " images -> " << train_manifest
              << "\n";
    std::cout << "validation: " << val_m.entries.size() << " images -> " << validation_manifest
              << "\n";
    std::cout << "eval:       " << eval_m.entries.size() << " images -> " << eval_manifest
              << "\n\n";

    const auto images = load_source_images<float>(train_manifest, train_m);
    const TrainingPairs<float> pairs = make_training_pairs(images, a.scale);
    print_patch_report(pairs.report);

    const auto val_images = load_source_images<float>(validation_manifest, val_m);
    const TrainingPairs<float> val_pairs = make_training_pairs(val_images, a.scale);

    const int64_t patches = pairs.patches.count();
    const int64_t steps_per_epoch = patches / a.batch_size;
    const int64_t total_steps = steps_per_epoch * a.epochs;
    std::cout << "\ntraining patches:     " << patches << "\n";
    std::cout << "validation patches:   " << val_pairs.patches.count() << "\n";
    std::cout << "steps/epoch (batch " << a.batch_size << "): " << steps_per_epoch << "\n";
    std::cout << "steps over " << a.epochs << " epochs:  " << total_steps << " (reference budget "
              << kReferenceStepBudget << ", delta " << (total_steps - kReferenceStepBudget)
              << ")\n";
    return 0;
}

// ------------------------------------------------------------------ data

template <std::floating_point T>
struct RunData {
    PatchSet<T> train;
    PatchSet<T> holdout;
    std::vector<EvalPair<T>> eval;
};

void check_manifest_scale(const std::string& path, const DatasetManifest& m, int expected) {
    if (m.scale != expected) {
        throw ConfigError("manifest " + path + " was prepared for scale " +
                          std::to_string(m.scale) + " but the model uses scale " +
                          std::to_string(expected));
    }
}

template <std::floating_point T>
RunData<T> load_run_data(const RunConfig& cfg) {
    if (cfg.paths.train_manifest.empty() || cfg.paths.validation_manifest.empty()) {
        throw ConfigError(
            "config: paths.train_manifest and paths.validation_manifest are required");
    }
    const int scale = cfg.model.scale_factor;
    RunData<T> data;

    DatasetManifest tm = read_manifest(cfg.paths.train_manifest);
    verify_manifest(cfg.paths.train_manifest, tm);
    check_manifest_scale(cfg.paths.train_manifest, tm, scale);
    TrainingPairs<T> tp = make_training_pairs(load_source_images<T>(cfg.paths.train_manifest, tm),
                                              scale);
    for (const PatchReportRow& r : tp.report) {
        if (r.skipped) {
            std::cout << "warning: " << r.name << " is smaller than one patch, skipped\n";
        }
    }
    data.train = std::move(tp.patches);

    DatasetManifest vm = read_manifest(cfg.paths.validation_manifest);
    verify_manifest(cfg.paths.validation_manifest, vm);
    check_manifest_scale(cfg.paths.validation_manifest, vm, scale);
    data.holdout = make_training_pairs(load_source_images<T>(cfg.paths.validation_manifest, vm),
                                       scale)
                       .patches;

    if (!cfg.paths.eval_manifest.empty()) {
        DatasetManifest em = read_manifest(cfg.paths.eval_manifest);
        verify_manifest(cfg.paths.eval_manifest, em);
        check_manifest_scale(cfg.paths.eval_manifest, em, scale);
        data.eval = prepare_eval_pairs<T>(cfg.paths.eval_manifest, em, scale);
    } else {
        std::cout << "warning: no eval manifest configured; psnr_eval will be nan\n";
    }
    return data;
}

void write_config_copy(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / "config.json").string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << run_config_to_json(cfg);
    if (!out) throw DataError("write failed: " + path);
}

void print_epoch(const LandscapeRecord& r) {
    std::cout << "[" << r.setting << "] epoch " << std::setw(3) << r.epoch << "  lr "
              << std::setprecision(6) << r.lr << "  loss " << std::setprecision(8) << r.total_loss
              << "  val " << r.validation_error << "  psnr " << std::setprecision(6) << r.psnr_eval
              << "\n";
    std::cout.flush();
}

// ----------------------------------------------------------------- train

struct TrainArgs {
    std::string config;
    std::string setting;
    std::string out;
    std::string resume;
};

template <std::floating_point T>
int run_train(const RunConfig& cfg, NormSetting setting, const std::string& out,
              const std::string& resume) {
    RunData<T> data = load_run_data<T>(cfg);
    TrainOptions opts;
    opts.out_dir = out;
    opts.resume_path = resume;
    opts.on_epoch = print_epoch;
    TrainResult<T> res = train<T>(cfg.model, cfg.objective, cfg.train, setting, data.train,
                                  data.holdout, data.eval, opts);
    std::cout << "done: " << setting_label(setting) << ", " << res.final_state.global_step
              << " steps, best validation error " << std::setprecision(8)
              << res.final_state.best_validation_error << ", " << res.final_state.lr_drops
              << " lr drop(s)\n";
    return 0;
}

int cmd_train(const TrainArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    const NormSetting setting = parse_setting(a.setting);
    write_config_copy(cfg, a.out);
    if (cfg.precision == "f64") return run_train<double>(cfg, setting, a.out, a.resume);
    return run_train<float>(cfg, setting, a.out, a.resume);
}

// ------------------------------------------------------------ experiment

struct ExperimentArgs {
    std::string config;
    std::string out;
    std::vector<std::string> settings;
    bool resume = false;
};

// Highest-epoch checkpoint of one setting in out_dir, if any.
std::optional<std::pair<int64_t, std::string>> latest_checkpoint(const std::string& out_dir,
                                                                 const std::string& token) {
    const std::string prefix = token + "_";
    const std::string suffix = ".ckpt";
    std::optional<std::pair<int64_t, std::string>> best;
    if (!fs::is_directory(out_dir)) return best;
    for (const fs::directory_entry& entry : fs::directory_iterator(out_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() <= prefix.size() + suffix.size()) continue;
        if (name.compare(0, prefix.size(), prefix) != 0) continue;
        if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        const std::string mid = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
        if (mid.empty() || !std::all_of(mid.begin(), mid.end(), [](unsigned char c) {
                return std::isdigit(c) != 0;
            })) {
            continue;
        }
        const int64_t epoch = std::stoll(mid);
        if (!best || epoch > best->first) best = {epoch, entry.path().string()};
    }
    return best;
}

// Loads one setting's run log, drops replayed duplicates (a crash between
// the log append and the checkpoint write makes the resumed run re-log one
// epoch), and insists the epochs form exactly 1..expected.
std::vector<LandscapeRecord> load_complete_records(const std::string& path,
                                                   const std::string& token,
                                                   int64_t expected_epochs) {
    std::vector<LandscapeRecord> raw = read_records_jsonl(path);
    std::vector<LandscapeRecord> out;
    std::vector<bool> seen(static_cast<size_t>(expected_epochs) + 1, false);
    for (LandscapeRecord& r : raw) {
        if (r.setting != token) {
            throw DataError(path + ": found record for setting '" + r.setting + "'");
        }
        if (r.epoch < 1 || r.epoch > expected_epochs) {
            throw DataError(path + ": epoch " + std::to_string(r.epoch) + " outside 1.." +
                            std::to_string(expected_epochs) +
                            "; stale run log, delete it or drop --resume");
        }
        if (seen[static_cast<size_t>(r.epoch)]) continue;
        seen[static_cast<size_t>(r.epoch)] = true;
        out.push_back(std::move(r));
    }
    for (int64_t e = 1; e <= expected_epochs; ++e) {
        if (!seen[static_cast<size_t>(e)]) {
            throw DataError(path + ": missing epoch " + std::to_string(e) +
                            "; incomplete run log");
        }
    }
    std::sort(out.begin(), out.end(),
              [](const LandscapeRecord& x, const LandscapeRecord& y) { return x.epoch < y.epoch; });
    return out;
}

struct SettingSummary {
    std::string label;
    double final_psnr = 0.0;
    SparsityReport sparsity;
    double embed_recon_sparsity = 0.0;
};

template <std::floating_point T>
int run_experiment(const RunConfig& cfg, const std::vector<NormSetting>& settings,
                   const std::string& out, bool resume) {
    RunData<T> data = load_run_data<T>(cfg);
    std::vector<LandscapeRecord> all_records;
    std::vector<SettingSummary> summaries;

    for (NormSetting setting : settings) {
        const std::string token = setting_token(setting);
        const std::string records_path = (fs::path(out) / (token + "_records.jsonl")).string();

        std::string resume_path;
        bool already_complete = false;
        if (resume) {
            const auto found = latest_checkpoint(out, token);
            if (found && found->first >= cfg.train.epochs) {
                already_complete = true;
            } else if (found) {
                resume_path = found->second;
            }
        }

        if (already_complete) {
            std::cout << "== " << setting_label(setting) << ": complete at epoch "
                      << cfg.train.epochs << ", skipping ==\n";
        } else {
            std::cout << "== training " << setting_label(setting)
                      << (resume_path.empty() ? "" : " (resuming from " + resume_path + ")")
                      << " ==\n";
            TrainOptions opts;
            opts.out_dir = out;
            opts.resume_path = resume_path;
            opts.on_epoch = print_epoch;
            train<T>(cfg.model, cfg.objective, cfg.train, setting, data.train, data.holdout,
                     data.eval, opts);
        }

        std::vector<LandscapeRecord> records =
            load_complete_records(records_path, token, cfg.train.epochs);

        SettingSummary summary;
        summary.label = setting_label(setting);
        summary.final_psnr = records.back().psnr_eval;
        const ModelParams<T> final_params = load_checkpoint<T>(
            detail::checkpoint_path(out, token, cfg.train.epochs), nullptr);
        summary.sparsity = sparsity_report(final_params, kSparsityEpsilon);
        const ParamCount counts = count_params(final_params);
        const double er_total = static_cast<double>(counts.embed + counts.recon);
        summary.embed_recon_sparsity =
            (summary.sparsity.embed * static_cast<double>(counts.embed) +
             summary.sparsity.recon * static_cast<double>(counts.recon)) /
            er_total;
        summaries.push_back(summary);

        all_records.insert(all_records.end(), records.begin(), records.end());
    }

    emit_landscape(all_records, out);
    std::cout << "\nwrote landscape.csv, stage1/2/3 + all_stages SVGs, ordering_report.txt to "
              << out << "\n\n";

    const OrderingReport ordering = make_ordering_report(all_records);
    for (const std::string& line : ordering.lines) std::cout << line << "\n";

    std::cout << "\nfinal summary (|w| < " << kSparsityEpsilon << " fractions):\n";
    for (const SettingSummary& s : summaries) {
        std::cout << "  " << std::left << std::setw(8) << s.label << std::right
                  << "  psnr " << std::setprecision(6) << s.final_psnr << "  sparsity overall "
                  << std::setprecision(4) << s.sparsity.overall << "  embed " << s.sparsity.embed
                  << "  infer " << s.sparsity.infer << "  recon " << s.sparsity.recon
                  << "  embed+recon " << s.embed_recon_sparsity << "\n";
    }
    return 0;
}

int cmd_experiment(const ExperimentArgs& a) {
    const RunConfig cfg = load_run_config(a.config);
    std::vector<NormSetting> settings;
    if (a.settings.empty()) {
        settings = cfg.settings;
    } else {
        for (const std::string& tok : a.settings) settings.push_back(parse_setting(tok));
    }
    write_config_copy(cfg, a.out);
    if (cfg.precision == "f64") return run_experiment<double>(cfg, settings, a.out, a.resume);
    return run_experiment<float>(cfg, settings, a.out, a.resume);
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
    std::string manifest;
    std::string checkpoint;
    std::string json_out;
    bool bicubic = false;
    int64_t shave = -1;  // default: the manifest's scale
    bool no_quantize = false;
};

void print_eval(const EvalSummary& s, const std::string& mode) {
    size_t name_w = 5;
    for (const EvalRow& r : s.per_image) name_w = std::max(name_w, r.name.size());
    for (const EvalRow& r : s.per_image) {
        std::cout << "  " << std::left << std::setw(static_cast<int>(name_w) + 2) << r.name
                  << std::right << std::fixed << std::setprecision(4) << r.psnr_db << " dB\n";
    }
    std::cout << mode << " mean PSNR: " << std::fixed << std::setprecision(4) << s.mean_psnr
              << " dB\n";
    std::cout << std::defaultfloat << std::setprecision(6);
}

template <std::floating_point T>
EvalSummary eval_with_checkpoint(const EvalArgs& a, const DatasetManifest& m, int64_t shave) {
    const ModelParams<T> params = load_checkpoint<T>(a.checkpoint, nullptr);
    if (params.config.scale_factor != m.scale) {
        throw ConfigError("checkpoint scale " + std::to_string(params.config.scale_factor) +
                          " does not match manifest scale " + std::to_string(m.scale));
    }
    const auto pairs = prepare_eval_pairs<T>(a.manifest, m, m.scale);
    return evaluate_model(params, pairs, shave, !a.no_quantize);
}

int cmd_eval(const EvalArgs& a) {
    const DatasetManifest m = read_manifest(a.manifest);
    verify_manifest(a.manifest, m);
    if (m.entries.empty()) throw DataError("manifest has no entries: " + a.manifest);
    const int64_t shave = a.shave >= 0 ? a.shave : m.scale;

    EvalSummary summary;
    std::string mode;
    if (a.bicubic) {
        mode = "bicubic";
        const auto pairs = prepare_eval_pairs<double>(a.manifest, m, m.scale);
        summary = evaluate_baseline(pairs, shave, !a.no_quantize);
    } else {
        mode = "model";
        if (checkpoint_dtype(a.checkpoint) == "f64") {
            summary = eval_with_checkpoint<double>(a, m, shave);
        } else {
            summary = eval_with_checkpoint<float>(a, m, shave);
        }
    }
    print_eval(summary, mode);

    if (!a.json_out.empty()) {
        nlohmann::ordered_json j;
        j["mode"] = mode;
        j["scale"] = m.scale;
        j["shave"] = shave;
        j["quantize"] = !a.no_quantize;
        j["per_image"] = nlohmann::ordered_json::array();
        for (const EvalRow& r : summary.per_image) {
            j["per_image"].push_back({{"name", r.name}, {"psnr", r.psnr_db}});
        }
        j["mean_psnr"] = summary.mean_psnr;
        std::ofstream out(a.json_out, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + a.json_out);
        out << j.dump(2) << "\n";
        if (!out) throw DataError("write failed: " + a.json_out);
    }
    return 0;
}

// ------------------------------------------------------------- gradcheck

struct GradcheckArgs {
    std::string setting;
    double tol = 1e-4;
    uint64_t seed = 1;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    std::vector<NormSetting> settings;
    if (a.setting.empty()) {
        const auto all = all_settings();
        settings.assign(all.begin(), all.end());
    } else {
        settings.push_back(parse_setting(a.setting));
    }
    FdCheckConfig cfg = tiny_check_config();
    cfg.tol = a.tol;
    cfg.seed = a.seed;

    bool all_pass = true;
    for (NormSetting s : settings) {
        for (const LayerCheck& c : finite_difference_check(cfg, s)) {
            all_pass = all_pass && c.report.pass;
            std::cout << (c.report.pass ? "[PASS] " : "[FAIL] ") << std::left << std::setw(8)
                      << setting_label(s) << " " << std::setw(14) << c.layer << std::right << " ("
                      << c.subnet << ")  " << c.report.summary() << "\n";
        }
    }
    if (!all_pass) {
        std::cout << "gradient check FAILED\n";
        return 3;
    }
    std::cout << "gradient check passed (tol " << a.tol << ")\n";
    return 0;
}

// ----------------------------------------------------------- param-count

struct ParamCountArgs {
    std::string config;
};

int cmd_param_count(const ParamCountArgs& a) {
    ModelConfig mc;
    if (!a.config.empty()) mc = load_run_config(a.config).model;
    mc.validate();
    const ModelParams<float> params = ModelParams<float>::zeros(mc);

    std::cout << std::left << std::setw(16) << "layer" << std::setw(8) << "subnet" << std::setw(20)
              << "shape" << std::right << std::setw(10) << "params"
              << "\n";
    for (auto layer : params.layers()) {
        std::cout << std::left << std::setw(16) << layer.name << std::setw(8)
                  << subnet_tag(layer.subnet) << std::setw(20) << shape_str(layer.tensor->shape())
                  << std::right << std::setw(10) << layer.tensor->size() << "\n";
    }
    const ParamCount c = count_params(params);
    std::cout << "\nembed subnet: " << c.embed << "\ninfer subnet: " << c.infer
              << "\nrecon subnet: " << c.recon << "\ntotal:        " << c.total << "\n";
    std::cout << "reference total " << kReferenceParamTotal << ", delta "
              << (c.total - kReferenceParamTotal) << "\n";
    if (c.total > kOverparamFloor) {
        std::cout << "overparametrization floor " << kOverparamFloor << ": exceeded by "
                  << (c.total - kOverparamFloor) << "\n";
    } else {
        std::cout << "WARNING: total is at or below the overparametrization floor "
                  << kOverparamFloor << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "capacity-controlled recursive super-resolution: data preparation, training, "
        "evaluation and diagnostics (env NORMSCAPE_THREADS caps internal parallelism)"};
    app.require_subcommand(1);

    PrepareArgs prepare;
    CLI::App* prep = app.add_subcommand(
        "prepare-data", "Scan image directories, split a seeded holdout, write manifests");
    prep->add_option("--train-dir", prepare.train_dir, "Directory of training images")->required();
    prep->add_option("--eval-dir", prepare.eval_dir, "Directory of evaluation images")->required();
    prep->add_option("--out", prepare.out, "Output directory for manifests")->required();
    prep->add_option("--scale", prepare.scale, "Upscaling factor")->capture_default_str();
    prep->add_option("--holdout", prepare.holdout, "Images held out for validation")
        ->capture_default_str();
    prep->add_option("--seed", prepare.seed, "Holdout selection seed")->capture_default_str();
    prep->add_option("--batch-size", prepare.batch_size, "Batch size for the step report")
        ->capture_default_str();
    prep->add_option("--epochs", prepare.epochs, "Epoch count for the step report")
        ->capture_default_str();

    TrainArgs train_args;
    CLI::App* tr = app.add_subcommand("train", "Train one norm setting from a JSON config");
    tr->add_option("--config", train_args.config, "JSON run config")->required();
    tr->add_option("--setting", train_args.setting, "all-l2 | mix | all-l1")->required();
    tr->add_option("--out", train_args.out, "Output directory")->required();
    tr->add_option("--resume", train_args.resume, "Checkpoint to resume from");

    ExperimentArgs exp;
    CLI::App* ex = app.add_subcommand(
        "experiment", "Train the configured settings sequentially and emit the landscape");
    ex->add_option("--config", exp.config, "JSON run config")->required();
    ex->add_option("--out", exp.out, "Output directory")->required();
    ex->add_option("--settings", exp.settings,
                   "Subset of settings to run (default: the config's list)")
        ->delimiter(',');
    ex->add_flag("--resume", exp.resume,
                 "Continue from the newest checkpoints in --out instead of starting fresh");

    EvalArgs eval_args;
    CLI::App* ev = app.add_subcommand("eval", "PSNR evaluation over a manifest");
    ev->add_option("--manifest", eval_args.manifest, "Evaluation manifest")->required();
    CLI::Option* ev_bic = ev->add_flag("--bicubic", eval_args.bicubic,
                                       "Score the bicubic-upscaled inputs themselves");
    CLI::Option* ev_ckpt =
        ev->add_option("--checkpoint", eval_args.checkpoint, "Score a trained checkpoint");
    ev_bic->excludes(ev_ckpt);
    ev_ckpt->excludes(ev_bic);
    ev->add_option("--shave", eval_args.shave, "Border pixels excluded (default: the scale)");
    ev->add_flag("--no-quantize", eval_args.no_quantize,
                 "Compare at float resolution instead of the 8-bit grid");
    ev->add_option("--json", eval_args.json_out, "Also write the report as JSON");

    GradcheckArgs grad;
    CLI::App* gc = app.add_subcommand(
        "gradcheck", "Finite-difference check of every layer's gradient at a tiny size");
    gc->add_option("--setting", grad.setting, "Restrict to one setting (default: all three)");
    gc->add_option("--tol", grad.tol, "Max relative error allowed")->capture_default_str();
    gc->add_option("--seed", grad.seed, "Random init seed")->capture_default_str();

    ParamCountArgs pc;
    CLI::App* pco = app.add_subcommand("param-count", "Report per-layer and total weight counts");
    pco->add_option("--config", pc.config, "JSON run config (default: built-in defaults)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (prep->parsed()) return cmd_prepare_data(prepare);
        if (tr->parsed()) return cmd_train(train_args);
        if (ex->parsed()) return cmd_experiment(exp);
        if (ev->parsed()) {
            if (!eval_args.bicubic && eval_args.checkpoint.empty()) {
                throw ConfigError("eval: pass --bicubic or --checkpoint");
            }
            return cmd_eval(eval_args);
        }
        if (gc->parsed()) return cmd_gradcheck(grad);
        if (pco->parsed()) return cmd_param_count(pc);
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
