#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace normscape {

// One training epoch of one norm setting, as logged and plotted.
struct LandscapeRecord {
    std::string setting;  // "all-l2" | "mix" | "all-l1"
    int64_t epoch = 0;    // 1-based
    int64_t global_step = 0;
    double lr = 0.0;
    double alpha = 0.0;
    double l1_term = 0.0;
    double l2_term = 0.0;
    double l3_term = 0.0;
    double total_loss = 0.0;
    double validation_error = 0.0;
    double psnr_eval = 0.0;
    int stage = 0;
};

// Absolute epoch ranges: 1-15 / 16-30 / 31-45 (and beyond counts as 3).
inline int stage_of_epoch(int64_t epoch) {
    if (epoch <= 15) return 1;
    if (epoch <= 30) return 2;
    return 3;
}

inline constexpr const char* kLandscapeCsvHeader =
    "setting,epoch,global_step,lr,alpha,l1_term,l2_term,l3_term,total_loss,"
    "validation_error,psnr_eval,stage";

// Run log: one JSON object per line mirroring LandscapeRecord. Appends.
void append_record_jsonl(const std::string& path, const LandscapeRecord& record);
std::vector<LandscapeRecord> read_records_jsonl(const std::string& path);

// CSV with the fixed header; numeric fields at full round-trip precision.
void write_landscape_csv(const std::string& path, const std::vector<LandscapeRecord>& records);
std::vector<LandscapeRecord> parse_landscape_csv(const std::string& path);

// Stage-mean evaluation PSNR per (setting, stage), plus the pairwise
// comparisons reported alongside the plots. Informational output only, not
// a gate: the comparisons summarize tendencies.
struct StageMeans {
    // means[setting index][stage-1]; NaN where a cell has no records.
    std::array<std::array<double, 3>, 3> psnr;
};

struct OrderingReport {
    StageMeans means;
    std::vector<std::string> lines;
};

OrderingReport make_ordering_report(const std::vector<LandscapeRecord>& records);

// Writes landscape.csv, stage1/stage2/stage3/all_stages.svg and
// ordering_report.txt under out_dir.
void emit_landscape(const std::vector<LandscapeRecord>& records, const std::string& out_dir);

}  // namespace normscape
