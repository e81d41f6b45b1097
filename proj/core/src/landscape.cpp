#include "normscape/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "normscape/errors.hpp"
#include "normscape/objective.hpp"
#include "normscape/svg_plot.hpp"

namespace normscape {
namespace {

using nlohmann::json;

// Shortest representation that parses back to the identical double.
std::string full_precision(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

double parse_double(const std::string& s, const std::string& where) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) {
        throw DataError("cannot parse number '" + s + "' in " + where);
    }
    return v;
}

int64_t parse_int(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || s.empty()) {
        throw DataError("cannot parse integer '" + s + "' in " + where);
    }
    return static_cast<int64_t>(v);
}

json record_to_json(const LandscapeRecord& r) {
    nlohmann::ordered_json j;
    j["setting"] = r.setting;
    j["epoch"] = r.epoch;
    j["global_step"] = r.global_step;
    j["lr"] = r.lr;
    j["alpha"] = r.alpha;
    j["l1_term"] = r.l1_term;
    j["l2_term"] = r.l2_term;
    j["l3_term"] = r.l3_term;
    j["total_loss"] = r.total_loss;
    j["validation_error"] = r.validation_error;
    // NaN/inf are not representable in JSON; encode as strings.
    if (std::isfinite(r.psnr_eval)) j["psnr_eval"] = r.psnr_eval;
    else j["psnr_eval"] = full_precision(r.psnr_eval);
    j["stage"] = r.stage;
    return j;
}

LandscapeRecord record_from_json(const json& j, const std::string& where) {
    LandscapeRecord r;
    try {
        r.setting = j.at("setting").get<std::string>();
        r.epoch = j.at("epoch").get<int64_t>();
        r.global_step = j.at("global_step").get<int64_t>();
        r.lr = j.at("lr").get<double>();
        r.alpha = j.at("alpha").get<double>();
        r.l1_term = j.at("l1_term").get<double>();
        r.l2_term = j.at("l2_term").get<double>();
        r.l3_term = j.at("l3_term").get<double>();
        r.total_loss = j.at("total_loss").get<double>();
        r.validation_error = j.at("validation_error").get<double>();
        if (j.at("psnr_eval").is_string()) {
            r.psnr_eval = parse_double(j.at("psnr_eval").get<std::string>(), where);
        } else {
            r.psnr_eval = j.at("psnr_eval").get<double>();
        }
        r.stage = j.at("stage").get<int>();
    } catch (const json::exception& e) {
        throw DataError("malformed record in " + where + ": " + e.what());
    }
    return r;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

int setting_plot_index(const std::string& token) {
    if (token == "all-l2") return 0;
    if (token == "mix") return 1;
    if (token == "all-l1") return 2;
    return -1;
}

}  // namespace

void append_record_jsonl(const std::string& path, const LandscapeRecord& record) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw DataError("cannot append run log: " + path);
    out << record_to_json(record).dump() << "\n";
    if (!out) throw DataError("write failed: " + path);
}

std::vector<LandscapeRecord> read_records_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open run log: " + path);
    std::vector<LandscapeRecord> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        out.push_back(record_from_json(j, path + ":" + std::to_string(line_no)));
    }
    return out;
}

void write_landscape_csv(const std::string& path, const std::vector<LandscapeRecord>& records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV: " + path);
    out << kLandscapeCsvHeader << "\n";
    for (const LandscapeRecord& r : records) {
        out << r.setting << "," << r.epoch << "," << r.global_step << "," << full_precision(r.lr)
            << "," << full_precision(r.alpha) << "," << full_precision(r.l1_term) << ","
            << full_precision(r.l2_term) << "," << full_precision(r.l3_term) << ","
            << full_precision(r.total_loss) << "," << full_precision(r.validation_error) << ","
            << full_precision(r.psnr_eval) << "," << r.stage << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<LandscapeRecord> parse_landscape_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV: " + path);
    if (line != kLandscapeCsvHeader) {
        throw DataError("unexpected CSV header in " + path + ": " + line);
    }
    std::vector<LandscapeRecord> out;
    int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        const auto f = split_csv_line(line);
        if (f.size() != 12) {
            throw DataError(where + ": expected 12 fields, got " + std::to_string(f.size()));
        }
        LandscapeRecord r;
        r.setting = f[0];
        r.epoch = parse_int(f[1], where);
        r.global_step = parse_int(f[2], where);
        r.lr = parse_double(f[3], where);
        r.alpha = parse_double(f[4], where);
        r.l1_term = parse_double(f[5], where);
        r.l2_term = parse_double(f[6], where);
        r.l3_term = parse_double(f[7], where);
        r.total_loss = parse_double(f[8], where);
        r.validation_error = parse_double(f[9], where);
        r.psnr_eval = parse_double(f[10], where);
        r.stage = static_cast<int>(parse_int(f[11], where));
        out.push_back(r);
    }
    return out;
}

OrderingReport make_ordering_report(const std::vector<LandscapeRecord>& records) {
    std::array<std::array<double, 3>, 3> sums{};
    std::array<std::array<int64_t, 3>, 3> counts{};
    for (const LandscapeRecord& r : records) {
        const int si = setting_plot_index(r.setting);
        if (si < 0 || r.stage < 1 || r.stage > 3 || !std::isfinite(r.psnr_eval)) continue;
        sums[static_cast<size_t>(si)][static_cast<size_t>(r.stage - 1)] += r.psnr_eval;
        counts[static_cast<size_t>(si)][static_cast<size_t>(r.stage - 1)] += 1;
    }

    OrderingReport rep;
    for (size_t s = 0; s < 3; ++s) {
        for (size_t st = 0; st < 3; ++st) {
            rep.means.psnr[s][st] = counts[s][st] > 0
                                        ? sums[s][st] / static_cast<double>(counts[s][st])
                                        : std::numeric_limits<double>::quiet_NaN();
        }
    }

    rep.lines.push_back(
        "Stage-mean evaluation PSNR per setting (informational, not a pass/fail gate):");
    const char* labels[3] = {"All-L2", "Mix", "All-L1"};
    for (size_t s = 0; s < 3; ++s) {
        std::ostringstream os;
        os << "  " << labels[s] << ":";
        for (size_t st = 0; st < 3; ++st) {
            os << " stage" << (st + 1) << "=";
            if (std::isfinite(rep.means.psnr[s][st])) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.4f dB", rep.means.psnr[s][st]);
                os << buf;
            } else {
                os << "n/a";
            }
        }
        rep.lines.push_back(os.str());
    }

    auto compare = [&](size_t a, size_t b, size_t stage_idx) {
        const double va = rep.means.psnr[a][stage_idx];
        const double vb = rep.means.psnr[b][stage_idx];
        std::ostringstream os;
        os << "  stage " << (stage_idx + 1) << ": " << labels[a] << " vs " << labels[b] << ": ";
        if (!std::isfinite(va) || !std::isfinite(vb)) {
            os << "n/a (missing records)";
        } else {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.4f vs %.4f dB -> %s", va, vb,
                          va > vb ? "first higher" : (va < vb ? "second higher" : "equal"));
            os << buf;
        }
        rep.lines.push_back(os.str());
    };
    rep.lines.push_back("Pairwise stage-mean comparisons (stages 2 and 3):");
    compare(1, 2, 1);  // Mix vs All-L1, stage 2
    compare(1, 2, 2);  // Mix vs All-L1, stage 3
    compare(0, 1, 1);  // All-L2 vs Mix, stage 2
    compare(0, 1, 2);  // All-L2 vs Mix, stage 3
    return rep;
}

namespace {

void write_stage_svg(const std::string& path, const std::vector<LandscapeRecord>& records,
                     int stage_min, int stage_max, const std::string& title) {
    static const struct {
        NormSetting setting;
        Marker marker;
        const char* color;
    } styles[3] = {
        {NormSetting::all_l2, Marker::square, "#1f6fb4"},
        {NormSetting::mix, Marker::star, "#c62828"},
        {NormSetting::all_l1, Marker::circle, "#2e7d32"},
    };

    std::vector<PlotSeries> series;
    for (const auto& st : styles) {
        PlotSeries s;
        s.label = setting_label(st.setting);
        s.marker = st.marker;
        s.color = st.color;
        for (const LandscapeRecord& r : records) {
            if (r.setting != setting_token(st.setting)) continue;
            if (r.stage < stage_min || r.stage > stage_max) continue;
            s.points.emplace_back(static_cast<double>(r.epoch), r.psnr_eval);
        }
        std::sort(s.points.begin(), s.points.end());
        if (!s.points.empty()) series.push_back(std::move(s));
    }

    std::ofstream out(path);
    if (!out) throw DataError("cannot write SVG: " + path);
    out << render_line_chart(title, "epoch", "evaluation PSNR (dB)", series);
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace

void emit_landscape(const std::vector<LandscapeRecord>& records, const std::string& out_dir) {
    if (records.empty()) throw DataError("emit_landscape: no records");
    std::filesystem::create_directories(out_dir);

    std::vector<LandscapeRecord> sorted = records;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        const int ia = setting_plot_index(a.setting), ib = setting_plot_index(b.setting);
        if (ia != ib) return ia < ib;
        return a.epoch < b.epoch;
    });

    write_landscape_csv(out_dir + "/landscape.csv", sorted);
    write_stage_svg(out_dir + "/stage1.svg", sorted, 1, 1, "Training dynamic, stage 1 (epochs 1-15)");
    write_stage_svg(out_dir + "/stage2.svg", sorted, 2, 2, "Training dynamic, stage 2 (epochs 16-30)");
    write_stage_svg(out_dir + "/stage3.svg", sorted, 3, 3, "Training dynamic, stage 3 (epochs 31-45)");
    write_stage_svg(out_dir + "/all_stages.svg", sorted, 1, 3, "Training dynamic, all stages");

    const OrderingReport rep = make_ordering_report(sorted);
    std::ofstream out(out_dir + "/ordering_report.txt");
    if (!out) throw DataError("cannot write ordering report");
    for (const std::string& line : rep.lines) out << line << "\n";
    if (!out) throw DataError("write failed: ordering report");
}

}  // namespace normscape
