#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "normscape/landscape.hpp"
#include "normscape/model.hpp"
#include "normscape/psnr.hpp"

using namespace normscape;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

size_t count_occurrences(const std::string& text, const std::string& needle) {
    size_t n = 0;
    for (size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

LandscapeRecord sample_record(const std::string& setting, int64_t epoch, double psnr) {
    LandscapeRecord r;
    r.setting = setting;
    r.epoch = epoch;
    r.global_step = epoch * 17;
    r.lr = 0.01 / static_cast<double>(epoch);
    r.alpha = 0.5;
    r.l1_term = 1.0 / static_cast<double>(epoch);
    r.l2_term = 2.0 / static_cast<double>(epoch);
    r.l3_term = 0.001;
    r.total_loss = r.l1_term * 0.5 + r.l2_term * 0.5 + r.l3_term;
    r.validation_error = 3.0 / static_cast<double>(epoch);
    r.psnr_eval = psnr;
    r.stage = stage_of_epoch(epoch);
    return r;
}

bool record_equal(const LandscapeRecord& a, const LandscapeRecord& b) {
    const bool psnr_same = (std::isnan(a.psnr_eval) && std::isnan(b.psnr_eval)) ||
                           a.psnr_eval == b.psnr_eval;
    return a.setting == b.setting && a.epoch == b.epoch && a.global_step == b.global_step &&
           a.lr == b.lr && a.alpha == b.alpha && a.l1_term == b.l1_term &&
           a.l2_term == b.l2_term && a.l3_term == b.l3_term && a.total_loss == b.total_loss &&
           a.validation_error == b.validation_error && psnr_same && a.stage == b.stage;
}

}  // namespace

TEST_CASE("epochs map onto the three stages") {
    CHECK(stage_of_epoch(1) == 1);
    CHECK(stage_of_epoch(15) == 1);
    CHECK(stage_of_epoch(16) == 2);
    CHECK(stage_of_epoch(30) == 2);
    CHECK(stage_of_epoch(31) == 3);
    CHECK(stage_of_epoch(45) == 3);
    CHECK(stage_of_epoch(60) == 3);
}

TEST_CASE("psnr closed forms on the 8-bit scale") {
    // Identical images hit the documented cap.
    Tensor<double> ref({1, 8, 8}, 100.0 / 255.0);
    CHECK(psnr(ref, ref, 0) == kPsnrCap);

    // One quantization level of uniform error: MSE 1, 20*log10(255).
    Tensor<double> off1({1, 8, 8}, 101.0 / 255.0);
    CHECK(psnr(ref, off1, 0) == doctest::Approx(48.130803608679).epsilon(1e-9));

    // Sixteen levels: MSE 256.
    Tensor<double> off16({1, 8, 8}, 116.0 / 255.0);
    CHECK(psnr(ref, off16, 0) == doctest::Approx(24.048403955561).epsilon(1e-9));
}

TEST_CASE("psnr decreases strictly as the error grows") {
    Tensor<double> ref({1, 8, 8}, 100.0 / 255.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int levels = 1; levels <= 40; ++levels) {
        Tensor<double> cand({1, 8, 8}, (100.0 + levels) / 255.0);
        const double v = psnr(ref, cand, 0);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("psnr ignores a common shift when nothing clamps") {
    Rng rng(7);
    Tensor<double> a({1, 10, 10});
    Tensor<double> b({1, 10, 10});
    for (int64_t i = 0; i < a.size(); ++i) {
        a[i] = 0.3 + 0.2 * rng.next_double();  // stays within [0,1] after +0.2
        b[i] = a[i] + 0.05 * (rng.next_double() - 0.5);
    }
    const double base = psnr(a, b, 0);
    // 0.2 is exactly 51 8-bit levels, so quantized differences are
    // untouched; the float path is shift-invariant for any offset.
    Tensor<double> a_s = a, b_s = b;
    for (int64_t i = 0; i < a.size(); ++i) {
        a_s[i] += 0.2;
        b_s[i] += 0.2;
    }
    CHECK(psnr(a_s, b_s, 0) == doctest::Approx(base).epsilon(1e-12));

    const double raw = psnr(a, b, 0, false);
    for (int64_t i = 0; i < a.size(); ++i) {
        a_s[i] = a[i] + 0.1;
        b_s[i] = b[i] + 0.1;
    }
    CHECK(psnr(a_s, b_s, 0, false) == doctest::Approx(raw).epsilon(1e-9));
}

TEST_CASE("psnr shaving excludes the border") {
    // Corrupt only the border: with shave 1 the images look identical.
    Tensor<double> ref({1, 6, 6}, 0.5);
    Tensor<double> cand = ref;
    for (int64_t x = 0; x < 6; ++x) cand[x] = 1.0;  // top row
    CHECK(psnr(ref, cand, 0) < 30.0);
    CHECK(psnr(ref, cand, 1) == kPsnrCap);

    CHECK_THROWS_AS(psnr(ref, cand, 3), std::invalid_argument);
    CHECK_THROWS_AS(psnr(ref, cand, -1), std::invalid_argument);
    Tensor<double> wrong({1, 5, 6});
    CHECK_THROWS_AS(psnr(ref, wrong, 0), std::invalid_argument);
}

TEST_CASE("baseline evaluation conventions") {
    Rng rng(15);
    // Scale 1: the degradation pipeline is the identity, so the baseline
    // hits the cap.
    auto img = testutil::random_tensor<double>({1, 12, 12}, rng, 0.0, 1.0);
    auto pair = prepare_eval_pair<double>("one", img, 1);
    auto s = evaluate_baseline<double>({pair}, 1);
    REQUIRE(s.per_image.size() == 1);
    CHECK(s.per_image[0].psnr_db == kPsnrCap);
    CHECK(s.mean_psnr == kPsnrCap);

    // Single-image set: mean equals the image's own value.
    auto pair2 = prepare_eval_pair<double>("two", img, 2);
    auto s2 = evaluate_baseline<double>({pair2}, 2);
    CHECK(s2.mean_psnr == s2.per_image[0].psnr_db);
    CHECK(s2.mean_psnr < kPsnrCap);

    CHECK_THROWS_AS(evaluate_baseline<double>({}, 2), DataError);
}

TEST_CASE("the identity network scores exactly the bicubic baseline") {
    ModelConfig cfg;
    cfg.embed_features = 8;
    cfg.wide_features = 8;
    cfg.narrow_features = 4;
    cfg.recurrences = 2;
    auto params = make_identity_params<double>(cfg);
    Rng rng(16);
    auto img = testutil::random_tensor<double>({1, 16, 16}, rng, 0.0, 1.0);
    auto pair = prepare_eval_pair<double>("scene", img, 2);
    const double baseline = evaluate_baseline<double>({pair}, 2).mean_psnr;
    const double model = evaluate_model<double>(params, {pair}, 2).mean_psnr;
    CHECK(model == doctest::Approx(baseline).epsilon(1e-12));
}

TEST_CASE("run log round trip preserves every field") {
    testutil::TempDir tmp("jsonl");
    const std::string path = tmp.file("records.jsonl");
    std::vector<LandscapeRecord> original = {
        sample_record("all-l2", 1, 25.5),
        sample_record("mix", 2, std::numeric_limits<double>::quiet_NaN()),
        sample_record("all-l1", 31, 33.12345678901234),
    };
    for (const auto& r : original) append_record_jsonl(path, r);
    auto back = read_records_jsonl(path);
    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(record_equal(back[i], original[i]));

    CHECK_THROWS_AS(read_records_jsonl(tmp.file("missing.jsonl")), DataError);
    {
        std::ofstream bad(tmp.file("bad.jsonl"));
        bad << "not json\n";
    }
    CHECK_THROWS_AS(read_records_jsonl(tmp.file("bad.jsonl")), DataError);
}

TEST_CASE("csv round trip is bit exact including NaN cells") {
    testutil::TempDir tmp("csv");
    const std::string path = tmp.file("landscape.csv");
    std::vector<LandscapeRecord> original;
    for (int64_t e = 1; e <= 5; ++e) {
        original.push_back(sample_record("mix", e, 20.0 + 1.0 / static_cast<double>(e)));
    }
    original.push_back(sample_record("all-l1", 6, std::numeric_limits<double>::quiet_NaN()));
    write_landscape_csv(path, original);

    auto back = parse_landscape_csv(path);
    REQUIRE(back.size() == original.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(record_equal(back[i], original[i]));

    // Header is enforced.
    const std::string bogus = tmp.file("bogus.csv");
    {
        std::ofstream out(bogus);
        out << "a,b,c\n1,2,3\n";
    }
    CHECK_THROWS_AS(parse_landscape_csv(bogus), DataError);

    // Writing twice produces identical bytes.
    const std::string again = tmp.file("again.csv");
    write_landscape_csv(again, original);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("ordering report aggregates stage means per setting") {
    std::vector<LandscapeRecord> records;
    // All-L2: 30 dB in stage 1, 32 dB in stage 2.
    for (int64_t e = 1; e <= 15; ++e) records.push_back(sample_record("all-l2", e, 30.0));
    for (int64_t e = 16; e <= 30; ++e) records.push_back(sample_record("all-l2", e, 32.0));
    // Mix: constant 31 dB across stages 1-2, NaN rows must be ignored.
    for (int64_t e = 1; e <= 30; ++e) records.push_back(sample_record("mix", e, 31.0));
    records.push_back(sample_record("mix", 31, std::numeric_limits<double>::quiet_NaN()));

    auto rep = make_ordering_report(records);
    CHECK(rep.means.psnr[0][0] == doctest::Approx(30.0));
    CHECK(rep.means.psnr[0][1] == doctest::Approx(32.0));
    CHECK(std::isnan(rep.means.psnr[0][2]));
    CHECK(rep.means.psnr[1][0] == doctest::Approx(31.0));
    CHECK(std::isnan(rep.means.psnr[1][2]));  // the NaN row contributed nothing
    CHECK(std::isnan(rep.means.psnr[2][0]));  // no all-l1 records at all
    CHECK(rep.lines.size() >= 4);
}

TEST_CASE("landscape emission writes the full artifact set") {
    testutil::TempDir tmp("emit");
    std::vector<LandscapeRecord> records;
    for (const char* setting : {"all-l2", "mix", "all-l1"}) {
        for (int64_t e = 1; e <= 45; ++e) {
            records.push_back(sample_record(setting, e, 25.0 + 0.1 * static_cast<double>(e)));
        }
    }
    emit_landscape(records, tmp.str());

    for (const char* name : {"landscape.csv", "stage1.svg", "stage2.svg", "stage3.svg",
                             "all_stages.svg", "ordering_report.txt"}) {
        CHECK(std::filesystem::exists(tmp.file(name)));
    }

    // 135 data rows under one header.
    const std::string csv = slurp(tmp.file("landscape.csv"));
    CHECK(count_occurrences(csv, "\n") == 136);
    auto parsed = parse_landscape_csv(tmp.file("landscape.csv"));
    CHECK(parsed.size() == 135);
    // Sorted per setting, epochs ascending; all-l2 plots first.
    CHECK(parsed[0].setting == "all-l2");
    CHECK(parsed[0].epoch == 1);
    CHECK(parsed[44].epoch == 45);
    CHECK(parsed[45].setting == "mix");

    // Stage-1 chart carries exactly epochs 1-15: the circle-marked series
    // draws 15 data markers plus one legend marker.
    const std::string stage1 = slurp(tmp.file("stage1.svg"));
    CHECK(count_occurrences(stage1, "<circle") == 16);
    CHECK(count_occurrences(stage1, "<polyline") == 3);
    const std::string all_stages = slurp(tmp.file("all_stages.svg"));
    CHECK(count_occurrences(all_stages, "<circle") == 46);

    CHECK_THROWS_AS(emit_landscape({}, tmp.str()), DataError);
}

TEST_CASE("landscape emission is byte deterministic") {
    testutil::TempDir a("emit_a");
    testutil::TempDir b("emit_b");
    std::vector<LandscapeRecord> records;
    for (const char* setting : {"mix", "all-l2"}) {
        for (int64_t e = 1; e <= 20; ++e) {
            records.push_back(sample_record(setting, e, 24.0 + 0.37 * static_cast<double>(e)));
        }
    }
    emit_landscape(records, a.str());
    // Shuffled input must normalize to the same bytes.
    std::vector<LandscapeRecord> reversed(records.rbegin(), records.rend());
    emit_landscape(reversed, b.str());
    CHECK(slurp(a.file("landscape.csv")) == slurp(b.file("landscape.csv")));
    CHECK(slurp(a.file("all_stages.svg")) == slurp(b.file("all_stages.svg")));
    CHECK(slurp(a.file("ordering_report.txt")) == slurp(b.file("ordering_report.txt")));
}
