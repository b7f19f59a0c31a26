#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bhcsvm/evaluation.hpp"

using namespace bhcsvm;

namespace {

const std::vector<double> p1{20, 20, 5, 5, 10, 40};
const std::vector<double> p2{33, 5, 10, 10, 12, 30};
const std::vector<double> p3{10, 13, 42, 10, 5, 20};
const std::vector<double> p4{10, 10, 15, 15, 25, 25};
const std::vector<double> p5{8, 10, 7, 12, 21, 42};

LabeledDataset six_class() {
    SynthSpec spec;
    spec.n_classes = 6;
    spec.dimension = 8;
    spec.seed = 7;
    return synth_generate(spec);
}

struct Fixture {
    Split split = stratified_split(six_class(), 7);
    ClassifierTree tree = attach_classifiers(build_unconstrained(make_classes(p1)), split.train, {});
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

SweepReport small_grid_report(bool exact) {
    SweepConfig cfg;
    for (int k = 0; k <= 10; ++k) cfg.epsilon_grid.push_back(k / 10.0);
    cfg.exact_oracle = exact;
    cfg.exact_limit = 64;
    cfg.accuracy_floor = 0.9;
    return sweep_epsilon(fixture().tree, fixture().split, cfg);
}

} // namespace

TEST(Accuracy, PerfectAndSingleClass) {
    const auto& f = fixture();
    LabeledDataset right;
    right.dimension = 8;
    for (std::size_t k = 0; k < f.split.test.size(); ++k) {
        if (classify_sample(f.tree, f.split.test.features[k]).class_id != f.split.test.labels[k]) continue;
        right.features.push_back(f.split.test.features[k]);
        right.labels.push_back(f.split.test.labels[k]);
    }
    EXPECT_EQ(accuracy(f.tree, right), 1.0);

    auto leaf = build_unconstrained(make_classes({1}));
    LabeledDataset same;
    same.dimension = 1;
    same.features = {{1.0}, {2.0}};
    same.labels = {0, 0};
    EXPECT_EQ(accuracy(leaf, same), 1.0);
    EXPECT_THROW(accuracy(leaf, LabeledDataset{}), Error);
}

TEST(Accuracy, PinnedSixClassBaseline) {
    // Regression value recorded from the first verified run (179/180).
    EXPECT_EQ(accuracy(fixture().tree, fixture().split.test), 179.0 / 180.0);
}

TEST(SweepEpsilon, ZeroRadiusRecordIsIdentity) {
    auto r = small_grid_report(false);
    ASSERT_FALSE(r.records.empty());
    const auto& zero = r.records.front();
    EXPECT_EQ(zero.epsilon, 0.0);
    EXPECT_EQ(zero.accuracy, r.baseline_accuracy);
    ASSERT_TRUE(r.tree_stats.initial_overlap_pct.has_value());
    EXPECT_EQ(zero.savings_pct, *r.tree_stats.initial_overlap_pct);
    EXPECT_EQ(zero.final_stored, r.tree_stats.distinct_vectors);
}

TEST(SweepEpsilon, ElevenPointGridExactNonIncreasing) {
    auto r = small_grid_report(true);
    ASSERT_EQ(r.records.size(), 11u);
    for (std::size_t k = 0; k < r.records.size(); ++k) {
        EXPECT_EQ(r.records[k].solver, CoverSolver::exact);
        if (k > 0) {
            EXPECT_LE(r.records[k].final_stored, r.records[k - 1].final_stored);
        }
    }
}

TEST(SweepEpsilon, SavingsAndStoredAddUp) {
    for (bool exact : {false, true}) {
        auto r = small_grid_report(exact);
        for (const auto& rec : r.records) {
            const double stored_pct = 100.0 * static_cast<double>(rec.final_stored) / static_cast<double>(r.initial_stored);
            EXPECT_NEAR(rec.savings_pct + stored_pct, 100.0, 1e-9);
            EXPECT_EQ(rec.meets_floor, rec.accuracy >= 0.9);
        }
    }
}

TEST(SweepEpsilon, DefaultGridAndFallback) {
    SweepConfig cfg;
    cfg.exact_oracle = true; // ISV count exceeds the default limit, so greedy runs
    auto r = sweep_epsilon(fixture().tree, fixture().split, cfg);
    ASSERT_EQ(r.records.size(), 21u);
    EXPECT_EQ(r.config.epsilon_grid.size(), 21u);
    for (const auto& rec : r.records) EXPECT_EQ(rec.solver, CoverSolver::greedy);
}

TEST(SweepEpsilon, OneCandidateCoversAll) {
    SweepConfig cfg;
    cfg.epsilon_grid = {1e6};
    auto r = sweep_epsilon(fixture().tree, fixture().split, cfg);
    ASSERT_EQ(r.records.size(), 2u); // zero prepended
    const auto n = static_cast<double>(r.initial_stored);
    EXPECT_EQ(r.records[1].final_stored, 1u);
    EXPECT_NEAR(r.records[1].savings_pct, 100.0 * (n - 1.0) / n, 1e-12);
}

TEST(SweepEpsilon, BadInputs) {
    SweepConfig cfg;
    cfg.epsilon_grid = {0.5, 0.1};
    EXPECT_THROW(sweep_epsilon(fixture().tree, fixture().split, cfg), Error);
    cfg.epsilon_grid = {-1.0};
    EXPECT_THROW(sweep_epsilon(fixture().tree, fixture().split, cfg), Error);
    cfg.epsilon_grid = {};
    cfg.accuracy_floor = 1.5;
    EXPECT_THROW(sweep_epsilon(fixture().tree, fixture().split, cfg), Error);
    auto untrained = build_unconstrained(make_classes(p1));
    EXPECT_THROW(sweep_epsilon(untrained, fixture().split, SweepConfig{}), Error);
}

TEST(NormalizeGrid, PrependsZero) {
    EXPECT_EQ(normalize_grid({0.2, 0.4}), (std::vector<double>{0.0, 0.2, 0.4}));
    EXPECT_EQ(normalize_grid({0.0, 0.4}), (std::vector<double>{0.0, 0.4}));
    EXPECT_EQ(normalize_grid({}), (std::vector<double>{0.0}));
}

TEST(CompareStructures, FiveReferenceDistributions) {
    SweepConfig cfg;
    cfg.epsilon_grid = {0.0, 1.0};
    auto out = compare_structures({p1, p2, p3, p4, p5}, six_class(), {}, {}, cfg);
    ASSERT_EQ(out.size(), 5u);
    EXPECT_EQ(out[0].stats.depth, 5u);
    EXPECT_EQ(out[0].stats.expected_instructions, 230.0);
    EXPECT_EQ(out[3].stats.depth, 3u);
    EXPECT_EQ(out[3].stats.expected_instructions, 250.0);
    EXPECT_EQ(out[4].stats.depth, 4u);
    EXPECT_EQ(out[4].stats.expected_instructions, 231.0);
    for (const auto& s : out) EXPECT_EQ(s.report.records.size(), 2u);
}

TEST(CompareStructures, DeterministicAndOrderInvariant) {
    SweepConfig cfg;
    cfg.epsilon_grid = {0.0, 0.5, 1.5};
    const auto ds = six_class();
    auto a = compare_structures({p1, p4}, ds, {}, {}, cfg);
    auto b = compare_structures({p4, p1}, ds, {}, {}, cfg);
    auto c = compare_structures({p1, p1}, ds, {}, {}, cfg);
    EXPECT_EQ(a[0].report.records, b[1].report.records);
    EXPECT_EQ(a[1].report.records, b[0].report.records);
    EXPECT_EQ(c[0].report.records, c[1].report.records);
    EXPECT_EQ(a[0].report.baseline_accuracy, b[1].report.baseline_accuracy);
}

TEST(CompareStructures, Arity) {
    try {
        compare_structures({{20, 20, 20, 20, 20}}, six_class(), {}, {}, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("arity"), std::string::npos);
    }
}

TEST(Report, CsvShapeAndRoundTrip) {
    auto r = small_grid_report(false);
    std::stringstream ss;
    write_report_csv(ss, r);
    const auto text = ss.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
    EXPECT_EQ(text.substr(0, text.find('\n')), sweep_csv_header);
    EXPECT_EQ(read_report_csv(ss), r.records);
}

TEST(Report, TextRoundTrip) {
    auto r = small_grid_report(true);
    std::stringstream ss;
    write_report_text(ss, r);
    auto back = read_report_text(ss);
    EXPECT_EQ(back.records, r.records);
    EXPECT_EQ(back.config.epsilon_grid, r.config.epsilon_grid);
    EXPECT_EQ(back.baseline_accuracy, r.baseline_accuracy);
    EXPECT_EQ(back.initial_stored, r.initial_stored);
    EXPECT_EQ(back.tree_stats.depth, r.tree_stats.depth);
    EXPECT_EQ(back.tree_stats.initial_overlap_pct, r.tree_stats.initial_overlap_pct);
    EXPECT_EQ(back.config.exact_limit, 64u);
    EXPECT_TRUE(back.config.exact_oracle);
}

TEST(Report, EmitToFile) {
    auto r = small_grid_report(false);
    const auto dir = std::filesystem::temp_directory_path() / "bhcsvm_report_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "sweep.csv").string();
    emit_report(r, path, ReportFormat::csv);
    std::ifstream in(path);
    EXPECT_EQ(read_report_csv(in), r.records);
    try {
        emit_report(r, (dir / "missing" / "x.csv").string(), ReportFormat::csv);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
    }
    std::filesystem::remove_all(dir);
}
