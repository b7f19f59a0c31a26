#pragma once

// Accuracy measurement, epsilon sweeps (memory savings vs. accuracy) and
// report files.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "bhcsvm/cover.hpp"
#include "bhcsvm/data.hpp"
#include "bhcsvm/dataset.hpp"
#include "bhcsvm/error.hpp"
#include "bhcsvm/text.hpp"
#include "bhcsvm/tree.hpp"

namespace bhcsvm {

struct SweepConfig {
    std::vector<double> epsilon_grid; // empty: default_epsilon_grid()
    double accuracy_floor = 0.0;      // CA, fraction in [0, 1]
    bool exact_oracle = false;
    std::size_t exact_limit = default_exact_limit;
    std::uint64_t split_seed = 7;
};

enum class CoverSolver { greedy, exact };

struct SweepRecord {
    double epsilon = 0.0;
    double savings_pct = 0.0;
    double accuracy = 0.0;
    std::size_t final_stored = 0;
    std::size_t overlap_count = 0;
    bool meets_floor = false;
    CoverSolver solver = CoverSolver::greedy;

    bool operator==(const SweepRecord&) const = default;
};

struct SweepReport {
    TreeStats tree_stats;
    double baseline_accuracy = 0.0;
    std::size_t initial_stored = 0;
    SweepConfig config; // echo, with the grid actually used
    std::vector<SweepRecord> records;
};

enum class ReportFormat { csv, text };

inline constexpr const char* sweep_csv_header = "epsilon,savings_pct,accuracy,final_stored,overlap_count,meets_floor";

inline double accuracy(const ClassifierTree& tree, const LabeledDataset& test) {
    if (test.size() == 0) throw Error("empty: test set has no samples");
    std::size_t correct = 0;
    for (std::size_t k = 0; k < test.size(); ++k)
        if (classify_sample(tree, test.features[k]).class_id == test.labels[k]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

/// `points` values evenly spaced on [0, 2 * median nearest-neighbour
/// distance between distinct ISV vectors]; {0} when fewer than two
/// distinct ISVs exist.
inline std::vector<double> default_epsilon_grid(std::span<const IsvRecord> isvs, std::size_t points = 21) {
    std::set<FeatureVector> distinct;
    for (const auto& s : isvs) distinct.insert(s.vector);
    if (distinct.size() < 2 || points < 2) return {0.0};
    std::vector<const FeatureVector*> v;
    for (const auto& x : distinct) v.push_back(&x);
    std::vector<double> nn;
    for (std::size_t a = 0; a < v.size(); ++a) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < v.size(); ++b)
            if (a != b) best = std::min(best, euclidean_distance(*v[a], *v[b]));
        nn.push_back(best);
    }
    std::sort(nn.begin(), nn.end());
    const std::size_t m = nn.size();
    const double median = m % 2 ? nn[m / 2] : (nn[m / 2 - 1] + nn[m / 2]) / 2.0;
    std::vector<double> grid;
    for (std::size_t k = 0; k < points; ++k)
        grid.push_back(2.0 * median * static_cast<double>(k) / static_cast<double>(points - 1));
    return grid;
}

inline std::vector<double> normalize_grid(std::vector<double> grid) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] >= 0.0) || !std::isfinite(grid[k])) throw Error("bad grid: epsilon values must be finite and non-negative");
        if (k > 0 && grid[k] < grid[k - 1]) throw Error("bad grid: epsilon values must be sorted ascending");
    }
    if (grid.empty() || grid.front() != 0.0) grid.insert(grid.begin(), 0.0);
    return grid;
}

/// One record per radius: coverage -> cover (exact when requested and the
/// ISV count is within the limit, greedy otherwise) -> rebuilt tree ->
/// savings and held-out accuracy.
inline SweepReport sweep_epsilon(const ClassifierTree& tree, const Split& split, const SweepConfig& cfg) {
    if (!is_trained(tree)) throw Error("untrained: sweep needs a trained tree");
    if (!(cfg.accuracy_floor >= 0.0 && cfg.accuracy_floor <= 1.0)) throw Error("bad config: accuracy floor must be in [0, 1]");
    SweepReport report;
    report.tree_stats = tree_stats(tree);
    report.baseline_accuracy = accuracy(tree, split.test);

    const auto isvs = collect_initial_svs(tree);
    const auto candidates = build_candidates(isvs, split.train.features);
    report.initial_stored = isvs.size();
    report.config = cfg;
    report.config.epsilon_grid = normalize_grid(cfg.epsilon_grid.empty() ? default_epsilon_grid(isvs) : cfg.epsilon_grid);

    for (double eps : report.config.epsilon_grid) {
        CoverProblem problem{isvs, candidates, enumerate_secondary(isvs, candidates, eps)};
        SweepRecord rec;
        rec.epsilon = eps;
        FsvSelection sel;
        if (cfg.exact_oracle && isvs.size() <= cfg.exact_limit) {
            sel = exact_moc(problem.coverage, cfg.exact_limit);
            rec.solver = CoverSolver::exact;
        } else {
            sel = greedy_moc(problem.coverage);
        }
        const auto rebuilt = rebuild_models(tree, problem, sel, split.train);
        const auto s = savings(isvs, sel);
        rec.savings_pct = s.savings_pct;
        rec.final_stored = s.final_stored;
        rec.overlap_count = s.overlap_count;
        rec.accuracy = accuracy(rebuilt, split.test);
        rec.meets_floor = rec.accuracy >= cfg.accuracy_floor;
        report.records.push_back(rec);
    }
    return report;
}

struct StructureResult {
    TreeStats stats;
    SweepReport report;
};

/// One tree per probability list over the dataset's classes (ids in
/// ascending order), each trained on the same seeded split and swept.
inline std::vector<StructureResult> compare_structures(const std::vector<std::vector<double>>& distributions,
                                                       const LabeledDataset& dataset, const TrainConfig& train_cfg,
                                                       const TreeBuildConfig& build_cfg, const SweepConfig& sweep_cfg) {
    for (const auto& d : distributions)
        if (d.size() != dataset.classes.size())
            throw Error("arity: distribution has " + std::to_string(d.size()) + " entries for " +
                        std::to_string(dataset.classes.size()) + " classes");
    const Split split = stratified_split(dataset, sweep_cfg.split_seed);
    std::vector<StructureResult> out;
    for (const auto& d : distributions) {
        auto classes = make_classes(d);
        for (std::size_t k = 0; k < classes.size(); ++k) {
            classes[k].id = dataset.classes[k].id;
            classes[k].name = dataset.classes[k].name;
        }
        auto tree = attach_classifiers(build_tree(std::move(classes), build_cfg), split.train, train_cfg);
        auto report = sweep_epsilon(tree, split, sweep_cfg);
        out.push_back({report.tree_stats, std::move(report)});
    }
    return out;
}

inline const char* solver_name(CoverSolver s) { return s == CoverSolver::exact ? "exact" : "greedy"; }

inline void write_report_csv(std::ostream& os, const SweepReport& r) {
    os << sweep_csv_header << '\n';
    for (const auto& rec : r.records)
        os << text::real17(rec.epsilon) << ',' << text::real17(rec.savings_pct) << ',' << text::real17(rec.accuracy) << ','
           << rec.final_stored << ',' << rec.overlap_count << ',' << (rec.meets_floor ? 1 : 0) << '\n';
}

/// Full report: header block with tree statistics and the config echo,
/// then one whitespace-separated line per record (CSV columns + solver).
inline void write_report_text(std::ostream& os, const SweepReport& r) {
    os << "bhcsvm-sweep 1\n";
    os << "depth " << r.tree_stats.depth << '\n';
    os << "expected_instructions " << text::real17(r.tree_stats.expected_instructions) << '\n';
    os << "initial_overlap_pct "
       << (r.tree_stats.initial_overlap_pct ? text::real17(*r.tree_stats.initial_overlap_pct) : std::string("none")) << '\n';
    os << "baseline_accuracy " << text::real17(r.baseline_accuracy) << '\n';
    os << "initial_stored " << r.initial_stored << '\n';
    os << "accuracy_floor " << text::real17(r.config.accuracy_floor) << '\n';
    os << "exact_oracle " << (r.config.exact_oracle ? 1 : 0) << '\n';
    os << "exact_limit " << r.config.exact_limit << '\n';
    os << "split_seed " << r.config.split_seed << '\n';
    os << "records " << r.records.size() << '\n';
    for (const auto& rec : r.records)
        os << text::real17(rec.epsilon) << ' ' << text::real17(rec.savings_pct) << ' ' << text::real17(rec.accuracy) << ' '
           << rec.final_stored << ' ' << rec.overlap_count << ' ' << (rec.meets_floor ? 1 : 0) << ' ' << solver_name(rec.solver)
           << '\n';
    os << "end\n";
}

namespace detail {

inline SweepRecord parse_record(const std::vector<std::string_view>& f, bool with_solver) {
    if (f.size() != (with_solver ? 7u : 6u)) throw Error("parse error: sweep record has the wrong number of fields");
    SweepRecord rec;
    rec.epsilon = text::expect_real(f[0], "sweep record");
    rec.savings_pct = text::expect_real(f[1], "sweep record");
    rec.accuracy = text::expect_real(f[2], "sweep record");
    rec.final_stored = text::expect_int<std::size_t>(f[3], "sweep record");
    rec.overlap_count = text::expect_int<std::size_t>(f[4], "sweep record");
    if (f[5] != "0" && f[5] != "1") throw Error("parse error: meets_floor must be 0 or 1");
    rec.meets_floor = f[5] == "1";
    if (with_solver) {
        if (f[6] == "exact") rec.solver = CoverSolver::exact;
        else if (f[6] != "greedy") throw Error("parse error: unknown solver");
    }
    return rec;
}

} // namespace detail

/// Records only; the CSV does not carry the solver column.
inline std::vector<SweepRecord> read_report_csv(std::istream& is) {
    std::string line;
    if (!getline_trimmed(is, line) || line != sweep_csv_header) throw Error("schema mismatch: unexpected sweep CSV header");
    std::vector<SweepRecord> out;
    while (getline_trimmed(is, line)) {
        if (line.empty()) continue;
        out.push_back(detail::parse_record(text::split(line, ','), false));
    }
    return out;
}

inline SweepReport read_report_text(std::istream& is) {
    std::string line;
    auto field = [&](const char* key) -> std::string_view {
        if (!next_content_line(is, line)) throw Error(std::string("parse error: missing ") + key);
        auto tok = text::split_ws(line);
        if (tok.size() != 2 || tok[0] != key) throw Error(std::string("parse error: expected '") + key + "'");
        return tok[1];
    };
    if (!next_content_line(is, line) || line != "bhcsvm-sweep 1") throw Error("parse error: not a bhcsvm-sweep v1 report");
    SweepReport r;
    r.tree_stats.depth = text::expect_int<std::size_t>(field("depth"), "report");
    r.tree_stats.expected_instructions = text::expect_real(field("expected_instructions"), "report");
    auto overlap = field("initial_overlap_pct");
    if (overlap != "none") r.tree_stats.initial_overlap_pct = text::expect_real(overlap, "report");
    r.baseline_accuracy = text::expect_real(field("baseline_accuracy"), "report");
    r.initial_stored = text::expect_int<std::size_t>(field("initial_stored"), "report");
    r.config.accuracy_floor = text::expect_real(field("accuracy_floor"), "report");
    r.config.exact_oracle = field("exact_oracle") == "1";
    r.config.exact_limit = text::expect_int<std::size_t>(field("exact_limit"), "report");
    r.config.split_seed = text::expect_int<std::uint64_t>(field("split_seed"), "report");
    const auto n = text::expect_int<std::size_t>(field("records"), "report");
    for (std::size_t k = 0; k < n; ++k) {
        if (!next_content_line(is, line)) throw Error("parse error: truncated sweep report");
        r.records.push_back(detail::parse_record(text::split_ws(line), true));
        r.config.epsilon_grid.push_back(r.records.back().epsilon);
    }
    if (!next_content_line(is, line) || line != "end") throw Error("parse error: expected 'end'");
    return r;
}

inline void emit_report(const SweepReport& report, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io: cannot write " + path);
    if (format == ReportFormat::csv) write_report_csv(out, report);
    else write_report_text(out, report);
    out.flush();
    if (!out) throw Error("io: write failed for " + path);
}

inline bool any_meets_floor(const SweepReport& r) {
    return std::any_of(r.records.begin(), r.records.end(), [](const SweepRecord& rec) { return rec.meets_floor; });
}

} // namespace bhcsvm
