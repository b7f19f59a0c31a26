#pragma once

// Support-vector sharing across the nodes of a trained tree. Every initial
// support vector (ISV) may be replaced by any candidate within Euclidean
// radius epsilon; choosing the fewest replacement vectors that cover all
// ISVs is a set-cover problem, solved greedily or exactly for small sizes.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bhcsvm/dataset.hpp"
#include "bhcsvm/error.hpp"
#include "bhcsvm/svm.hpp"
#include "bhcsvm/tree.hpp"

namespace bhcsvm {

struct IsvRecord {
    FeatureVector vector;
    int owner_node = 0;
    std::size_t entry_index = 0; // position inside the owner's model
    double coefficient = 0.0;
    std::size_t source_id = 0;
    std::size_t isv_index = 0;
};

enum class CandidateOrigin { isv, training_sample };

struct CandidateVector {
    FeatureVector vector;
    std::size_t candidate_index = 0;
    CandidateOrigin origin = CandidateOrigin::isv;
    std::size_t source_id = 0;
};

/// a[i][j] = 1 iff candidate i lies within epsilon of ISV j. Stored sparse
/// in both directions.
struct CoverageMatrix {
    double epsilon = 0.0;
    std::size_t candidates = 0;
    std::size_t isvs = 0;
    std::vector<std::vector<std::size_t>> covers;     // candidate -> ISV indices (ascending)
    std::vector<std::vector<std::size_t>> covered_by; // ISV -> candidate indices (ascending)

    bool at(std::size_t candidate, std::size_t isv) const {
        const auto& row = covers[candidate];
        return std::binary_search(row.begin(), row.end(), isv);
    }
};

struct FsvSelection {
    std::vector<std::size_t> chosen;     // candidate indices, ascending
    std::vector<std::size_t> assignment; // isv_index -> candidate index
    std::vector<std::uint8_t> x;         // x[i] = 1 iff candidate i is chosen
};

struct SavingsReport {
    std::size_t initial_stored = 0;
    std::size_t final_stored = 0;
    double savings_pct = 0.0;
    std::size_t overlap_count = 0;
};

/// ISVs, candidate pool and coverage for one tree and radius.
struct CoverProblem {
    std::vector<IsvRecord> isvs;
    std::vector<CandidateVector> candidates;
    CoverageMatrix coverage;
};

inline constexpr std::size_t default_exact_limit = 20;

/// Support entries of every internal node, preorder, tagged with the owner.
inline std::vector<IsvRecord> collect_initial_svs(const ClassifierTree& tree) {
    std::vector<IsvRecord> out;
    for (int id : internal_nodes(tree)) {
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (!node.model) throw Error("untrained: internal node " + std::to_string(id) + " has no model");
        for (std::size_t k = 0; k < node.model->entries.size(); ++k) {
            const auto& e = node.model->entries[k];
            out.push_back({e.vector, id, k, e.coefficient, e.source_id, out.size()});
        }
    }
    return out;
}

/// Distinct ISV vectors first (in ISV order), then training vectors not
/// already in the pool. Exact duplicates are kept once.
inline std::vector<CandidateVector> build_candidates(std::span<const IsvRecord> isvs,
                                                     std::span<const FeatureVector> training) {
    std::vector<CandidateVector> out;
    std::set<FeatureVector> seen;
    for (const auto& s : isvs) {
        if (!seen.insert(s.vector).second) continue;
        out.push_back({s.vector, out.size(), CandidateOrigin::isv, s.source_id});
    }
    for (std::size_t k = 0; k < training.size(); ++k) {
        if (!seen.insert(training[k]).second) continue;
        out.push_back({training[k], out.size(), CandidateOrigin::training_sample, k});
    }
    return out;
}

inline CoverageMatrix enumerate_secondary(std::span<const IsvRecord> isvs, std::span<const CandidateVector> candidates,
                                          double epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw Error("bad radius: epsilon must be a finite non-negative number");
    CoverageMatrix m;
    m.epsilon = epsilon;
    m.candidates = candidates.size();
    m.isvs = isvs.size();
    m.covers.assign(candidates.size(), {});
    m.covered_by.assign(isvs.size(), {});
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (std::size_t j = 0; j < isvs.size(); ++j) {
            if (candidates[i].vector.size() != isvs[j].vector.size()) throw Error("shape: candidate and ISV dimensions differ");
            if (euclidean_distance(candidates[i].vector, isvs[j].vector) <= epsilon) {
                m.covers[i].push_back(j);
                m.covered_by[j].push_back(i);
            }
        }
    }
    return m;
}

/// Coverage from an explicit relation (candidate -> covered ISV indices),
/// for instances that do not come from geometry.
inline CoverageMatrix make_coverage(std::vector<std::vector<std::size_t>> covers, std::size_t isvs, double epsilon = 0.0) {
    CoverageMatrix m;
    m.epsilon = epsilon;
    m.candidates = covers.size();
    m.isvs = isvs;
    m.covered_by.assign(isvs, {});
    for (std::size_t i = 0; i < covers.size(); ++i) {
        auto& row = covers[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        for (auto j : row) {
            if (j >= isvs) throw Error("shape: ISV index out of range");
            m.covered_by[j].push_back(i);
        }
    }
    m.covers = std::move(covers);
    return m;
}

inline CoverProblem make_cover_problem(const ClassifierTree& tree, std::span<const FeatureVector> training, double epsilon) {
    CoverProblem p;
    p.isvs = collect_initial_svs(tree);
    p.candidates = build_candidates(p.isvs, training);
    p.coverage = enumerate_secondary(p.isvs, p.candidates, epsilon);
    return p;
}

namespace detail {

inline FsvSelection selection_from_chosen(const CoverageMatrix& cov, std::vector<std::size_t> chosen) {
    std::sort(chosen.begin(), chosen.end());
    FsvSelection sel;
    sel.x.assign(cov.candidates, 0);
    for (auto c : chosen) sel.x[c] = 1;
    sel.assignment.assign(cov.isvs, std::numeric_limits<std::size_t>::max());
    for (std::size_t j = 0; j < cov.isvs; ++j) {
        for (auto c : cov.covered_by[j]) {
            if (sel.x[c]) {
                sel.assignment[j] = c;
                break;
            }
        }
        if (sel.assignment[j] == std::numeric_limits<std::size_t>::max()) throw Error("infeasible cover: ISV left uncovered");
    }
    sel.chosen = std::move(chosen);
    return sel;
}

} // namespace detail

/// Repeatedly picks the candidate covering the most still-uncovered ISVs
/// (lowest index on ties). Each ISV is assigned to the candidate of the
/// round that first covered it.
inline FsvSelection greedy_moc(const CoverageMatrix& cov) {
    for (std::size_t j = 0; j < cov.isvs; ++j)
        if (cov.covered_by[j].empty()) throw Error("infeasible cover: ISV " + std::to_string(j) + " has no candidate");
    FsvSelection sel;
    sel.x.assign(cov.candidates, 0);
    sel.assignment.assign(cov.isvs, std::numeric_limits<std::size_t>::max());
    std::vector<std::uint8_t> covered(cov.isvs, 0);
    std::size_t remaining = cov.isvs;
    while (remaining > 0) {
        std::size_t best = cov.candidates, best_gain = 0;
        for (std::size_t i = 0; i < cov.candidates; ++i) {
            if (sel.x[i]) continue;
            std::size_t gain = 0;
            for (auto j : cov.covers[i]) gain += covered[j] ? 0 : 1;
            if (gain > best_gain) {
                best_gain = gain;
                best = i;
            }
        }
        sel.x[best] = 1;
        sel.chosen.push_back(best);
        for (auto j : cov.covers[best]) {
            if (covered[j]) continue;
            covered[j] = 1;
            sel.assignment[j] = best;
            --remaining;
        }
    }
    std::sort(sel.chosen.begin(), sel.chosen.end());
    return sel;
}

/// Minimum-cardinality cover by branch and bound: dominated candidates are
/// dropped, branching is on the uncovered ISV with the fewest covering
/// candidates, and the bound is |chosen| + ceil(uncovered / largest cover).
/// ISVs are assigned to the lowest-index chosen candidate covering them.
inline FsvSelection exact_moc(const CoverageMatrix& cov, std::size_t limit = default_exact_limit) {
    if (limit > 64) throw Error("too large for exact solve: limit above 64");
    if (cov.isvs > limit) throw Error("too large for exact solve: " + std::to_string(cov.isvs) + " ISVs > limit " + std::to_string(limit));
    for (std::size_t j = 0; j < cov.isvs; ++j)
        if (cov.covered_by[j].empty()) throw Error("infeasible cover: ISV " + std::to_string(j) + " has no candidate");
    if (cov.isvs == 0) return detail::selection_from_chosen(cov, {});

    using Mask = std::uint64_t;
    const Mask full = cov.isvs == 64 ? ~Mask{0} : ((Mask{1} << cov.isvs) - 1);
    std::vector<Mask> mask(cov.candidates, 0);
    for (std::size_t i = 0; i < cov.candidates; ++i)
        for (auto j : cov.covers[i]) mask[i] |= Mask{1} << j;

    // Keep a candidate unless another covers a strict superset, or the same
    // set with a lower index.
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < cov.candidates; ++i) {
        if (mask[i] == 0) continue;
        bool dominated = false;
        for (std::size_t k = 0; k < cov.candidates && !dominated; ++k) {
            if (k == i || (mask[i] & ~mask[k]) != 0) continue;
            dominated = mask[k] != mask[i] || k < i;
        }
        if (!dominated) kept.push_back(i);
    }
    std::size_t widest = 0;
    for (auto i : kept) widest = std::max<std::size_t>(widest, static_cast<std::size_t>(std::popcount(mask[i])));

    std::vector<std::vector<std::size_t>> options(cov.isvs);
    for (auto i : kept)
        for (std::size_t j = 0; j < cov.isvs; ++j)
            if (mask[i] >> j & 1) options[j].push_back(i);

    std::vector<std::size_t> best = greedy_moc(cov).chosen;
    std::vector<std::size_t> current;
    auto search = [&](auto&& self, Mask covered) -> void {
        if (covered == full) {
            if (current.size() < best.size()) best = current;
            return;
        }
        const auto uncovered = static_cast<std::size_t>(std::popcount(full & ~covered));
        if (current.size() + (uncovered + widest - 1) / widest >= best.size()) return;
        std::size_t pivot = cov.isvs, fewest = std::numeric_limits<std::size_t>::max();
        for (std::size_t j = 0; j < cov.isvs; ++j) {
            if (covered >> j & 1) continue;
            if (options[j].size() < fewest) {
                fewest = options[j].size();
                pivot = j;
            }
        }
        for (auto i : options[pivot]) {
            current.push_back(i);
            self(self, covered | mask[i]);
            current.pop_back();
        }
    };
    search(search, 0);
    return detail::selection_from_chosen(cov, best);
}

/// Checks that `sel` is a feasible cover for `cov` (every ISV assigned to a
/// chosen candidate that covers it).
inline bool is_feasible(const CoverageMatrix& cov, const FsvSelection& sel) {
    if (sel.assignment.size() != cov.isvs || sel.x.size() != cov.candidates) return false;
    for (std::size_t j = 0; j < cov.isvs; ++j) {
        const auto c = sel.assignment[j];
        if (c >= cov.candidates || !sel.x[c] || !cov.at(c, j)) return false;
    }
    std::size_t ones = 0;
    for (auto v : sel.x) ones += v;
    return ones == sel.chosen.size();
}

inline SavingsReport savings(std::span<const IsvRecord> isvs, const FsvSelection& sel) {
    SavingsReport r;
    r.initial_stored = isvs.size();
    r.final_stored = sel.chosen.size();
    // Same expression as TreeStats::initial_overlap_pct, so the identity
    // selection reproduces the initial overlap bit for bit.
    r.savings_pct = r.initial_stored == 0 ? 0.0
                                          : 100.0 * static_cast<double>(r.initial_stored - r.final_stored) /
                                                static_cast<double>(r.initial_stored);
    std::map<std::size_t, std::set<int>> owners;
    for (std::size_t j = 0; j < isvs.size() && j < sel.assignment.size(); ++j) owners[sel.assignment[j]].insert(isvs[j].owner_node);
    for (const auto& [cand, nodes] : owners)
        if (nodes.size() >= 2) ++r.overlap_count;
    return r;
}

namespace detail {

/// Threshold maximizing training accuracy of sign(g(x) + b) against
/// labels (+1 = left). Candidates are midpoints between consecutive
/// distinct -g values plus one value beyond each end; ties go to the
/// candidate closest to `previous`.
inline double refit_bias(std::span<const double> g, std::span<const int> y, double previous) {
    std::vector<std::pair<double, int>> s;
    s.reserve(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) s.push_back({-g[k], y[k]});
    std::sort(s.begin(), s.end());
    if (s.empty()) return previous;
    std::size_t neg_total = 0;
    for (const auto& p : s) neg_total += p.second == -1;

    // With threshold b: +1 correct iff s <= b, -1 correct iff s > b.
    double best_b = s.front().first - 1.0;
    std::size_t best_correct = neg_total;
    auto consider = [&](double b, std::size_t correct) {
        if (correct > best_correct || (correct == best_correct && std::abs(b - previous) < std::abs(best_b - previous))) {
            best_correct = correct;
            best_b = b;
        }
    };
    std::size_t pos_below = 0, neg_below = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        (s[k].second == 1 ? pos_below : neg_below) += 1;
        if (k + 1 < s.size() && s[k + 1].first == s[k].first) continue;
        const double b = k + 1 < s.size() ? s[k].first + (s[k + 1].first - s[k].first) / 2.0 : s[k].first + 1.0;
        consider(b, pos_below + (neg_total - neg_below));
    }
    return best_b;
}

} // namespace detail

/// Rewrites every node model so each ISV vector is replaced by its assigned
/// FSV; entries of one node sharing an FSV are merged by summing
/// coefficients. Nodes whose vectors changed get their bias re-fit to the
/// best training accuracy on their own binary split; untouched nodes are
/// left bit-for-bit unchanged.
inline ClassifierTree rebuild_models(ClassifierTree tree, const CoverProblem& problem, const FsvSelection& sel,
                                     const LabeledDataset& train) {
    const auto current = collect_initial_svs(tree);
    if (current.size() != problem.isvs.size() || sel.assignment.size() != problem.isvs.size() ||
        sel.x.size() != problem.candidates.size())
        throw Error("stale selection: selection does not match the tree");
    for (std::size_t j = 0; j < current.size(); ++j) {
        const auto& a = current[j];
        const auto& b = problem.isvs[j];
        if (a.owner_node != b.owner_node || a.vector != b.vector || a.coefficient != b.coefficient)
            throw Error("stale selection: ISV " + std::to_string(j) + " differs from the tree");
        const auto c = sel.assignment[j];
        if (c >= problem.candidates.size() || !sel.x[c]) throw Error("stale selection: ISV assigned to an unchosen candidate");
    }

    std::size_t j = 0;
    for (int id : internal_nodes(tree)) {
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        auto& model = *node.model;
        bool changed = false;
        std::vector<SupportEntry> merged;
        std::map<std::size_t, std::size_t> slot_of; // candidate -> position in merged
        for (const auto& e : model.entries) {
            const auto& cand = problem.candidates[sel.assignment[j++]];
            if (cand.vector != e.vector) changed = true;
            auto [it, fresh] = slot_of.try_emplace(cand.candidate_index, merged.size());
            if (fresh) merged.push_back({cand.vector, e.coefficient, cand.source_id});
            else {
                merged[it->second].coefficient += e.coefficient;
                changed = true;
            }
        }
        if (!changed) continue;
        std::erase_if(merged, [](const SupportEntry& e) { return e.coefficient == 0.0; });
        model.entries = std::move(merged);

        std::set<int> left(node.left_classes.begin(), node.left_classes.end());
        std::set<int> right(node.right_classes.begin(), node.right_classes.end());
        std::vector<double> g;
        std::vector<int> y;
        for (std::size_t k = 0; k < train.size(); ++k) {
            const int l = train.labels[k];
            if (!left.count(l) && !right.count(l)) continue;
            g.push_back(margin_without_bias(model, train.features[k]));
            y.push_back(left.count(l) ? 1 : -1);
        }
        model.bias = detail::refit_bias(g, y, model.bias);
        std::size_t correct = 0;
        for (std::size_t k = 0; k < g.size(); ++k) correct += ((g[k] + model.bias >= 0.0) == (y[k] == 1)) ? 1 : 0;
        node.train_accuracy = g.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(g.size());
    }
    return tree;
}

} // namespace bhcsvm
