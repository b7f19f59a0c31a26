#pragma once

// Binary hierarchical classifier: a full binary tree whose leaves are
// activity classes and whose internal nodes hold binary SVMs. Shapes come
// from Huffman merging (minimum expected number of classifier evaluations)
// or, under a depth bound, from package-merge.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bhcsvm/dataset.hpp"
#include "bhcsvm/error.hpp"
#include "bhcsvm/svm.hpp"

namespace bhcsvm {

struct TreeNode {
    int left = -1;
    int right = -1;
    int class_index = -1; // leaf only: index into ClassifierTree::classes
    std::vector<int> left_classes;  // class ids under the left child
    std::vector<int> right_classes; // class ids under the right child
    std::optional<BinaryNodeModel> model;
    std::optional<double> train_accuracy;

    bool is_leaf() const { return class_index >= 0; }
};

/// Nodes are stored in preorder; nodes[0] is the root.
struct ClassifierTree {
    std::vector<ActivityClass> classes;
    std::vector<TreeNode> nodes;

    const TreeNode& root() const { return nodes.front(); }
    std::size_t class_count() const { return classes.size(); }
};

enum class TieBreak {
    /// Equal weights: most recent composite first, then lowest class index.
    recent_composite_first,
};

struct TreeBuildConfig {
    std::optional<std::size_t> depth_limit;
    TieBreak tie_break = TieBreak::recent_composite_first;
};

struct NodeStats {
    int node = 0;
    std::size_t support_vectors = 0;
    std::optional<double> train_accuracy;
};

struct TreeStats {
    std::size_t depth = 0;
    double expected_instructions = 0.0; // per-hundred probability units
    std::optional<double> initial_overlap_pct;
    std::size_t stored_vectors = 0;   // sum over nodes of |SV|
    std::size_t distinct_vectors = 0; // exact-equality distinct SVs
    std::vector<NodeStats> nodes;
};

struct Classification {
    int class_id = 0;
    std::size_t path_length = 0;
};

/// ceil(log2(n)) for n >= 1.
inline std::size_t min_feasible_depth(std::size_t n) {
    std::size_t d = 0;
    while ((std::size_t{1} << d) < n) ++d;
    return d;
}

namespace detail {

/// Scratch tree built with arbitrary node ids, converted to preorder at the end.
struct ShapeBuilder {
    struct Node {
        int left = -1, right = -1, class_index = -1;
    };
    std::vector<Node> nodes;

    int add_leaf(int class_index) {
        nodes.push_back({-1, -1, class_index});
        return static_cast<int>(nodes.size()) - 1;
    }
    int add_internal(int left, int right) {
        nodes.push_back({left, right, -1});
        return static_cast<int>(nodes.size()) - 1;
    }

    ClassifierTree finish(std::vector<ActivityClass> classes, int root) const {
        ClassifierTree tree;
        tree.classes = std::move(classes);
        std::function<int(int)> visit = [&](int id) -> int {
            const int slot = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            const Node& src = nodes[static_cast<std::size_t>(id)];
            if (src.class_index >= 0) {
                tree.nodes[static_cast<std::size_t>(slot)].class_index = src.class_index;
                return slot;
            }
            const int l = visit(src.left);
            const int r = visit(src.right);
            auto& dst = tree.nodes[static_cast<std::size_t>(slot)];
            dst.left = l;
            dst.right = r;
            return slot;
        };
        visit(root);
        std::function<std::vector<int>(int)> collect = [&](int id) -> std::vector<int> {
            auto& node = tree.nodes[static_cast<std::size_t>(id)];
            if (node.is_leaf()) return {tree.classes[static_cast<std::size_t>(node.class_index)].id};
            auto l = collect(node.left);
            auto r = collect(node.right);
            std::sort(l.begin(), l.end());
            std::sort(r.begin(), r.end());
            auto& n = tree.nodes[static_cast<std::size_t>(id)];
            n.left_classes = l;
            n.right_classes = r;
            std::vector<int> all = l;
            all.insert(all.end(), r.begin(), r.end());
            return all;
        };
        collect(0);
        return tree;
    }
};

inline void validate_classes(std::span<const ActivityClass> classes) {
    if (classes.empty()) throw Error("empty: no classes");
    double total = 0.0;
    std::set<int> ids;
    for (const auto& c : classes) {
        if (!std::isfinite(c.weight) || c.weight < 0.0) throw Error("bad probability: class weight must be non-negative");
        if (!(c.probability >= 0.0 && c.probability <= 1.0)) throw Error("bad probability: outside [0,1]");
        if (!ids.insert(c.id).second) throw Error("bad class set: duplicate class id");
        total += c.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("bad probability: probabilities do not sum to 1");
}

inline bool same_weight(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Builds a full binary tree realizing the given leaf depths (Kraft sum 1).
inline ClassifierTree tree_from_depths(std::vector<ActivityClass> classes, const std::vector<std::size_t>& depths) {
    ShapeBuilder b;
    const std::size_t n = classes.size();
    if (n == 1) {
        int root = b.add_leaf(0);
        return b.finish(std::move(classes), root);
    }
    const std::size_t max_depth = *std::max_element(depths.begin(), depths.end());
    std::vector<int> carried; // composites produced by the level below
    for (std::size_t d = max_depth; d >= 1; --d) {
        std::vector<int> level = carried;
        for (std::size_t k = 0; k < n; ++k)
            if (depths[k] == d) level.push_back(b.add_leaf(static_cast<int>(k)));
        if (level.size() % 2 != 0) throw Error("depth profile: not a full binary tree");
        carried.clear();
        for (std::size_t k = 0; k < level.size(); k += 2) carried.push_back(b.add_internal(level[k], level[k + 1]));
    }
    if (carried.size() != 1) throw Error("depth profile: not a full binary tree");
    return b.finish(std::move(classes), carried.front());
}

} // namespace detail

/// Depth of every leaf, indexed like tree.classes. Root depth is 0.
inline std::vector<std::size_t> leaf_depths(const ClassifierTree& tree) {
    std::vector<std::size_t> out(tree.classes.size(), 0);
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (node.is_leaf()) {
            out[static_cast<std::size_t>(node.class_index)] = d;
        } else {
            stack.push_back({node.right, d + 1});
            stack.push_back({node.left, d + 1});
        }
    }
    return out;
}

inline std::size_t tree_depth(const ClassifierTree& tree) {
    auto d = leaf_depths(tree);
    return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
}

/// E(I) = 100 * sum(w_i * l_i) / sum(w_i), i.e. sum(p_i * l_i) in percent
/// units. Using raw weights keeps integer-percent inputs exact.
inline double expected_instructions(const ClassifierTree& tree) {
    const auto depths = leaf_depths(tree);
    double num = 0.0, total = 0.0;
    for (std::size_t k = 0; k < tree.classes.size(); ++k) {
        num += tree.classes[k].weight * static_cast<double>(depths[k]);
        total += tree.classes[k].weight;
    }
    return total > 0.0 ? 100.0 * num / total : 0.0;
}

/// Internal node ids in preorder.
inline std::vector<int> internal_nodes(const ClassifierTree& tree) {
    std::vector<int> out;
    for (std::size_t k = 0; k < tree.nodes.size(); ++k)
        if (!tree.nodes[k].is_leaf()) out.push_back(static_cast<int>(k));
    return out;
}

inline bool is_trained(const ClassifierTree& tree) {
    for (const auto& n : tree.nodes)
        if (!n.is_leaf() && !n.model) return false;
    return true;
}

/// Huffman merging: repeatedly joins the two lightest trees. Ties follow
/// TieBreak::recent_composite_first; the first pick becomes the left child.
inline ClassifierTree build_unconstrained(std::vector<ActivityClass> classes, const TreeBuildConfig& cfg = {}) {
    if (classes.empty()) throw Error("empty: no classes");
    detail::validate_classes(classes);
    (void)cfg;
    struct Item {
        double weight;
        int node;
        bool composite;
        std::size_t order; // class index for leaves, creation index for composites
    };
    detail::ShapeBuilder b;
    std::vector<Item> forest;
    for (std::size_t k = 0; k < classes.size(); ++k)
        forest.push_back({classes[k].weight, b.add_leaf(static_cast<int>(k)), false, k});

    auto preferred = [](const Item& a, const Item& c) {
        if (!detail::same_weight(a.weight, c.weight)) return a.weight < c.weight;
        if (a.composite != c.composite) return a.composite;
        return a.composite ? a.order > c.order : a.order < c.order;
    };
    auto take_min = [&] {
        std::size_t best = 0;
        for (std::size_t k = 1; k < forest.size(); ++k)
            if (preferred(forest[k], forest[best])) best = k;
        Item it = forest[best];
        forest.erase(forest.begin() + static_cast<std::ptrdiff_t>(best));
        return it;
    };
    std::size_t created = 0;
    while (forest.size() > 1) {
        Item a = take_min();
        Item c = take_min();
        forest.push_back({a.weight + c.weight, b.add_internal(a.node, c.node), true, created++});
    }
    return b.finish(std::move(classes), forest.front().node);
}

/// Optimal leaf depths under max depth `limit` (package-merge / coin
/// collector), indexed like `classes`. Shorter depths go to heavier classes.
inline std::vector<std::size_t> package_merge_depths(std::span<const ActivityClass> classes, std::size_t limit) {
    const std::size_t n = classes.size();
    if (n == 1) return {0};
    if (limit < min_feasible_depth(n)) throw Error("depth infeasible: 2^L is smaller than the class count");

    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return classes[a].weight < classes[b].weight; });

    struct Item {
        double weight;
        std::vector<std::size_t> count; // occurrences of each class in this package
    };
    std::vector<Item> leaves;
    for (std::size_t k : order) {
        Item it{classes[k].weight, std::vector<std::size_t>(n, 0)};
        it.count[k] = 1;
        leaves.push_back(std::move(it));
    }
    std::vector<Item> current = leaves;
    for (std::size_t level = limit; level >= 2; --level) {
        std::vector<Item> packages;
        for (std::size_t k = 0; k + 1 < current.size(); k += 2) {
            Item p{current[k].weight + current[k + 1].weight, current[k].count};
            for (std::size_t c = 0; c < n; ++c) p.count[c] += current[k + 1].count[c];
            packages.push_back(std::move(p));
        }
        std::vector<Item> merged;
        merged.reserve(leaves.size() + packages.size());
        std::size_t a = 0, p = 0;
        while (a < leaves.size() || p < packages.size()) {
            if (p == packages.size() || (a < leaves.size() && leaves[a].weight <= packages[p].weight))
                merged.push_back(leaves[a++]);
            else
                merged.push_back(packages[p++]);
        }
        current = std::move(merged);
    }
    std::vector<std::size_t> lengths(n, 0);
    for (std::size_t k = 0; k < 2 * n - 2; ++k)
        for (std::size_t c = 0; c < n; ++c) lengths[c] += current[k].count[c];

    // Reassign the multiset of lengths: shortest to the heaviest class,
    // equal weights resolved by class index.
    std::vector<std::size_t> sorted_lengths = lengths;
    std::sort(sorted_lengths.begin(), sorted_lengths.end());
    std::vector<std::size_t> by_weight(n);
    for (std::size_t k = 0; k < n; ++k) by_weight[k] = k;
    std::stable_sort(by_weight.begin(), by_weight.end(),
                     [&](std::size_t a, std::size_t b) { return classes[a].weight > classes[b].weight; });
    std::vector<std::size_t> depths(n);
    for (std::size_t k = 0; k < n; ++k) depths[by_weight[k]] = sorted_lengths[k];
    return depths;
}

inline ClassifierTree build_depth_limited(std::vector<ActivityClass> classes, std::size_t limit) {
    if (classes.empty()) throw Error("empty: no classes");
    detail::validate_classes(classes);
    auto depths = package_merge_depths(classes, limit);
    return detail::tree_from_depths(std::move(classes), depths);
}

/// Huffman tree when it already respects cfg.depth_limit, package-merge otherwise.
inline ClassifierTree build_tree(std::vector<ActivityClass> classes, const TreeBuildConfig& cfg = {}) {
    if (cfg.depth_limit && *cfg.depth_limit < min_feasible_depth(classes.size()))
        throw Error("depth infeasible: 2^L is smaller than the class count");
    auto tree = build_unconstrained(classes, cfg);
    if (cfg.depth_limit && tree_depth(tree) > *cfg.depth_limit) return build_depth_limited(std::move(classes), *cfg.depth_limit);
    return tree;
}

/// Trains one binary SVM per internal node on the samples of that node's
/// classes: +1 for the left subtree, -1 for the right subtree.
inline ClassifierTree attach_classifiers(ClassifierTree tree, const LabeledDataset& train, const TrainConfig& cfg) {
    std::map<int, std::size_t> counts;
    for (int l : train.labels) ++counts[l];
    for (const auto& c : tree.classes)
        if (counts[c.id] == 0) throw Error("missing class data: class " + std::to_string(c.id) + " has no samples");

    for (auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        std::set<int> left(node.left_classes.begin(), node.left_classes.end());
        std::set<int> right(node.right_classes.begin(), node.right_classes.end());
        std::vector<FeatureVector> xs;
        std::vector<int> ys;
        std::vector<std::size_t> ids;
        for (std::size_t k = 0; k < train.size(); ++k) {
            const int l = train.labels[k];
            if (left.count(l)) ys.push_back(1);
            else if (right.count(l)) ys.push_back(-1);
            else continue;
            xs.push_back(train.features[k]);
            ids.push_back(k);
        }
        node.model = train_binary(xs, ys, cfg, ids);
        std::size_t correct = 0;
        for (std::size_t k = 0; k < xs.size(); ++k)
            if ((classify_binary(*node.model, xs[k]) == Side::left) == (ys[k] == 1)) ++correct;
        node.train_accuracy = static_cast<double>(correct) / static_cast<double>(xs.size());
    }
    return tree;
}

inline Classification classify_sample(const ClassifierTree& tree, std::span<const double> x) {
    std::size_t steps = 0;
    int id = 0;
    while (true) {
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (node.is_leaf()) return {tree.classes[static_cast<std::size_t>(node.class_index)].id, steps};
        if (!node.model) throw Error("untrained: internal node " + std::to_string(id) + " has no model");
        id = classify_binary(*node.model, x) == Side::left ? node.left : node.right;
        ++steps;
    }
}

inline TreeStats tree_stats(const ClassifierTree& tree) {
    TreeStats s;
    s.depth = tree_depth(tree);
    s.expected_instructions = expected_instructions(tree);
    const bool trained = is_trained(tree);
    std::vector<const FeatureVector*> all;
    for (int id : internal_nodes(tree)) {
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        NodeStats ns{id, 0, node.train_accuracy};
        if (node.model) {
            ns.support_vectors = node.model->entries.size();
            for (const auto& e : node.model->entries) all.push_back(&e.vector);
        }
        s.nodes.push_back(ns);
    }
    s.stored_vectors = all.size();
    std::sort(all.begin(), all.end(), [](auto* a, auto* b) { return *a < *b; });
    s.distinct_vectors = static_cast<std::size_t>(
        std::unique(all.begin(), all.end(), [](auto* a, auto* b) { return *a == *b; }) - all.begin());
    if (trained && s.stored_vectors > 0) {
        s.initial_overlap_pct = 100.0 * static_cast<double>(s.stored_vectors - s.distinct_vectors) /
                                static_cast<double>(s.stored_vectors);
    } else if (trained && !s.nodes.empty()) {
        s.initial_overlap_pct = 0.0;
    }
    return s;
}

/// Nested parenthesized class ids, e.g. "(5 (0 (1 2)))".
inline std::string topology_string(const ClassifierTree& tree) {
    std::string out;
    std::function<void(int)> visit = [&](int id) {
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (node.is_leaf()) {
            out += std::to_string(tree.classes[static_cast<std::size_t>(node.class_index)].id);
            return;
        }
        out += '(';
        visit(node.left);
        out += ' ';
        visit(node.right);
        out += ')';
    };
    visit(0);
    return out;
}

/// Inverse of topology_string. Every class id must appear exactly once.
inline ClassifierTree tree_from_topology(std::vector<ActivityClass> classes, std::string_view topo) {
    std::map<int, int> index_of;
    for (std::size_t k = 0; k < classes.size(); ++k) index_of[classes[k].id] = static_cast<int>(k);
    detail::ShapeBuilder b;
    std::size_t pos = 0;
    std::set<int> seen;
    auto skip = [&] {
        while (pos < topo.size() && topo[pos] == ' ') ++pos;
    };
    std::function<int()> parse = [&]() -> int {
        skip();
        if (pos >= topo.size()) throw Error("parse error: truncated topology");
        if (topo[pos] == '(') {
            ++pos;
            int l = parse();
            int r = parse();
            skip();
            if (pos >= topo.size() || topo[pos] != ')') throw Error("parse error: expected ')' in topology");
            ++pos;
            return b.add_internal(l, r);
        }
        std::size_t end = pos;
        while (end < topo.size() && (topo[end] == '-' || (topo[end] >= '0' && topo[end] <= '9'))) ++end;
        const int id = text::expect_int<int>(topo.substr(pos, end - pos), "topology");
        pos = end;
        auto it = index_of.find(id);
        if (it == index_of.end() || !seen.insert(id).second) throw Error("parse error: topology class ids do not match");
        return b.add_leaf(it->second);
    };
    const int root = parse();
    skip();
    if (pos != topo.size() || seen.size() != classes.size()) throw Error("parse error: topology class ids do not match");
    return b.finish(std::move(classes), root);
}

} // namespace bhcsvm
