#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "bhcsvm/error.hpp"
#include "bhcsvm/svm.hpp"

namespace bhcsvm {

/// One activity (output class). `weight` is the raw input mass (percent,
/// fraction or sample count); `probability` is weight / total.
struct ActivityClass {
    int id = 0;
    std::string name;
    double weight = 0.0;
    double probability = 0.0;
};

/// Normalizes raw weights into a class set with ids 0..n-1.
inline std::vector<ActivityClass> make_classes(const std::vector<double>& weights,
                                               const std::vector<std::string>& names = {}) {
    if (!names.empty() && names.size() != weights.size()) throw Error("arity: names and weights differ in length");
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw Error("bad probability: weights must be finite and non-negative");
        total += w;
    }
    if (!weights.empty() && !(total > 0.0)) throw Error("bad probability: weights sum to zero");
    std::vector<ActivityClass> out;
    out.reserve(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) {
        ActivityClass c;
        c.id = static_cast<int>(k);
        c.name = names.empty() ? "A" + std::to_string(k) : names[k];
        c.weight = weights[k];
        c.probability = weights[k] / total;
        out.push_back(std::move(c));
    }
    return out;
}

/// Feature vectors with integer class labels. `classes` holds the empirical
/// distribution: weight = sample count, probability = count / size.
struct LabeledDataset {
    std::size_t dimension = 0;
    std::vector<FeatureVector> features;
    std::vector<int> labels;
    std::vector<ActivityClass> classes;

    std::size_t size() const { return features.size(); }
};

/// Recomputes `classes` from the labels (sorted by id). Existing names are
/// kept for ids that already had one.
inline void refresh_class_set(LabeledDataset& ds) {
    std::map<int, std::size_t> counts;
    for (int l : ds.labels) ++counts[l];
    std::map<int, std::string> names;
    for (const auto& c : ds.classes) names[c.id] = c.name;
    ds.classes.clear();
    for (const auto& [id, count] : counts) {
        ActivityClass c;
        c.id = id;
        auto it = names.find(id);
        c.name = it != names.end() ? it->second : "A" + std::to_string(id);
        c.weight = static_cast<double>(count);
        c.probability = static_cast<double>(count) / static_cast<double>(ds.labels.size());
        ds.classes.push_back(std::move(c));
    }
}

} // namespace bhcsvm
