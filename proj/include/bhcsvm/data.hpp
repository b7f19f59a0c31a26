#pragma once

// Sensor CSV ingestion, sliding-window feature extraction, seeded synthetic
// datasets and the stratified train/test split.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bhcsvm/dataset.hpp"
#include "bhcsvm/error.hpp"
#include "bhcsvm/text.hpp"

namespace bhcsvm {

struct RawRecording {
    std::vector<std::string> channel_names;
    std::vector<std::vector<double>> channels; // channels[c][t]
    std::vector<double> timestamps;
    std::vector<int> labels;
    double sample_rate = 50.0;

    std::size_t length() const { return timestamps.size(); }
};

/// Expected CSV layout: `<time>,<ch1>,...,<chk>,<label>`. An empty channel
/// list accepts whatever columns sit between the time and label columns.
struct CsvSchema {
    std::string time_column = "t";
    std::vector<std::string> channels;
    std::string label_column = "label";
    std::optional<double> sample_rate; // inferred from timestamps when absent
};

struct WindowSpec {
    std::size_t length = 100; // 2 s at 50 Hz
    std::size_t stride = 50;
};

/// Empty `means` selects default_means(n_classes, dimension, separation).
struct SynthSpec {
    std::size_t n_classes = 2;
    std::size_t dimension = 2;
    std::vector<FeatureVector> means; // empty: default_means(n_classes, dimension, separation)
    double separation = 6.0;
    double spread = 1.0;
    std::size_t samples_per_class = 100;
    std::uint64_t seed = 7;
};

struct Split {
    LabeledDataset train;
    LabeledDataset test;
};

inline std::istream& getline_trimmed(std::istream& is, std::string& line) {
    std::getline(is, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return is;
}

inline RawRecording parse_csv(std::istream& is, const CsvSchema& schema = {}) {
    std::string line;
    if (!getline_trimmed(is, line)) throw Error("schema mismatch: missing header row");
    auto header = text::split(line, ',');
    if (header.size() < 3 || header.front() != schema.time_column || header.back() != schema.label_column)
        throw Error("schema mismatch: header must be '" + schema.time_column + ",<channels>," + schema.label_column + "'");
    RawRecording rec;
    for (std::size_t c = 1; c + 1 < header.size(); ++c) rec.channel_names.emplace_back(header[c]);
    if (!schema.channels.empty() && rec.channel_names != schema.channels)
        throw Error("schema mismatch: channel columns differ from the declared schema");
    rec.channels.assign(rec.channel_names.size(), {});
    std::size_t line_no = 1;
    while (getline_trimmed(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = text::split(line, ',');
        const std::string where = "parse error at line " + std::to_string(line_no);
        if (cells.size() != header.size()) throw Error(where + ": expected " + std::to_string(header.size()) + " cells");
        double t = 0.0;
        if (!text::parse_real(cells.front(), t) || !std::isfinite(t)) throw Error(where);
        rec.timestamps.push_back(t);
        for (std::size_t c = 0; c < rec.channels.size(); ++c) {
            double v = 0.0;
            if (!text::parse_real(cells[c + 1], v) || !std::isfinite(v)) throw Error(where);
            rec.channels[c].push_back(v);
        }
        int label = 0;
        if (!text::parse_int(cells.back(), label)) throw Error(where);
        rec.labels.push_back(label);
    }
    if (schema.sample_rate) {
        rec.sample_rate = *schema.sample_rate;
    } else if (rec.length() >= 2 && rec.timestamps.back() > rec.timestamps.front()) {
        rec.sample_rate = static_cast<double>(rec.length() - 1) / (rec.timestamps.back() - rec.timestamps.front());
    }
    if (!(rec.sample_rate > 0.0)) throw Error("schema mismatch: sample rate must be positive");
    return rec;
}

inline RawRecording load_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw Error("io: cannot open " + path);
    return parse_csv(in, schema);
}

/// Canonical CSV: shortest round-trip decimals, LF line endings.
inline void write_csv(std::ostream& os, const RawRecording& rec, const CsvSchema& schema = {}) {
    os << schema.time_column;
    for (const auto& n : rec.channel_names) os << ',' << n;
    os << ',' << schema.label_column << '\n';
    for (std::size_t t = 0; t < rec.length(); ++t) {
        os << text::real_short(rec.timestamps[t]);
        for (const auto& ch : rec.channels) os << ',' << text::real_short(ch[t]);
        os << ',' << rec.labels[t] << '\n';
    }
}

/// Per window and channel: mean, population standard deviation, min, max.
/// The window label is the majority sample label (smallest id on ties).
inline LabeledDataset extract_features(const RawRecording& rec, const WindowSpec& spec) {
    if (spec.stride == 0 || spec.length == 0 || spec.stride > spec.length)
        throw Error("bad window: require 0 < stride <= length");
    if (rec.length() < spec.length) throw Error("too short: recording is shorter than one window");
    LabeledDataset ds;
    ds.dimension = 4 * rec.channels.size();
    const std::size_t windows = (rec.length() - spec.length) / spec.stride + 1;
    for (std::size_t w = 0; w < windows; ++w) {
        const std::size_t begin = w * spec.stride;
        FeatureVector f;
        f.reserve(ds.dimension);
        for (const auto& ch : rec.channels) {
            double sum = 0.0, lo = ch[begin], hi = ch[begin];
            for (std::size_t t = begin; t < begin + spec.length; ++t) {
                sum += ch[t];
                lo = std::min(lo, ch[t]);
                hi = std::max(hi, ch[t]);
            }
            const double mean = sum / static_cast<double>(spec.length);
            double var = 0.0;
            for (std::size_t t = begin; t < begin + spec.length; ++t) var += (ch[t] - mean) * (ch[t] - mean);
            f.insert(f.end(), {mean, std::sqrt(var / static_cast<double>(spec.length)), lo, hi});
        }
        std::map<int, std::size_t> votes;
        for (std::size_t t = begin; t < begin + spec.length; ++t) ++votes[rec.labels[t]];
        int label = votes.begin()->first;
        std::size_t most = 0;
        for (const auto& [id, count] : votes)
            if (count > most) {
                most = count;
                label = id;
            }
        ds.features.push_back(std::move(f));
        ds.labels.push_back(label);
    }
    refresh_class_set(ds);
    return ds;
}

/// SplitMix64 finalizer; derives independent per-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// mt19937_64 keyed by (seed, stream). The engine's output sequence is
/// fixed by the C++ standard; the transforms below are ours so that the
/// numbers do not depend on the standard library implementation.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(seed ^ splitmix64(stream + 1))) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal by Box-Muller (second value cached).
    double normal() {
        if (cached_) {
            cached_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do u1 = uniform();
        while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        spare_ = r * std::sin(two_pi * u2);
        cached_ = true;
        return r * std::cos(two_pi * u2);
    }

    /// Uniform integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t v = 0;
        do v = engine_();
        while (v >= limit);
        return v % bound;
    }

private:
    std::mt19937_64 engine_;
    bool cached_ = false;
    double spare_ = 0.0;
};

/// Class k sits at +separation on axis k/2 for even k and -separation for
/// odd k, wrapping around the axes: (s,0,..), (-s,0,..), (0,s,..), ...
/// Beyond 2*dimension classes the radius grows by `separation` per wrap.
inline std::vector<FeatureVector> default_means(std::size_t n_classes, std::size_t dimension, double separation) {
    std::vector<FeatureVector> out;
    for (std::size_t k = 0; k < n_classes; ++k) {
        FeatureVector m(dimension, 0.0);
        const std::size_t axis = (k / 2) % dimension;
        const double ring = static_cast<double>(k / (2 * dimension) + 1);
        m[axis] = (k % 2 == 0 ? 1.0 : -1.0) * separation * ring;
        out.push_back(std::move(m));
    }
    return out;
}

/// samples_per_class points per class from N(mean_k, spread^2 I), class k
/// drawn from its own stream (seed, k). Output is class-major.
inline LabeledDataset synth_generate(const SynthSpec& spec) {
    if (spec.n_classes == 0) throw Error("empty spec: zero classes");
    if (spec.dimension == 0) throw Error("empty spec: zero dimension");
    if (!(spec.spread >= 0.0)) throw Error("bad spec: spread must be non-negative");
    auto means = spec.means.empty() ? default_means(spec.n_classes, spec.dimension, spec.separation) : spec.means;
    if (means.size() != spec.n_classes) throw Error("bad spec: one mean per class required");
    LabeledDataset ds;
    ds.dimension = spec.dimension;
    for (std::size_t k = 0; k < spec.n_classes; ++k) {
        if (means[k].size() != spec.dimension) throw Error("shape: mean dimension mismatch");
        StreamRng rng(spec.seed, k);
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            FeatureVector x(spec.dimension);
            for (std::size_t c = 0; c < spec.dimension; ++c) x[c] = means[k][c] + spec.spread * rng.normal();
            ds.features.push_back(std::move(x));
            ds.labels.push_back(static_cast<int>(k));
        }
    }
    refresh_class_set(ds);
    return ds;
}

/// Per class: Fisher-Yates shuffle seeded by (seed, class id), first
/// max(1, round(train_fraction * n_k)) go to train. Both halves keep the
/// original sample order.
inline Split stratified_split(const LabeledDataset& ds, std::uint64_t seed, double train_fraction = 0.7) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t k = 0; k < ds.size(); ++k) by_class[ds.labels[k]].push_back(k);
    std::vector<std::uint8_t> in_train(ds.size(), 0);
    for (auto& [id, idx] : by_class) {
        StreamRng rng(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(id)) + 0x5EED);
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        const auto n_train = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size()))));
        for (std::size_t i = 0; i < std::min(n_train, idx.size()); ++i) in_train[idx[i]] = 1;
    }
    Split out;
    out.train.dimension = out.test.dimension = ds.dimension;
    out.train.classes = out.test.classes = ds.classes;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        auto& dst = in_train[k] ? out.train : out.test;
        dst.features.push_back(ds.features[k]);
        dst.labels.push_back(ds.labels[k]);
    }
    refresh_class_set(out.train);
    refresh_class_set(out.test);
    return out;
}

/// Dataset file: header `f0,...,f<d-1>,label`, one sample per row, reals
/// with 17 significant digits.
inline void write_dataset(std::ostream& os, const LabeledDataset& ds) {
    for (std::size_t c = 0; c < ds.dimension; ++c) os << 'f' << c << ',';
    os << "label\n";
    for (std::size_t k = 0; k < ds.size(); ++k) {
        for (double v : ds.features[k]) os << text::real17(v) << ',';
        os << ds.labels[k] << '\n';
    }
}

inline LabeledDataset read_dataset(std::istream& is) {
    std::string line;
    if (!getline_trimmed(is, line)) throw Error("schema mismatch: missing header row");
    auto header = text::split(line, ',');
    if (header.size() < 2 || header.back() != "label") throw Error("schema mismatch: dataset header must end in 'label'");
    LabeledDataset ds;
    ds.dimension = header.size() - 1;
    std::size_t line_no = 1;
    while (getline_trimmed(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = text::split(line, ',');
        const std::string where = "parse error at line " + std::to_string(line_no);
        if (cells.size() != header.size()) throw Error(where);
        FeatureVector x(ds.dimension);
        for (std::size_t c = 0; c < ds.dimension; ++c)
            if (!text::parse_real(cells[c], x[c]) || !std::isfinite(x[c])) throw Error(where);
        int label = 0;
        if (!text::parse_int(cells.back(), label)) throw Error(where);
        ds.features.push_back(std::move(x));
        ds.labels.push_back(label);
    }
    refresh_class_set(ds);
    return ds;
}

inline LabeledDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io: cannot open " + path);
    return read_dataset(in);
}

inline void save_dataset(const std::string& path, const LabeledDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io: cannot write " + path);
    write_dataset(out, ds);
    if (!out) throw Error("io: write failed for " + path);
}

} // namespace bhcsvm
