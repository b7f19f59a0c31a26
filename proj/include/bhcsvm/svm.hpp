#pragma once

// Binary linear SVM: dual SMO trainer and the support-vector decision
// function f(x) = sum_i coef_i * <sv_i, x> + bias, with coef_i = alpha_i * y_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bhcsvm/error.hpp"
#include "bhcsvm/text.hpp"

namespace bhcsvm {

using FeatureVector = std::vector<double>;

struct SupportEntry {
    FeatureVector vector;
    double coefficient = 0.0;  // fused alpha * y
    std::size_t source_id = 0; // index of the originating training sample
};

struct BinaryNodeModel {
    std::vector<SupportEntry> entries;
    double bias = 0.0;
    std::size_t trained_dimension = 0;
};

struct TrainConfig {
    double C = 1.0;
    double kkt_tolerance = 1e-3;
    std::size_t max_passes = 1000;
};

/// Which child a binary node routes a sample to. Left is the +1 side.
enum class Side { left, right };

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

inline void validate(const TrainConfig& cfg) {
    if (!(cfg.C > 0.0) || !std::isfinite(cfg.C)) throw Error("config: C must be positive");
    if (!(cfg.kkt_tolerance > 0.0)) throw Error("config: kkt_tolerance must be positive");
    if (cfg.max_passes == 0) throw Error("config: max_passes must be positive");
}

/// Sum of coefficient * <vector, x> without the bias term.
inline double margin_without_bias(const BinaryNodeModel& model, std::span<const double> x) {
    if (x.size() != model.trained_dimension) throw Error("shape: input dimension does not match model");
    double s = 0.0;
    for (const auto& e : model.entries) s += e.coefficient * dot(e.vector, x);
    return s;
}

inline double decision_value(const BinaryNodeModel& model, std::span<const double> x) {
    return margin_without_bias(model, x) + model.bias;
}

/// Ties (f(x) == 0) go left.
inline Side classify_binary(const BinaryNodeModel& model, std::span<const double> x) {
    return decision_value(model, x) >= 0.0 ? Side::left : Side::right;
}

namespace detail {

struct SmoState {
    std::span<const FeatureVector> x;
    std::span<const int> y;
    double C;
    std::vector<double> alpha;
    std::vector<double> grad; // G = Q alpha - e
    std::vector<double> diag; // K(t, t)

    bool in_up(std::size_t t) const {
        return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0.0);
    }
    bool in_low(std::size_t t) const {
        return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < C);
    }
    void kernel_row(std::size_t i, std::vector<double>& row) const {
        for (std::size_t t = 0; t < x.size(); ++t) row[t] = dot(x[i], x[t]);
    }
};

} // namespace detail

/// Trains a soft-margin linear SVM with sequential minimal optimization
/// (maximal violating i, second-order choice of j, lowest index on ties).
/// `source_ids`, when given, labels each sample for SupportEntry::source_id.
inline BinaryNodeModel train_binary(std::span<const FeatureVector> samples, std::span<const int> labels,
                                    const TrainConfig& cfg, std::span<const std::size_t> source_ids = {}) {
    validate(cfg);
    const std::size_t n = samples.size();
    if (n == 0) throw Error("shape: no training samples");
    if (labels.size() != n) throw Error("shape: labels and samples differ in length");
    if (!source_ids.empty() && source_ids.size() != n) throw Error("shape: source ids and samples differ in length");
    const std::size_t dim = samples.front().size();
    bool has_pos = false, has_neg = false;
    for (std::size_t t = 0; t < n; ++t) {
        if (samples[t].size() != dim) throw Error("shape: inconsistent sample dimension");
        for (double v : samples[t])
            if (!std::isfinite(v)) throw Error("shape: non-finite feature value");
        if (labels[t] == 1) has_pos = true;
        else if (labels[t] == -1) has_neg = true;
        else throw Error("shape: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw Error("degenerate labels: both classes must be present");

    detail::SmoState st{samples, labels, cfg.C, std::vector<double>(n, 0.0), std::vector<double>(n, -1.0),
                        std::vector<double>(n)};
    for (std::size_t t = 0; t < n; ++t) st.diag[t] = dot(samples[t], samples[t]);

    constexpr double tau = 1e-12;
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t max_iter = cfg.max_passes * std::max<std::size_t>(n, 100);
    std::vector<double> row_i(n), row_j(n);
    bool converged = false;

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        double gmax = -inf;
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (st.in_up(t) && -labels[t] * st.grad[t] > gmax) {
                gmax = -labels[t] * st.grad[t];
                i = t;
            }
        }
        double gmin = inf;
        for (std::size_t t = 0; t < n; ++t)
            if (st.in_low(t)) gmin = std::min(gmin, -labels[t] * st.grad[t]);
        if (i == n || gmax - gmin < cfg.kkt_tolerance) {
            converged = true;
            break;
        }

        st.kernel_row(i, row_i);
        std::size_t j = n;
        double best = inf;
        for (std::size_t t = 0; t < n; ++t) {
            if (!st.in_low(t)) continue;
            const double b = gmax + labels[t] * st.grad[t];
            if (b <= 0.0) continue;
            double a = st.diag[i] + st.diag[t] - 2.0 * row_i[t];
            if (a <= 0.0) a = tau;
            const double score = -(b * b) / a;
            if (score < best) {
                best = score;
                j = t;
            }
        }
        if (j == n) {
            converged = true;
            break;
        }
        st.kernel_row(j, row_j);

        const double yi = labels[i], yj = labels[j];
        const double old_ai = st.alpha[i], old_aj = st.alpha[j];
        double& ai = st.alpha[i];
        double& aj = st.alpha[j];
        const double C = cfg.C;
        const double qij = yi * yj * row_i[j];
        if (yi != yj) {
            double quad = st.diag[i] + st.diag[j] + 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (-st.grad[i] - st.grad[j]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) { aj = 0.0; ai = diff; }
            } else {
                if (ai < 0.0) { ai = 0.0; aj = -diff; }
            }
            if (diff > 0.0) {
                if (ai > C) { ai = C; aj = C - diff; }
            } else {
                if (aj > C) { aj = C; ai = C + diff; }
            }
        } else {
            double quad = st.diag[i] + st.diag[j] - 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (st.grad[i] - st.grad[j]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) { ai = C; aj = sum - C; }
            } else {
                if (aj < 0.0) { aj = 0.0; ai = sum; }
            }
            if (sum > C) {
                if (aj > C) { aj = C; ai = sum - C; }
            } else {
                if (ai < 0.0) { ai = 0.0; aj = sum; }
            }
        }
        const double dai = ai - old_ai, daj = aj - old_aj;
        for (std::size_t t = 0; t < n; ++t)
            st.grad[t] += labels[t] * (yi * row_i[t] * dai + yj * row_j[t] * daj);
    }
    if (!converged) throw Error("not converged: SMO hit the max_passes budget");

    // rho: mean of y*G over free vectors, else midpoint of the feasible interval.
    double ub = inf, lb = -inf, free_sum = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = labels[t] * st.grad[t];
        if (st.alpha[t] >= cfg.C) {
            if (labels[t] == -1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (st.alpha[t] <= 0.0) {
            if (labels[t] == 1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            free_sum += yg;
        }
    }
    const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : (ub + lb) / 2.0;

    BinaryNodeModel model;
    model.trained_dimension = dim;
    model.bias = -rho;
    for (std::size_t t = 0; t < n; ++t) {
        if (st.alpha[t] == 0.0) continue;
        model.entries.push_back({samples[t], st.alpha[t] * labels[t], source_ids.empty() ? t : source_ids[t]});
    }
    return model;
}

/// svm_core text block: "model <dim> <bias> <k>" then k lines of
/// "<coef> <source_id> <v_1> ... <v_dim>", reals with 17 significant digits.
inline void write_model(std::ostream& os, const BinaryNodeModel& m) {
    os << "model " << m.trained_dimension << ' ' << text::real17(m.bias) << ' ' << m.entries.size() << '\n';
    for (const auto& e : m.entries) {
        os << text::real17(e.coefficient) << ' ' << e.source_id;
        for (double v : e.vector) os << ' ' << text::real17(v);
        os << '\n';
    }
}

inline bool next_content_line(std::istream& is, std::string& line) {
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        return true;
    }
    return false;
}

inline BinaryNodeModel read_model(std::istream& is) {
    std::string line;
    if (!next_content_line(is, line)) throw Error("parse error: missing model header");
    auto head = text::split_ws(line);
    if (head.size() != 4 || head[0] != "model") throw Error("parse error: bad model header '" + line + "'");
    BinaryNodeModel m;
    m.trained_dimension = text::expect_int<std::size_t>(head[1], "model header");
    m.bias = text::expect_real(head[2], "model header");
    const auto count = text::expect_int<std::size_t>(head[3], "model header");
    m.entries.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        if (!next_content_line(is, line)) throw Error("parse error: truncated model block");
        auto tok = text::split_ws(line);
        if (tok.size() != m.trained_dimension + 2) throw Error("shape: support entry has wrong width");
        SupportEntry e;
        e.coefficient = text::expect_real(tok[0], "support entry");
        e.source_id = text::expect_int<std::size_t>(tok[1], "support entry");
        e.vector.reserve(m.trained_dimension);
        for (std::size_t c = 0; c < m.trained_dimension; ++c) e.vector.push_back(text::expect_real(tok[c + 2], "support entry"));
        m.entries.push_back(std::move(e));
    }
    return m;
}

} // namespace bhcsvm
