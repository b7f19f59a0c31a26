#pragma once

// Text model file for a whole classifier tree.
//
//   bhcsvm-tree 1
//   classes <n>
//   class <id> <weight> <name>            (n lines)
//   topology <nested parenthesized class ids>
//   pool <count> <dim>                    (pooled layout only)
//   <v_1> ... <v_dim>                     (count lines)
//   node <preorder id> [accuracy <a>]     (one block per trained internal node)
//   model <dim> <bias> <k>                (plain: svm_core block)
//   pooled <dim> <bias> <k>               (pooled: k lines "<pool index> <coef> <source id>")
//   end
//
// All reals use 17 significant digits. The pooled layout stores every
// distinct support vector once and is what an optimized tree is saved as.

#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bhcsvm/error.hpp"
#include "bhcsvm/svm.hpp"
#include "bhcsvm/text.hpp"
#include "bhcsvm/tree.hpp"

namespace bhcsvm {

enum class ModelLayout { plain, pooled };

inline std::vector<FeatureVector> vector_pool(const ClassifierTree& tree) {
    std::vector<FeatureVector> pool;
    std::map<FeatureVector, std::size_t> index;
    for (int id : internal_nodes(tree)) {
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (!node.model) continue;
        for (const auto& e : node.model->entries)
            if (index.try_emplace(e.vector, pool.size()).second) pool.push_back(e.vector);
    }
    return pool;
}

inline void write_tree(std::ostream& os, const ClassifierTree& tree, ModelLayout layout = ModelLayout::plain) {
    os << "bhcsvm-tree 1\n";
    os << "classes " << tree.classes.size() << '\n';
    for (const auto& c : tree.classes) os << "class " << c.id << ' ' << text::real17(c.weight) << ' ' << c.name << '\n';
    os << "topology " << topology_string(tree) << '\n';

    std::map<FeatureVector, std::size_t> pool_index;
    if (layout == ModelLayout::pooled) {
        const auto pool = vector_pool(tree);
        const std::size_t dim = pool.empty() ? 0 : pool.front().size();
        os << "pool " << pool.size() << ' ' << dim << '\n';
        for (std::size_t k = 0; k < pool.size(); ++k) {
            pool_index[pool[k]] = k;
            for (std::size_t c = 0; c < pool[k].size(); ++c) os << (c ? " " : "") << text::real17(pool[k][c]);
            os << '\n';
        }
    }
    for (int id : internal_nodes(tree)) {
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (!node.model) continue;
        os << "node " << id;
        if (node.train_accuracy) os << " accuracy " << text::real17(*node.train_accuracy);
        os << '\n';
        const auto& m = *node.model;
        if (layout == ModelLayout::plain) {
            write_model(os, m);
            continue;
        }
        os << "pooled " << m.trained_dimension << ' ' << text::real17(m.bias) << ' ' << m.entries.size() << '\n';
        for (const auto& e : m.entries)
            os << pool_index.at(e.vector) << ' ' << text::real17(e.coefficient) << ' ' << e.source_id << '\n';
    }
    os << "end\n";
}

inline ClassifierTree read_tree(std::istream& is) {
    std::string line;
    auto next = [&](const char* what) -> std::vector<std::string_view> {
        if (!next_content_line(is, line)) throw Error(std::string("parse error: missing ") + what);
        return text::split_ws(line);
    };
    auto head = next("file header");
    if (head.size() != 2 || head[0] != "bhcsvm-tree" || head[1] != "1") throw Error("parse error: not a bhcsvm-tree v1 file");
    auto cls = next("class count");
    if (cls.size() != 2 || cls[0] != "classes") throw Error("parse error: expected 'classes <n>'");
    const auto n = text::expect_int<std::size_t>(cls[1], "class count");
    std::vector<ActivityClass> classes;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        auto tok = next("class line");
        if (tok.size() < 4 || tok[0] != "class") throw Error("parse error: expected 'class <id> <weight> <name>'");
        ActivityClass c;
        c.id = text::expect_int<int>(tok[1], "class line");
        c.weight = text::expect_real(tok[2], "class line");
        const auto name_at = static_cast<std::size_t>(tok[3].data() - line.data());
        c.name = line.substr(name_at);
        total += c.weight;
        classes.push_back(std::move(c));
    }
    for (auto& c : classes) c.probability = total > 0.0 ? c.weight / total : 0.0;

    if (!next_content_line(is, line) || line.rfind("topology ", 0) != 0) throw Error("parse error: expected topology line");
    ClassifierTree tree = tree_from_topology(std::move(classes), std::string_view(line).substr(9));

    std::vector<FeatureVector> pool;
    while (true) {
        auto tok = next("'end'");
        if (tok[0] == "end") break;
        if (tok[0] == "pool") {
            if (tok.size() != 3) throw Error("parse error: expected 'pool <count> <dim>'");
            const auto count = text::expect_int<std::size_t>(tok[1], "pool header");
            const auto dim = text::expect_int<std::size_t>(tok[2], "pool header");
            for (std::size_t k = 0; k < count; ++k) {
                auto v = next("pool vector");
                if (v.size() != dim) throw Error("shape: pool vector has wrong width");
                FeatureVector x;
                for (auto s : v) x.push_back(text::expect_real(s, "pool vector"));
                pool.push_back(std::move(x));
            }
            continue;
        }
        if (tok[0] != "node" || (tok.size() != 2 && tok.size() != 4)) throw Error("parse error: expected 'node <id>'");
        const auto id = text::expect_int<std::size_t>(tok[1], "node line");
        if (id >= tree.nodes.size() || tree.nodes[id].is_leaf()) throw Error("parse error: node id is not an internal node");
        auto& node = tree.nodes[id];
        if (tok.size() == 4) node.train_accuracy = text::expect_real(tok[3], "node line");

        const auto body_start = is.tellg();
        auto mh = next("model header");
        if (mh[0] == "model") {
            is.seekg(body_start);
            node.model = read_model(is);
            continue;
        }
        if (mh[0] != "pooled" || mh.size() != 4) throw Error("parse error: expected a model block");
        BinaryNodeModel m;
        m.trained_dimension = text::expect_int<std::size_t>(mh[1], "pooled header");
        m.bias = text::expect_real(mh[2], "pooled header");
        const auto k = text::expect_int<std::size_t>(mh[3], "pooled header");
        for (std::size_t e = 0; e < k; ++e) {
            auto row = next("pooled entry");
            if (row.size() != 3) throw Error("parse error: pooled entry needs 3 fields");
            const auto p = text::expect_int<std::size_t>(row[0], "pooled entry");
            if (p >= pool.size()) throw Error("parse error: pool index out of range");
            if (pool[p].size() != m.trained_dimension) throw Error("shape: pooled vector dimension mismatch");
            m.entries.push_back({pool[p], text::expect_real(row[1], "pooled entry"), text::expect_int<std::size_t>(row[2], "pooled entry")});
        }
        node.model = std::move(m);
    }
    return tree;
}

inline ClassifierTree load_tree(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io: cannot open " + path);
    return read_tree(in);
}

inline void save_tree(const std::string& path, const ClassifierTree& tree, ModelLayout layout = ModelLayout::plain) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io: cannot write " + path);
    write_tree(out, tree, layout);
    if (!out) throw Error("io: write failed for " + path);
}

} // namespace bhcsvm
