#include <gtest/gtest.h>

#include <sstream>

#include "bhcsvm/cover.hpp"
#include "bhcsvm/data.hpp"
#include "bhcsvm/serialize.hpp"

using namespace bhcsvm;

namespace {

ClassifierTree trained_tree() {
    SynthSpec spec;
    spec.n_classes = 4;
    spec.dimension = 3;
    spec.samples_per_class = 40;
    auto ds = synth_generate(spec);
    return attach_classifiers(build_unconstrained(make_classes({40, 30, 20, 10}, {"walk", "sit", "run", "lie down"})), ds, {});
}

void expect_same(const ClassifierTree& a, const ClassifierTree& b) {
    EXPECT_EQ(topology_string(a), topology_string(b));
    ASSERT_EQ(a.classes.size(), b.classes.size());
    for (std::size_t k = 0; k < a.classes.size(); ++k) {
        EXPECT_EQ(a.classes[k].name, b.classes[k].name);
        EXPECT_EQ(a.classes[k].weight, b.classes[k].weight);
    }
    ASSERT_EQ(a.nodes.size(), b.nodes.size());
    for (std::size_t n = 0; n < a.nodes.size(); ++n) {
        ASSERT_EQ(a.nodes[n].model.has_value(), b.nodes[n].model.has_value());
        EXPECT_EQ(a.nodes[n].train_accuracy, b.nodes[n].train_accuracy);
        if (!a.nodes[n].model) continue;
        const auto& ma = *a.nodes[n].model;
        const auto& mb = *b.nodes[n].model;
        EXPECT_EQ(ma.bias, mb.bias);
        ASSERT_EQ(ma.entries.size(), mb.entries.size());
        for (std::size_t e = 0; e < ma.entries.size(); ++e) {
            EXPECT_EQ(ma.entries[e].vector, mb.entries[e].vector);
            EXPECT_EQ(ma.entries[e].coefficient, mb.entries[e].coefficient);
            EXPECT_EQ(ma.entries[e].source_id, mb.entries[e].source_id);
        }
    }
}

} // namespace

TEST(TreeFile, PlainRoundTrip) {
    auto tree = trained_tree();
    std::stringstream ss;
    write_tree(ss, tree);
    auto back = read_tree(ss);
    expect_same(tree, back);
    std::ostringstream again;
    write_tree(again, back);
    EXPECT_EQ(again.str(), ss.str());
}

TEST(TreeFile, PooledRoundTrip) {
    auto tree = trained_tree();
    std::stringstream ss;
    write_tree(ss, tree, ModelLayout::pooled);
    expect_same(tree, read_tree(ss));
}

TEST(TreeFile, PooledStoresSharedVectorsOnce) {
    auto tree = trained_tree();
    SynthSpec spec;
    spec.n_classes = 4;
    spec.dimension = 3;
    spec.samples_per_class = 40;
    auto ds = synth_generate(spec);
    auto problem = make_cover_problem(tree, ds.features, 1.5);
    auto sel = greedy_moc(problem.coverage);
    auto opt = rebuild_models(tree, problem, sel, ds);

    const auto pool = vector_pool(opt);
    EXPECT_EQ(pool.size(), tree_stats(opt).distinct_vectors);
    EXPECT_LE(pool.size(), sel.chosen.size());
    std::stringstream ss;
    write_tree(ss, opt, ModelLayout::pooled);
    EXPECT_NE(ss.str().find("pool " + std::to_string(pool.size()) + " 3\n"), std::string::npos);
    expect_same(opt, read_tree(ss));
}

TEST(TreeFile, UntrainedTree) {
    auto tree = build_unconstrained(make_classes({20, 20, 5, 5, 10, 40}));
    std::stringstream ss;
    write_tree(ss, tree);
    auto back = read_tree(ss);
    EXPECT_FALSE(is_trained(back));
    EXPECT_EQ(topology_string(back), "(5 (1 (((2 3) 4) 0)))");
    EXPECT_EQ(expected_instructions(back), 230.0);
}

TEST(TreeFile, RejectsMalformedInput) {
    std::istringstream wrong_magic("bhcsvm-tree 2\n");
    EXPECT_THROW(read_tree(wrong_magic), Error);
    std::istringstream truncated("bhcsvm-tree 1\nclasses 2\nclass 0 1 a\nclass 1 1 b\ntopology (0 1)\n");
    EXPECT_THROW(read_tree(truncated), Error);
    std::istringstream bad_pool("bhcsvm-tree 1\nclasses 2\nclass 0 1 a\nclass 1 1 b\ntopology (0 1)\n"
                                "node 0\npooled 1 0 1\n0 1 0\nend\n");
    EXPECT_THROW(read_tree(bad_pool), Error);
}
