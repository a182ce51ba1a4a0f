#include <gtest/gtest.h>

#include "coursekit/aligner.hpp"
#include "coursekit/lexical.hpp"
#include "support.hpp"

using namespace coursekit;
using coursekit::testing::AdmissionBuilder;
using coursekit::testing::exact_text_predicate;
using coursekit::testing::make_sentence;
using coursekit::testing::make_source;
using coursekit::testing::random_tokens;

namespace {

std::vector<SourceSentence> random_source(Rng& rng, std::size_t n) {
    std::vector<SourceSentence> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto toks = random_tokens(rng, 8, 12);
        if (toks.empty()) toks.push_back("w0");
        out.push_back(make_source(i, join(toks, " ")));
    }
    return out;
}

}  // namespace

TEST(AlignMethod, ParsesNamesAndArguments) {
    EXPECT_EQ(AlignmentMethod::parse("rouge-topk:3").k, 3);
    EXPECT_EQ(AlignmentMethod::parse("full:512").token_budget, 512);
    EXPECT_EQ(AlignmentMethod::parse("bs-topk").name(), "bs-topk:5");
    EXPECT_THROW(AlignmentMethod::parse("rouge-gain:2"), ValidationError);
    EXPECT_THROW(AlignmentMethod::parse("rouge-topk:0"), ValidationError);
    EXPECT_THROW(AlignmentMethod::parse("magic"), ValidationError);
}

TEST(AlignMatrix, EntriesAreBestTokenMatch) {
    const auto src = std::vector<SourceSentence>{make_source(0, "a b"), make_source(1, "c")};
    const auto m = align_matrix({"a", "c", "z"}, src, SimilarityBackend::exact());
    Eigen::MatrixXd want(3, 2);
    want << 1, 0, 0, 1, 0, 0;
    EXPECT_TRUE(m.isApprox(want));
}

TEST(GreedyWeighted, WeightsStartAtOneAndNeverIncrease) {
    Rng rng(5);
    const auto backend = SimilarityBackend::exact();
    for (int c = 0; c < 100; ++c) {
        const auto src = random_source(rng, 1 + rng.below(7));
        auto ref_toks = random_tokens(rng, 10, 12);
        if (ref_toks.empty()) ref_toks.push_back("w1");
        const auto ref = make_sentence(0, join(ref_toks, " "));
        const auto r = greedy_weighted_align(ref, src, backend);
        ASSERT_FALSE(r.weights.empty());
        EXPECT_TRUE((r.weights[0].array() == 1.0).all());
        for (std::size_t t = 1; t < r.weights.size(); ++t) {
            EXPECT_TRUE((r.weights[t].array() <= r.weights[t - 1].array()).all());
            EXPECT_TRUE((r.weights[t].array() >= 0.0).all());
        }
        EXPECT_LE(r.weights.size(), 6u);
    }
}

TEST(GreedyWeighted, VerbatimCopyAlignsFirst) {
    Rng rng(8);
    const auto backend = SimilarityBackend::exact();
    for (int c = 0; c < 50; ++c) {
        const auto src = random_source(rng, 2 + rng.below(6));
        const auto pick = rng.below(src.size());
        const auto ref = make_sentence(0, src[pick].sentence.text);
        const auto r = greedy_weighted_align(ref, src, backend);
        ASSERT_FALSE(r.aligned.empty());
        // Any earlier sentence covering every reference token ties with the copy.
        const auto& first = src[r.aligned[0].position].sentence.tokens;
        const std::set<std::string> have(first.begin(), first.end());
        for (const auto& t : ref.tokens) EXPECT_TRUE(have.contains(t)) << t;
        EXPECT_DOUBLE_EQ(r.aligned[0].score, 1.0);
        EXPECT_LE(r.aligned[0].position, pick);
    }
}

TEST(GreedyWeighted, FilterDropsVocabularyDisjointSentences) {
    const std::vector<SourceSentence> src{make_source(0, "alpha beta"), make_source(1, "xray yoke"),
                                          make_source(2, "zulu whiskey")};
    const auto r = greedy_weighted_align(make_sentence(0, "alpha beta gamma delta"), src, SimilarityBackend::exact());
    ASSERT_EQ(r.aligned.size(), 1u);
    EXPECT_EQ(r.aligned[0].position, 0u);
    EXPECT_GT(r.weights.size(), 2u);  // the disjoint steps ran but were filtered
}

TEST(GreedyWeighted, RejectsEmptyInputs) {
    const auto b = SimilarityBackend::exact();
    EXPECT_THROW(greedy_weighted_align(make_sentence(0, ""), {make_source(0, "a")}, b), ValidationError);
    EXPECT_THROW(greedy_weighted_align(make_sentence(0, "a"), {}, b), ValidationError);
}

TEST(RougeGainAlign, MatchesExhaustiveArgmaxEachStep) {
    Rng rng(21);
    const auto backend = SimilarityBackend::exact();
    for (int c = 0; c < 40; ++c) {
        const auto src = random_source(rng, 1 + rng.below(6));
        auto ref_toks = random_tokens(rng, 10, 12);
        if (ref_toks.empty()) ref_toks.push_back("w2");
        const auto ref = make_sentence(0, join(ref_toks, " "));
        const auto r = align(AlignmentMethod::parse("rouge-gain"), ref, {nullptr, &src, &backend});
        NgramBag target(2), chosen(2);
        target.add(ref.tokens);
        double current = 0.0;
        std::set<std::size_t> used;
        for (const auto& a : r.aligned) {
            double best = -1;
            for (std::size_t s = 0; s < src.size(); ++s) {
                if (used.contains(s)) continue;
                NgramBag trial = chosen;
                trial.add(src[s].sentence.tokens);
                best = std::max(best, r12(trial, target) - current);
            }
            NgramBag trial = chosen;
            trial.add(src[a.position].sentence.tokens);
            EXPECT_NEAR(r12(trial, target) - current, best, 1e-12);
            EXPECT_GT(best, 0.0);
            chosen = trial;
            current = r12(chosen, target);
            used.insert(a.position);
        }
    }
}

TEST(TopK, TakesKHighestScores) {
    const std::vector<SourceSentence> src{make_source(0, "a b"), make_source(1, "a b c d"), make_source(2, "x")};
    const auto backend = SimilarityBackend::exact();
    const auto ref = make_sentence(0, "a b c d");
    const auto r = align(AlignmentMethod::parse("rouge-topk:2"), ref, {nullptr, &src, &backend});
    ASSERT_EQ(r.aligned.size(), 2u);
    EXPECT_EQ(r.aligned[0].position, 1u);
    EXPECT_EQ(r.aligned[1].position, 0u);
}

TEST(EntityChain, AddsSentenceHoldingMissingConcept) {
    const auto a = AdmissionBuilder("a")
                       .note("n1", {{"HPI", "Fever and cough noted today. Vancomycin was started."}})
                       .reference("Fever and cough noted today with vancomycin.")
                       .mention(DocRef::note("n1"), "Vancomycin", SemanticType::Treatment)
                       .mention(DocRef::reference(), "vancomycin", SemanticType::Treatment)
                       .build();
    const auto src = source_sentences(a);
    const auto backend = SimilarityBackend::exact();
    const auto pred = exact_text_predicate();
    const auto index = build_source_index(a, pred);
    const auto ref = reference_sentences(a)[0];
    AlignInputs in{&a, &src, &backend, &index, &pred};
    const auto chain = align(AlignmentMethod::parse("entity-chain"), ref, in);
    EXPECT_TRUE(chain.contains(1));
}

TEST(Full, RespectsTokenBudget) {
    const std::vector<SourceSentence> src{make_source(0, "a b c"), make_source(1, "d e f"), make_source(2, "g h i")};
    const auto backend = SimilarityBackend::exact();
    const auto r = align(AlignmentMethod::parse("full:6"), make_sentence(0, "a"), {nullptr, &src, &backend});
    EXPECT_EQ(r.aligned.size(), 2u);
}
