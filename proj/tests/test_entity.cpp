#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "coursekit/entity.hpp"
#include "support.hpp"

using namespace coursekit;
using coursekit::testing::AdmissionBuilder;
using coursekit::testing::exact_text_predicate;
using coursekit::testing::make_mention;

namespace {

// Partition check: every mention in exactly one group.
bool is_partition(const std::vector<EntitySynonymGroup>& groups, const std::vector<EntityMention>& mentions) {
    std::multiset<std::string> seen;
    for (const auto& g : groups) seen.insert(g.members.begin(), g.members.end());
    std::multiset<std::string> want;
    for (const auto& m : mentions) want.insert(m.mention_id);
    return seen == want;
}

std::vector<EntityMention> random_mentions(Rng& rng, const std::string& prefix, std::size_t max, int vocab) {
    std::vector<EntityMention> out;
    const auto n = rng.below(max + 1);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(make_mention(prefix + std::to_string(i), "e" + std::to_string(rng.below(vocab))));
    return out;
}

std::set<std::string> texts(const std::vector<EntityMention>& ms) {
    std::set<std::string> out;
    for (const auto& m : ms) out.insert(m.text);
    return out;
}

}  // namespace

TEST(Synonyms, CodeOverlapIsSharedOverSummedSizes) {
    const auto a = make_mention("a", "x", SemanticType::Problem, {"C1", "C2"});
    const auto b = make_mention("b", "y", SemanticType::Problem, {"C2", "C3"});
    EXPECT_DOUBLE_EQ(code_overlap(a, b), 0.25);
    EXPECT_DOUBLE_EQ(code_overlap(a, make_mention("c", "z")), 0.0);
}

TEST(Synonyms, FeatureClassifierThresholds) {
    const auto backend = SimilarityBackend::exact();
    const TfidfIndex tfidf({"acute kidney injury", "kidney injury", "sepsis"});
    // Identical codes: overlap 1/2 >= 0.4.
    EXPECT_TRUE(classify_synonyms(make_mention("a", "aki", SemanticType::Problem, {"C1"}),
                                  make_mention("b", "renal failure", SemanticType::Problem, {"C1"}), backend, tfidf));
    // Uncoded pair: aggregate of embed (0) and tf-idf.
    const auto s = synonym_scores(make_mention("a", "acute kidney injury"), make_mention("b", "kidney injury"),
                                  backend, tfidf);
    EXPECT_FALSE(s.coded);
    EXPECT_DOUBLE_EQ(s.agg, (s.embed + s.tfidf) / 2.0);
    EXPECT_EQ(classify_synonyms(make_mention("a", "acute kidney injury"), make_mention("b", "kidney injury"),
                                backend, tfidf),
              s.agg >= 0.4);
    EXPECT_FALSE(classify_synonyms(make_mention("a", "sepsis"), make_mention("b", "kidney injury"), backend, tfidf));
}

TEST(Esg, ChainFixtureFormsTwoGroups) {
    std::vector<EntityMention> ms{make_mention("A", "a"), make_mention("B", "b"), make_mention("C", "c"),
                                  make_mention("D", "d")};
    const std::set<std::pair<std::string, std::string>> edges{{"A", "B"}, {"B", "C"}};
    auto pred = [&](const EntityMention& x, const EntityMention& y) {
        return edges.contains({x.mention_id, y.mention_id}) || edges.contains({y.mention_id, x.mention_id});
    };
    const auto groups = build_esgs(ms, pred);
    ASSERT_EQ(groups.size(), 2u);
    EXPECT_EQ(groups[0].members, (std::vector<std::string>{"A", "B", "C"}));
    EXPECT_EQ(groups[1].members, (std::vector<std::string>{"D"}));
}

TEST(Esg, PartitionAndOrderIndependenceOnRandomGraphs) {
    Rng rng(3);
    for (int c = 0; c < 100; ++c) {
        auto ms = random_mentions(rng, "m", 9, 4);
        std::set<std::pair<std::string, std::string>> edges;
        for (std::size_t i = 0; i < ms.size(); ++i)
            for (std::size_t j = i + 1; j < ms.size(); ++j)
                if (rng.below(5) == 0) edges.insert({ms[i].mention_id, ms[j].mention_id});
        auto pred = [&](const EntityMention& x, const EntityMention& y) {
            return edges.contains({x.mention_id, y.mention_id}) || edges.contains({y.mention_id, x.mention_id});
        };
        const auto groups = build_esgs(ms, pred);
        EXPECT_TRUE(is_partition(groups, ms));
        auto shuffled = ms;
        rng.shuffle(shuffled);
        EXPECT_EQ(build_esgs(shuffled, pred), groups);
    }
}

TEST(Esg, ExactDuplicatesAlwaysJoined) {
    const auto never = [](const EntityMention&, const EntityMention&) { return false; };
    const auto groups = build_esgs({make_mention("1", "Sepsis"), make_mention("2", "sepsis ")}, never);
    EXPECT_EQ(groups.size(), 1u);
}

TEST(Esg, MajorityTypeAndIndexLookups) {
    std::vector<EntityMention> ms{make_mention("1", "x", SemanticType::Test), make_mention("2", "x", SemanticType::Test),
                                  make_mention("3", "x", SemanticType::Problem)};
    const auto groups = build_esgs(ms, exact_text_predicate());
    ASSERT_EQ(groups.size(), 1u);
    EXPECT_EQ(groups[0].semantic_type, SemanticType::Test);
    EsgIndex index(ms, groups);
    EXPECT_EQ(index.group_of("3")->esg_id, groups[0].esg_id);
    EXPECT_EQ(index.group("nope"), nullptr);
}

TEST(Esg, IndexRejectsMentionInTwoGroups) {
    std::vector<EntityMention> ms{make_mention("1", "x")};
    std::vector<EntitySynonymGroup> groups{{"g1", {"1"}, false, SemanticType::Problem},
                                           {"g2", {"1"}, false, SemanticType::Problem}};
    EXPECT_THROW(EsgIndex(ms, groups), ValidationError);
}

TEST(Salience, MonotoneUnderAddedReferenceMentions) {
    Rng rng(11);
    const auto pred = exact_text_predicate();
    for (int c = 0; c < 50; ++c) {
        auto src = random_mentions(rng, "s", 8, 6);
        auto ref = random_mentions(rng, "r", 4, 6);
        EsgIndex index(src, build_esgs(src, pred));
        const double before = label_salience(index, ref, pred);
        std::set<std::string> salient_before;
        for (const auto& g : index.groups())
            if (g.source_salient) salient_before.insert(g.esg_id);
        ref.push_back(make_mention("extra", "e" + std::to_string(rng.below(6))));
        const double after = label_salience(index, ref, pred);
        EXPECT_GE(after, before);
        for (const auto& g : index.groups())
            if (salient_before.contains(g.esg_id)) EXPECT_TRUE(g.source_salient);
    }
}

TEST(Novelty, FortyPercentOnFiftyThirty) {
    EXPECT_DOUBLE_EQ(entity_novelty(50, 30), 0.4);
    EXPECT_THROW(entity_novelty(0, 0), ValidationError);
    EXPECT_THROW(entity_novelty(3, 4), ValidationError);
}

TEST(EntityMetrics, MatchSetArithmeticOracle) {
    Rng rng(19);
    const auto pred = exact_text_predicate();
    for (int c = 0; c < 100; ++c) {
        const auto src = random_mentions(rng, "s", 6, 6);
        const auto ref = random_mentions(rng, "r", 5, 6);
        const auto model = random_mentions(rng, "g", 5, 6);
        const EsgIndex index(src, build_esgs(src, pred));
        const auto S = texts(src), R = texts(ref), M = texts(model);

        std::set<std::string> RS, RSM;
        for (const auto& t : R)
            if (S.contains(t)) RS.insert(t);
        for (const auto& t : RS)
            if (M.contains(t)) RSM.insert(t);
        const auto got_sgr = sgr(aligned_esgs(ref, index, pred), aligned_esgs(model, index, pred));
        if (RS.empty()) {
            EXPECT_FALSE(got_sgr.has_value());
        } else {
            ASSERT_TRUE(got_sgr.has_value());
            EXPECT_DOUBLE_EQ(*got_sgr, double(RSM.size()) / RS.size());
        }

        const auto hr = hallucination_rate(model, index, pred);
        if (model.empty()) {
            EXPECT_TRUE(hr.empty);
        } else {
            double unmatched = 0;
            for (const auto& m : model) unmatched += !S.contains(m.text);
            EXPECT_DOUBLE_EQ(hr.value, unmatched / model.size());
        }

        const auto far = faithful_adjusted_recall(ref, model, index, pred);
        double eligible = 0, hit = 0;
        for (const auto& r : ref) {
            if (!S.contains(r.text)) continue;
            ++eligible;
            hit += M.contains(r.text);
        }
        EXPECT_EQ(far.empty, eligible == 0);
        if (eligible > 0) EXPECT_DOUBLE_EQ(far.value, hit / eligible);
        for (double v : {hr.value, far.value}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(EntityMetrics, VerbatimExtractHasNoHallucinationAndReferenceHasFullRecall) {
    const auto pred = exact_text_predicate();
    const std::vector<EntityMention> src{make_mention("s1", "sepsis"), make_mention("s2", "vancomycin"),
                                         make_mention("s3", "lactate")};
    const EsgIndex index(src, build_esgs(src, pred));
    EXPECT_EQ(hallucination_rate({src[0], src[2]}, index, pred).value, 0.0);
    const std::vector<EntityMention> ref{make_mention("r1", "sepsis"), make_mention("r2", "lactate"),
                                         make_mention("r3", "delirium")};
    const auto ra = aligned_esgs(ref, index, pred);
    EXPECT_EQ(sgr(ra, ra), 1.0);
}

TEST(SupportVerdict, FlagsUnsupportedMention) {
    const auto a = AdmissionBuilder("a")
                       .note("n1", {{"HPI", "Started vancomycin for sepsis."}})
                       .reference("Sepsis treated with vancomycin and cefepime.")
                       .mention(DocRef::note("n1"), "vancomycin", SemanticType::Treatment)
                       .mention(DocRef::note("n1"), "sepsis", SemanticType::Problem)
                       .mention(DocRef::reference(), "Sepsis", SemanticType::Problem)
                       .mention(DocRef::reference(), "vancomycin", SemanticType::Treatment)
                       .mention(DocRef::reference(), "cefepime", SemanticType::Treatment)
                       .build();
    const auto src = source_sentences(a);
    const auto ref = reference_sentences(a);
    const auto v = support_verdict(ref[0], src, a.mentions, SimilarityBackend::exact(), exact_text_predicate());
    EXPECT_FALSE(v.supported);
    ASSERT_EQ(v.unsupported_mentions.size(), 1u);
}

TEST(EntityGrid, SingletonAndAdjacentFractions) {
    const auto g = entity_grid({{"x", "y"}, {"x"}, {"z"}, {"y"}});
    EXPECT_EQ(g.grid.rows(), 4);
    EXPECT_EQ(g.grid.cols(), 3);
    EXPECT_DOUBLE_EQ(g.singleton_fraction, 1.0 / 3.0);  // z
    EXPECT_DOUBLE_EQ(g.adjacent_fraction, 0.5);         // x adjacent, y not
    EXPECT_TRUE(entity_grid({{}, {}}).empty);
}

TEST(Transitions, RowsNormaliseAndSkipOther) {
    const auto t = transition_matrix({SemanticType::Problem, SemanticType::Other, SemanticType::Treatment,
                                      SemanticType::Treatment, SemanticType::Test});
    EXPECT_DOUBLE_EQ(t.counts.sum(), 3.0);
    EXPECT_DOUBLE_EQ(t.probabilities(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(t.probabilities(1, 1), 0.5);
    EXPECT_DOUBLE_EQ(t.probabilities(1, 2), 0.5);
    EXPECT_DOUBLE_EQ(t.probabilities.row(2).sum(), 0.0);
}

TEST(Gazetteer, LongestMatchWholeWord) {
    const auto gaz = gazetteer_from({make_mention("1", "heparin"), make_mention("2", "heparin drip"),
                                     make_mention("3", "ua", SemanticType::Test)});
    const auto ms = gazetteer_mentions("Heparin drip stopped; usual ua sent.", DocRef::generated(), gaz);
    ASSERT_EQ(ms.size(), 2u);
    EXPECT_EQ(ms[0].text, "Heparin drip");
    EXPECT_EQ(ms[1].text, "ua");
    EXPECT_EQ(ms[1].start, 28u);
}

TEST(EsgSidecar, RoundTripsThroughJson) {
    const auto pred = exact_text_predicate();
    const std::vector<EntityMention> src{make_mention("s1", "a"), make_mention("s2", "a"), make_mention("s3", "b")};
    EsgIndex index(src, build_esgs(src, pred));
    std::string jsonl;
    for (const auto& g : index.groups()) jsonl += esg_to_json("adm", g, index).dump() + "\n";
    const auto parsed = parse_esg_file(jsonl);
    ASSERT_EQ(parsed.count("adm"), 1u);
    EXPECT_EQ(parsed.at("adm"), index.groups());
}
