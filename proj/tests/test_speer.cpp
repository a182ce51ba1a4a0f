#include <gtest/gtest.h>

#include "coursekit/speer.hpp"
#include "support.hpp"

using namespace coursekit;
using coursekit::testing::AdmissionBuilder;
using coursekit::testing::data_path;
using coursekit::testing::exact_text_predicate;

namespace {

std::string random_text(Rng& rng, std::size_t max_len, std::string_view alphabet) {
    std::string s;
    for (std::size_t i = 0, n = rng.below(max_len + 1); i < n; ++i) s += alphabet[rng.below(alphabet.size())];
    return s;
}

SpeerDocument random_document(Rng& rng) {
    SpeerDocument doc;
    for (std::size_t k = 0, n = rng.below(5); k < n; ++k) {
        SpeerStep step;
        for (std::size_t p = 0, m = rng.below(4); p < m; ++p) {
            auto span = random_text(rng, 8, "ab {}x.");
            while (!span.empty() && span.front() == '{') span.erase(0, 1);
            while (!span.empty() && span.back() == '}') span.pop_back();
            step.plan.push_back(span);
        }
        auto sentence = random_text(rng, 20, "abc {}#:.");
        const auto b = sentence.find_first_not_of(' ');
        sentence = b == std::string::npos ? "" : sentence.substr(b, sentence.find_last_not_of(' ') - b + 1);
        step.sentence = sentence;
        doc.steps.push_back(std::move(step));
    }
    return doc;
}

EntityMention span_mention(const std::string& id, std::size_t start, std::size_t end, std::string_view text) {
    EntityMention m;
    m.mention_id = id;
    m.doc = DocRef::note("n");
    m.start = start;
    m.end = end;
    m.text = std::string(text.substr(start, end - start));
    return m;
}

}  // namespace

TEST(SpeerFormat, ParseInvertsSerializeOnRandomDocuments) {
    Rng rng(77);
    for (int c = 0; c < 500; ++c) {
        const auto doc = random_document(rng);
        const auto text = serialize_speer(doc);
        EXPECT_EQ(parse_speer(text), doc) << text;
    }
}

TEST(SpeerFormat, KnownLayout) {
    SpeerDocument doc{{{{"sepsis", "a {{b"}, "Treated for sepsis."}, {{}, ""}}};
    const auto text = serialize_speer(doc);
    EXPECT_EQ(text,
              "### Entities 1: {{sepsis}} {{a {{{{b}}\n### Sentence 1: Treated for sepsis.\n"
              "### Entities 2:\n### Sentence 2:\n");
    EXPECT_EQ(doc.summary(), "Treated for sepsis.");
}

TEST(SpeerFormat, ParseErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse_speer(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("### Sentence 1: x\n"), 1u);
    EXPECT_EQ(line_of("### Entities 1: {{a}}\n### Sentence 1: x\n### Entities 3:\n"), 3u);
    EXPECT_EQ(line_of("### Entities 1: {{a}\n### Sentence 1: x\n"), 1u);
    EXPECT_EQ(line_of("### Entities 1: {{a}}\n\nhello\n"), 3u);
    EXPECT_EQ(line_of("### Entities 1: {{a}}\n"), 1u);
    EXPECT_EQ(line_of("### Entities 1: {{a{{b}}\n### Sentence 1: x\n"), 1u);
    EXPECT_THROW(serialize_speer({{{{"{a"}, "x"}}}), ValidationError);
    EXPECT_THROW(serialize_speer({{{{}, "x\ny"}}}), ValidationError);
}

TEST(Marks, EscapeAndUnmarkRoundTrip) {
    EXPECT_EQ(escape_braces("a{b}}c{{{"), "a{b}}}}c{{{{{{");
    EXPECT_EQ(unmark(escape_braces("a{b}}c{{{")), "a{b}}c{{{");
    const auto m = mark_text("x {{y}} z", {span_mention("m", 0, 1, "x {{y}} z")});
    EXPECT_EQ(m.text, "{{x}} {{{{y}}}} z");
    EXPECT_EQ(unmark(m.text), "x {{y}} z");
    EXPECT_THROW(unmark("a {{{ b"), ValidationError);
}

TEST(Marks, RandomTextsAndSpansRoundTrip) {
    Rng rng(13);
    for (int c = 0; c < 300; ++c) {
        const auto text = random_text(rng, 30, "ab {}");
        std::vector<EntityMention> ms;
        for (int k = 0; k < 4 && !text.empty(); ++k) {
            const auto s = rng.below(text.size());
            const auto e = s + 1 + rng.below(std::min<std::size_t>(5, text.size() - s));
            ms.push_back(span_mention("m" + std::to_string(k), s, e, text));
        }
        const auto marked = mark_text(text, ms);
        ASSERT_EQ(unmark(marked.text), text) << marked.text;
        EXPECT_EQ(marked.spans.size() + marked.log.size(), ms.size());
        for (std::size_t i = 0; i < marked.spans.size(); ++i) {
            const auto& sp = marked.spans[i];
            EXPECT_EQ(unmark(std::string_view(marked.text).substr(sp.marked_begin, sp.marked_end - sp.marked_begin)),
                      text.substr(sp.original_begin, sp.original_end - sp.original_begin));
            if (i) EXPECT_LE(marked.spans[i - 1].original_end, sp.original_begin);
        }
    }
}

TEST(Marks, OverlapKeepsLongerSpan) {
    const std::string t = "acute kidney injury";
    const auto m = mark_text(t, {span_mention("short", 6, 12, t), span_mention("long", 0, 19, t)});
    ASSERT_EQ(m.spans.size(), 1u);
    EXPECT_EQ(m.spans[0].mention_id, "long");
    EXPECT_EQ(m.log.size(), 1u);
}

TEST(Adherence, F1IsOneExactlyForEqualSets) {
    Rng rng(4);
    for (int c = 0; c < 300; ++c) {
        std::set<std::string> used, guide;
        for (int i = 0; i < 5; ++i) {
            if (rng.below(2)) used.insert("g" + std::to_string(i));
            if (rng.below(2)) guide.insert("g" + std::to_string(i));
        }
        const auto a = adherence_sets(used, guide);
        EXPECT_EQ(a.f1 == 1.0, used == guide);
        EXPECT_GE(a.f1, 0.0);
        EXPECT_LE(a.f1, 1.0);
    }
    const auto a = adherence_sets({"a", "b"}, {"b", "c", "d"});
    EXPECT_DOUBLE_EQ(a.recall, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(a.precision, 0.5);
    EXPECT_DOUBLE_EQ(a.f1, 0.4);
}

TEST(Adherence, UnmatchedMentionIsItsOwnGroup) {
    const auto a = AdmissionBuilder("a")
                       .note("n1", {{"HPI", "Sepsis on arrival."}})
                       .reference("Sepsis resolved.")
                       .mention(DocRef::note("n1"), "Sepsis", SemanticType::Problem)
                       .build();
    const auto pred = exact_text_predicate();
    const auto index = build_source_index(a, pred);
    ASSERT_EQ(index.groups().size(), 1u);
    const std::string g = index.groups()[0].esg_id;
    auto gen = coursekit::testing::make_mention("x", "sepsis", SemanticType::Problem, {}, DocRef::generated("s"));
    EXPECT_DOUBLE_EQ(adherence({gen}, {g}, index, pred).f1, 1.0);
    auto stray = coursekit::testing::make_mention("y", "gout", SemanticType::Problem, {}, DocRef::generated("s"));
    const auto r = adherence({gen, stray}, {g}, index, pred);
    EXPECT_EQ(r.used, 2u);
    EXPECT_DOUBLE_EQ(r.precision, 0.5);
}

TEST(OraclePlan, SpansAreInOrderSubstringsOfTheirSentence) {
    const auto corpus = load_corpus(data_path("mini_corpus.jsonl"));
    const auto pred = exact_text_predicate();
    std::size_t spans = 0;
    for (const auto& a : corpus) {
        auto index = build_source_index(a, pred);
        label_salience(index, mentions_in(a, DocRef::reference()), pred);
        const auto plan = oracle_plan(a, index, pred);
        ASSERT_EQ(plan.steps.size(), reference_sentences(a).size());
        for (const auto& step : plan.steps) {
            std::size_t cursor = 0;
            for (const auto& span : step.plan) {
                const auto at = step.sentence.find(unmark(escape_braces(span)), cursor);
                ASSERT_NE(at, std::string::npos) << span << " | " << step.sentence;
                cursor = at + span.size();
                ++spans;
            }
        }
        EXPECT_EQ(parse_speer(serialize_speer(plan)), plan);
        EXPECT_EQ(plan.summary(), join([&] {
                      std::vector<std::string> v;
                      for (const auto& s : reference_sentences(a)) v.push_back(s.text);
                      return v;
                  }(), " "));
    }
    EXPECT_GT(spans, 0u);
}

TEST(Guidance, GroupsByTypeAndSkipsOther) {
    const auto a = AdmissionBuilder("a")
                       .note("n1", {{"HPI", "Sepsis treated with vancomycin; lactate and ambulation checked."}})
                       .reference("x")
                       .mention(DocRef::note("n1"), "Sepsis", SemanticType::Problem)
                       .mention(DocRef::note("n1"), "vancomycin", SemanticType::Treatment)
                       .mention(DocRef::note("n1"), "lactate", SemanticType::Test)
                       .mention(DocRef::note("n1"), "ambulation", SemanticType::Other)
                       .build();
    const auto index = build_source_index(a, exact_text_predicate());
    std::vector<std::string> ids;
    for (const auto& g : index.groups()) ids.push_back(g.esg_id);
    const auto gp = guidance_prompt(index, ids);
    EXPECT_EQ(gp.problems, (std::vector<std::string>{"Sepsis"}));
    EXPECT_EQ(gp.treatments, (std::vector<std::string>{"vancomycin"}));
    EXPECT_EQ(gp.tests, (std::vector<std::string>{"lactate"}));
    EXPECT_EQ(gp.esg_ids.size(), 3u);
    EXPECT_EQ(gp.render(), "PROBLEMS:\nSepsis\nTREATMENTS:\nvancomycin\nTESTS:\nlactate\n");
    EXPECT_THROW(guidance_prompt(index, {"nope"}), NotFoundError);
    EXPECT_THROW(guidance_prompt(index, {ids[0], ids[0]}), ValidationError);

    const auto prompt = assemble_prompt(a, InstructionMode::Guided, &gp);
    EXPECT_EQ(prompt.rfind(instruction_text(InstructionMode::Guided), 0), 0u);
    EXPECT_TRUE(prompt.ends_with(kSummaryTerminator));
    EXPECT_NE(prompt.find("TREATMENTS:\nvancomycin"), std::string::npos);
    EXPECT_THROW(assemble_prompt(a, InstructionMode::Speer), ValidationError);
    const auto marked = mark_source(a, index);
    EXPECT_NO_THROW(assemble_prompt(a, InstructionMode::Speer, nullptr, &marked));
}
