// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "coursekit/aligner.hpp"
#include "coursekit/calibration.hpp"
#include "coursekit/cli.hpp"
#include "coursekit/corruption.hpp"
#include "coursekit/entity.hpp"
#include "coursekit/lexical.hpp"
#include "coursekit/oracles.hpp"
#include "coursekit/speer.hpp"
#include "support.hpp"

using namespace coursekit;
using coursekit::testing::exact_text_predicate;
using coursekit::testing::make_mention;
using coursekit::testing::make_sentence;
using coursekit::testing::make_source;
using coursekit::testing::random_tokens;
namespace fs = std::filesystem;

namespace {

// Collects the first few failure messages of one criterion.
struct Check {
    std::vector<std::string> failures;
    std::size_t checks = 0;

    void expect(bool ok, const std::string& what) {
        ++checks;
        if (!ok && failures.size() < 5) failures.push_back(what);
        else if (!ok) failures.emplace_back();
    }
    void near(double got, double want, double tol, const std::string& what) {
        std::ostringstream s;
        s << what << ": got " << got << ", want " << want << " (tol " << tol << ")";
        expect(std::abs(got - want) <= tol, s.str());
    }
};

std::string str(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

// N-grams never cross sentence boundaries.
std::map<TokenList, int> grams(const std::vector<TokenList>& sentences, std::size_t n) {
    std::map<TokenList, int> out;
    for (const auto& t : sentences)
        for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[TokenList(t.begin() + i, t.begin() + i + n)];
    return out;
}

std::pair<double, double> brute_rouge_n(const std::vector<TokenList>& cand, const std::vector<TokenList>& ref,
                                        std::size_t n) {
    const auto c = grams(cand, n), r = grams(ref, n);
    int overlap = 0, nc = 0, nr = 0;
    for (const auto& [g, k] : c) {
        nc += k;
        if (auto it = r.find(g); it != r.end()) overlap += std::min(k, it->second);
    }
    for (const auto& [g, k] : r) nr += k;
    return {nc ? double(overlap) / nc : 0.0, nr ? double(overlap) / nr : 0.0};
}

bool is_subsequence(const TokenList& s, const TokenList& of) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < of.size() && j < s.size(); ++i)
        if (of[i] == s[j]) ++j;
    return j == s.size();
}

// Longest common subsequence by enumerating every subsequence of `a`.
std::size_t brute_lcs(const TokenList& a, const TokenList& b) {
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
        const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
        if (bits <= best) continue;
        TokenList s;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (mask & (1u << i)) s.push_back(a[i]);
        if (is_subsequence(s, b)) best = bits;
    }
    return best;
}

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

double brute_r12(const std::vector<TokenList>& cand, const std::vector<TokenList>& ref) {
    const auto [p1, r1] = brute_rouge_n(cand, ref, 1);
    const auto [p2, r2] = brute_rouge_n(cand, ref, 2);
    return (f1(p1, r1) + f1(p2, r2)) / 2.0;
}

std::vector<SourceSentence> random_source(Rng& rng, std::size_t n, std::size_t max_len, std::size_t vocab) {
    std::vector<SourceSentence> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto toks = random_tokens(rng, max_len, vocab);
        if (toks.empty()) toks.push_back("w0");
        out.push_back(make_source(i, join(toks, " ")));
    }
    return out;
}

template <class F>
void for_each_subset(std::size_t n, std::size_t k, F&& f) {
    std::vector<bool> mask(n, false);
    std::fill(mask.begin(), mask.begin() + static_cast<long>(k), true);
    do {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i]) s.push_back(i);
        f(s);
    } while (std::prev_permutation(mask.begin(), mask.end()));
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void rouge_criterion(Check& c) {
    Rng rng(2024);
    for (int k = 0; k < 200; ++k) {
        const auto cand = random_tokens(rng, 10, 6), ref = random_tokens(rng, 10, 6);
        for (int n : {1, 2}) {
            const auto got = rouge_n(cand, ref, n);
            const auto [p, r] = brute_rouge_n({cand}, {ref}, static_cast<std::size_t>(n));
            c.near(got.precision, p, 1e-12, "R" + std::to_string(n) + " precision case " + std::to_string(k));
            c.near(got.recall, r, 1e-12, "R" + std::to_string(n) + " recall case " + std::to_string(k));
            c.near(got.f1, f1(p, r), 1e-12, "R" + std::to_string(n) + " F1 case " + std::to_string(k));
        }
        const auto lcs = brute_lcs(cand, ref);
        c.expect(lcs_length(cand, ref) == lcs, "LCS length case " + std::to_string(k));
        const double p = cand.empty() ? 0.0 : double(lcs) / cand.size();
        const double r = ref.empty() ? 0.0 : double(lcs) / ref.size();
        c.near(rouge_l(cand, ref).f1, f1(p, r), 1e-12, "RL F1 case " + std::to_string(k));
    }
}

void oracle_gain_criterion(Check& c) {
    Rng rng(7);
    for (int k = 0; k < 50; ++k) {
        const auto src = random_source(rng, 1 + rng.below(8), 8, 10);
        std::vector<TokenList> ref;
        for (std::size_t i = 0, n = 1 + rng.below(3); i < n; ++i) ref.push_back(random_tokens(rng, 8, 10));
        const auto out = oracle_gain(src, ref);
        std::vector<TokenList> chosen;
        std::set<std::size_t> used;
        std::set<TokenList> seen;
        double current = 0.0;
        auto score_with = [&](std::size_t s) {
            auto trial = chosen;
            trial.push_back(src[s].sentence.tokens);
            return brute_r12(trial, ref);
        };
        for (std::size_t step = 0; step < out.selected.size(); ++step) {
            double best = -1.0;
            for (std::size_t s = 0; s < src.size(); ++s)
                if (!used.contains(s) && !seen.contains(src[s].sentence.tokens)) best = std::max(best, score_with(s));
            const auto pos = out.selected[step].position;
            c.near(score_with(pos), best, 1e-12, "case " + std::to_string(k) + " step " + std::to_string(step));
            c.expect(best > current, "case " + std::to_string(k) + " selected a non-improving sentence");
            chosen.push_back(src[pos].sentence.tokens);
            current = brute_r12(chosen, ref);
            used.insert(pos);
            seen.insert(src[pos].sentence.tokens);
        }
        for (std::size_t s = 0; s < src.size(); ++s)
            if (!used.contains(s) && !seen.contains(src[s].sentence.tokens))
                c.expect(score_with(s) <= current + 1e-12, "case " + std::to_string(k) + " stopped early");
    }
}

void alignment_criterion(Check& c) {
    Rng rng(31);
    const auto backend = SimilarityBackend::exact();
    for (int k = 0; k < 100; ++k) {
        const auto src = random_source(rng, 2 + rng.below(6), 8, 12);
        auto ref_toks = random_tokens(rng, 10, 12);
        if (ref_toks.empty()) ref_toks.push_back("w1");
        const auto r = greedy_weighted_align(make_sentence(0, join(ref_toks, " ")), src, backend);
        c.expect(!r.weights.empty() && (r.weights[0].array() == 1.0).all(), "w0 != 1 case " + std::to_string(k));
        for (std::size_t t = 1; t < r.weights.size(); ++t)
            c.expect((r.weights[t].array() <= r.weights[t - 1].array()).all() && (r.weights[t].array() >= 0).all(),
                     "weights increased case " + std::to_string(k));
        std::set<std::size_t> positions;
        for (const auto& a : r.aligned) c.expect(positions.insert(a.position).second, "duplicate alignment");

        const auto pick = rng.below(src.size());
        const auto copy = greedy_weighted_align(make_sentence(0, src[pick].sentence.text), src, backend);
        // An earlier sentence covering every copied token ties with the copy itself.
        bool covers = !copy.aligned.empty() && copy.aligned[0].position <= pick && copy.aligned[0].score == 1.0;
        if (covers) {
            const auto& first = src[copy.aligned[0].position].sentence.tokens;
            const std::set<std::string> have(first.begin(), first.end());
            for (const auto& t : src[pick].sentence.tokens) covers = covers && have.contains(t);
        }
        c.expect(covers, "verbatim copy not aligned first case " + std::to_string(k));
    }
    const std::vector<SourceSentence> disjoint{make_source(0, "alpha beta"), make_source(1, "xray yoke")};
    const auto d = greedy_weighted_align(make_sentence(0, "alpha beta gamma"), disjoint, backend);
    c.expect(d.aligned.size() == 1 && d.aligned[0].position == 0, "vocabulary-disjoint sentence kept");
}

void esg_criterion(Check& c) {
    Rng rng(5);
    for (int k = 0; k < 100; ++k) {
        std::vector<EntityMention> ms;
        for (std::size_t i = 0, n = rng.below(10); i < n; ++i)
            ms.push_back(make_mention("m" + std::to_string(i), "e" + std::to_string(rng.below(4))));
        std::set<std::pair<std::string, std::string>> edges;
        for (std::size_t i = 0; i < ms.size(); ++i)
            for (std::size_t j = i + 1; j < ms.size(); ++j)
                if (rng.below(5) == 0) edges.insert({ms[i].mention_id, ms[j].mention_id});
        auto pred = [&](const EntityMention& x, const EntityMention& y) {
            return edges.contains({x.mention_id, y.mention_id}) || edges.contains({y.mention_id, x.mention_id});
        };
        const auto groups = build_esgs(ms, pred);
        std::multiset<std::string> seen, want;
        for (const auto& g : groups) seen.insert(g.members.begin(), g.members.end());
        for (const auto& m : ms) want.insert(m.mention_id);
        c.expect(seen == want, "not a partition case " + std::to_string(k));
        auto shuffled = ms;
        rng.shuffle(shuffled);
        c.expect(build_esgs(shuffled, pred) == groups, "order dependence case " + std::to_string(k));

        // Salience is monotone under added reference mentions.
        const auto text_pred = exact_text_predicate();
        EsgIndex index(ms, build_esgs(ms, text_pred));
        std::vector<EntityMention> ref;
        for (std::size_t i = 0, n = rng.below(4); i < n; ++i)
            ref.push_back(make_mention("r" + std::to_string(i), "e" + std::to_string(rng.below(6))));
        const double before = label_salience(index, ref, text_pred);
        std::set<std::string> salient;
        for (const auto& g : index.groups())
            if (g.source_salient) salient.insert(g.esg_id);
        ref.push_back(make_mention("extra", "e" + std::to_string(rng.below(6))));
        const double after = label_salience(index, ref, text_pred);
        c.expect(after >= before, "salient fraction decreased case " + std::to_string(k));
        for (const auto& g : index.groups())
            if (salient.contains(g.esg_id)) c.expect(g.source_salient, "group lost salience case " + std::to_string(k));
    }
    c.near(entity_novelty(50, 30), 0.4, 1e-12, "novelty(50, 30)");
}

void entity_metrics_criterion(Check& c) {
    Rng rng(19);
    const auto pred = exact_text_predicate();
    auto mentions = [&](const std::string& prefix, std::size_t max) {
        std::vector<EntityMention> out;
        for (std::size_t i = 0, n = rng.below(max + 1); i < n; ++i)
            out.push_back(make_mention(prefix + std::to_string(i), "e" + std::to_string(rng.below(6))));
        return out;
    };
    auto texts = [](const std::vector<EntityMention>& ms) {
        std::set<std::string> out;
        for (const auto& m : ms) out.insert(m.text);
        return out;
    };
    for (int k = 0; k < 100; ++k) {
        const auto src = mentions("s", 6), ref = mentions("r", 5), model = mentions("g", 5);
        const EsgIndex index(src, build_esgs(src, pred));
        const auto S = texts(src), M = texts(model);
        std::set<std::string> RS, RSM;
        for (const auto& r : ref)
            if (S.contains(r.text)) RS.insert(r.text);
        for (const auto& t : RS)
            if (M.contains(t)) RSM.insert(t);
        const auto got = sgr(aligned_esgs(ref, index, pred), aligned_esgs(model, index, pred));
        c.expect(got.has_value() == !RS.empty(), "SGR emptiness case " + std::to_string(k));
        if (got && !RS.empty()) c.near(*got, double(RSM.size()) / RS.size(), 1e-12, "SGR case " + std::to_string(k));

        const auto hr = hallucination_rate(model, index, pred);
        c.expect(hr.empty == model.empty(), "HR emptiness case " + std::to_string(k));
        if (!model.empty()) {
            double miss = 0;
            for (const auto& m : model) miss += !S.contains(m.text);
            c.near(hr.value, miss / model.size(), 1e-12, "HR case " + std::to_string(k));
        }

        const auto far = faithful_adjusted_recall(ref, model, index, pred);
        double eligible = 0, hit = 0;
        for (const auto& r : ref) {
            if (!S.contains(r.text)) continue;
            ++eligible;
            hit += M.contains(r.text);
        }
        c.expect(far.empty == (eligible == 0), "FaR emptiness case " + std::to_string(k));
        if (eligible > 0) c.near(far.value, hit / eligible, 1e-12, "FaR case " + std::to_string(k));
    }
}

CandidatePool beam_pool(Rng& rng, std::size_t n) {
    CandidatePool pool;
    pool.example_id = "ex";
    for (std::size_t i = 0; i < n; ++i) {
        auto toks = random_tokens(rng, 9, 8);
        if (toks.empty()) toks.push_back("w0");
        Candidate cnd;
        char id[8];
        std::snprintf(id, sizeof id, "c%02zu", i);
        cnd.candidate_id = id;
        cnd.text = join(toks, " ");
        cnd.tokens = tokenize(cnd.text);
        cnd.tag = "DIVERSE_BEAM_PRIMERA";
        cnd.beam_rank = static_cast<int>(i + 1);
        pool.candidates.push_back(std::move(cnd));
    }
    return pool;
}

void selection_criterion(Check& c) {
    Rng rng(41);
    for (int k = 0; k < 30; ++k) {
        const std::size_t n = 4 + rng.below(7);
        const auto pool = beam_pool(rng, n);
        std::vector<double> q;
        for (std::size_t i = 0; i < n; ++i) q.push_back(rng.unit());
        double best = -1.0;
        for_each_subset(n, 4, [&](const std::vector<std::size_t>& s) {
            std::vector<double> v;
            for (auto i : s) v.push_back(q[i]);
            best = std::max(best, (*std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end())) / 3.0);
        });
        const auto sel = select(pool, Strategy::MaxMargin, Task::Relevance, q);
        std::vector<double> got;
        for (const auto& id : sel.ranked)
            for (std::size_t i = 0; i < n; ++i)
                if (pool.candidates[i].candidate_id == id) got.push_back(q[i]);
        c.expect(got.size() == 4, "max-margin set size case " + std::to_string(k));
        c.near(rank_margin(got), best, 1e-12, "max-margin vs exhaustive case " + std::to_string(k));

        const auto hi = select(pool, Strategy::MaxDiversity, Task::Relevance, q);
        const auto lo = select(pool, Strategy::MinDiversity, Task::Relevance, q);
        c.expect(set_statistics(pool, hi, q).diversity >= set_statistics(pool, lo, q).diversity,
                 "diversity max < min case " + std::to_string(k));

        std::set<int> ranks;
        for (const auto& id : select(pool, Strategy::TopBeams, Task::Relevance, q).ranked)
            ranks.insert(*pool.get(id).beam_rank);
        c.expect(ranks == std::set<int>{1, 2, 3, 4}, "top beams case " + std::to_string(k));
    }
    c.expect(method_total(true) == 66, "faithfulness method total " + std::to_string(method_total(true)));
    c.expect(method_total(false) == 20, "relevance method total " + std::to_string(method_total(false)));
}

void losses_criterion(Check& c) {
    c.near(pairwise_margin_loss({0.9, 0.6, 0.2}, 0.01), 0.0, 0.0, "ordered margin loss");
    c.near(pairwise_margin_loss({0.1, 0.2, 0.3}, 0.01), 0.44, 1e-12, "reversed margin loss");

    Eigen::VectorXd h(3), e2(3), e3(3);
    h << 1, 0, 0;
    e2 << 0, 1, 0;
    e3 << 0, 0, 1;
    const double tau = 0.1;
    c.near(latent_contrast_loss({h, h}, {e2, e3}, tau), std::log(2.0) - 1.0 / tau, 1e-9, "closed form");

    Rng rng(12);
    for (int k = 0; k < 50; ++k) {
        auto rnd = [&] {
            Eigen::VectorXd v(3);
            for (int i = 0; i < 3; ++i) v(i) = rng.unit() - 0.5;
            return v;
        };
        std::vector<Eigen::VectorXd> pos{rnd(), rnd(), rnd()}, neg{rnd(), rnd()};
        const double base = latent_contrast_loss(pos, neg, 0.5);
        const Eigen::Vector3d axis = Eigen::Vector3d(rng.unit() + 0.1, rng.unit(), rng.unit()).normalized();
        const Eigen::Matrix3d rot = Eigen::AngleAxisd(6.0 * rng.unit(), axis).toRotationMatrix();
        for (auto& v : pos) v = (1.0 + 9.0 * rng.unit()) * (rot * v);
        for (auto& v : neg) v = (0.1 + rng.unit()) * (rot * v);
        c.near(latent_contrast_loss(pos, neg, 0.5), base, 1e-9, "rotation/scale invariance case " + std::to_string(k));
    }
}

void normalization_criterion(Check& c) {
    Rng rng(8);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> x;
        for (std::size_t i = 0, n = 2 + rng.below(30); i < n; ++i) x.push_back(100 * rng.unit() - 30);
        const auto z = zscores(x);
        c.near(population_mean(z), 0.0, 1e-9, "z mean case " + std::to_string(k));
        c.near(population_stddev(z), 1.0, 1e-9, "z std case " + std::to_string(k));
    }
    const auto g = coverage_combined_metric({1, 2, 3}, {10, 20, 30});
    c.near(g[1], 0.0, 1e-12, "g at the population means");
    for (double v : distillation_targets({{1, 2, 3, 7}, {-1, -2, -3, -7}}))
        c.near(v, 0.0, 1e-12, "opposite-z distillation target");
}

void correlation_criterion(Check& c) {
    Rng rng(9);
    std::vector<double> x, y, ny;
    for (int i = 0; i < 25; ++i) {
        x.push_back(rng.unit());
        y.push_back(2 * x.back() + 1);
        ny.push_back(-x.back());
    }
    c.near(pearson(x, y), 1.0, 1e-12, "pearson(x, 2x + 1)");
    c.near(pearson(x, ny), -1.0, 1e-12, "pearson(x, -x)");
    // Hand ranks: x -> (1, 2.5, 2.5, 4), y -> (1, 3, 2, 4); covariance 4.5, variances 4.5 and 5.
    c.near(spearman({1, 2, 2, 3}, {1, 3, 2, 4}), 4.5 / std::sqrt(4.5 * 5.0), 1e-12, "spearman with ties");
    c.expect(average_ranks({3, 1, 3, 3}) == std::vector<double>{3, 1, 3, 3}, "average ranks of a triple tie");
}

std::string random_text(Rng& rng, std::size_t max_len, std::string_view alphabet) {
    std::string s;
    for (std::size_t i = 0, n = rng.below(max_len + 1); i < n; ++i) s += alphabet[rng.below(alphabet.size())];
    return s;
}

void speer_criterion(Check& c) {
    Rng rng(55);
    for (int k = 0; k < 500; ++k) {
        SpeerDocument doc;
        for (std::size_t s = 0, n = rng.below(5); s < n; ++s) {
            SpeerStep step;
            for (std::size_t p = 0, m = rng.below(4); p < m; ++p) {
                auto span = random_text(rng, 8, "ab {}x.");
                while (!span.empty() && span.front() == '{') span.erase(0, 1);
                while (!span.empty() && span.back() == '}') span.pop_back();
                step.plan.push_back(span);
            }
            auto sentence = random_text(rng, 20, "abc {}#:.");
            const auto b = sentence.find_first_not_of(' ');
            step.sentence = b == std::string::npos ? "" : sentence.substr(b, sentence.find_last_not_of(' ') - b + 1);
            doc.steps.push_back(std::move(step));
        }
        bool ok = false;
        try {
            ok = parse_speer(serialize_speer(doc)) == doc;
        } catch (const std::exception&) {
        }
        c.expect(ok, "parse(serialize(doc)) != doc case " + std::to_string(k));
    }

    const std::string text = "pt {{on}} lasix {x} then aki";
    EntityMention a = make_mention("a", "lasix"), b = make_mention("b", "aki");
    a.start = text.find("lasix");
    a.end = a.start + 5;
    b.start = text.find("aki");
    b.end = b.start + 3;
    const auto marked = mark_text(text, {a, b});
    c.expect(marked.spans.size() == 2, "mark_text kept " + std::to_string(marked.spans.size()) + " spans");
    c.expect(unmark(marked.text) == text, "unmark(mark(text)) != text: " + marked.text);

    for (int k = 0; k < 200; ++k) {
        std::set<std::string> used, guide;
        for (int i = 0; i < 4; ++i) {
            if (rng.below(2)) used.insert("g" + std::to_string(i));
            if (rng.below(2)) guide.insert("g" + std::to_string(i));
        }
        c.expect((adherence_sets(used, guide).f1 == 1.0) == (used == guide), "adherence F1 iff equal sets");
    }

    const auto corpus = load_corpus(coursekit::testing::data_path("mini_corpus.jsonl"));
    const auto pred = exact_text_predicate();
    for (const auto& adm : corpus) {
        auto index = build_source_index(adm, pred);
        label_salience(index, mentions_in(adm, DocRef::reference()), pred);
        const auto plan = oracle_plan(adm, index, pred);
        for (const auto& step : plan.steps) {
            std::size_t cursor = 0;
            for (const auto& span : step.plan) {
                const auto at = step.sentence.find(span, cursor);
                c.expect(at != std::string::npos, adm.admission_id + ": plan span '" + span + "' out of order");
                if (at != std::string::npos) cursor = at + span.size();
            }
        }
    }
}

void corruption_criterion(Check& c) {
    const std::string text = "Sepsis treated with vancomycin; lactate trended down.";
    auto at = [&](const std::string& surface, SemanticType type, const std::string& id) {
        EntityMention m = make_mention(id, surface, type, {}, DocRef::reference());
        m.start = text.find(surface);
        m.end = m.start + surface.size();
        return m;
    };
    const std::vector<EntityMention> ms{at("Sepsis", SemanticType::Problem, "m1"),
                                        at("vancomycin", SemanticType::Treatment, "m2"),
                                        at("lactate", SemanticType::Test, "m3")};
    const std::vector<PoolEntity> pool{{"pneumonia", SemanticType::Problem},
                                       {"cefepime", SemanticType::Treatment},
                                       {"troponin", SemanticType::Test}};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const auto r = swap_entities(text, ms, pool, 1.0, rng);
        c.expect(r.swaps.size() == ms.size(), "s = 1 left mentions unswapped");
        c.expect(r.text.find("Sepsis") == std::string::npos && r.text.find("vancomycin") == std::string::npos &&
                     r.text.find("lactate") == std::string::npos,
                 "original entity survived a full swap: " + r.text);
    }
    const auto codes = revision_codes(tokenize("a b c"), tokenize("a c d"), tokenize("b"));
    c.near(codes.input_frac, 2.0 / 3.0, 1e-12, "input copy fraction");
    c.expect(codes.input_decile == 6, "input decile " + std::to_string(codes.input_decile));

    double prev = INFINITY;
    for (double eps : {1e-1, 1e-2, 1e-4, 1e-8, 1e-12}) {
        const double v = contrastive_loss_value({1 - eps}, {eps});
        c.expect(v < prev, "contrastive loss not decreasing at eps " + str(eps));
        prev = v;
    }
    c.expect(prev < 1e-9, "contrastive loss did not approach 0: " + str(prev));

    const std::vector<SupportedExample> ex{
        {0, "Sepsis treated with vancomycin.", {"Started vancomycin for sepsis."}, {"Pneumonia treated with cefepime."}},
        {1, "Lactate trended down.", {"Lactate down to 1.1."}, {"Troponin trended down."}}};
    Rng rng(3);
    const auto tuples = build_revision_tuples(ex, SimilarityBackend::exact(), rng);
    std::set<std::pair<Polarity, Provenance>> forms;
    for (const auto& t : tuples) forms.insert({t.polarity, t.provenance});
    c.expect(tuples.size() == 8, "tuple count " + std::to_string(tuples.size()));
    c.expect(forms.size() == 4, "distinct tuple forms " + std::to_string(forms.size()));
}

void demo_criterion(Check& c) {
    const fs::path root = fs::temp_directory_path() / ("coursekit_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::vector<std::map<std::string, std::string>> hashes;
    for (const char* run : {"a", "b"}) {
        const auto out = (root / run).string();
        const int code = cli::run({"coursekit", "demo", "--out", out});
        c.expect(code == 0, std::string("demo run ") + run + " exited " + std::to_string(code));
        std::map<std::string, std::string> h;
        try {
            const auto manifest = nlohmann::json::parse(read_file(out + "/manifest.json"));
            for (const auto& o : manifest["outputs"])
                h[fs::path(o["path"].get<std::string>()).filename().string()] = o["hash"];
        } catch (const std::exception& e) {
            c.expect(false, std::string("manifest unreadable: ") + e.what());
        }
        hashes.push_back(std::move(h));
    }
    c.expect(hashes[0].size() >= 20, "demo wrote " + std::to_string(hashes[0].size()) + " outputs");
    c.expect(hashes[0] == hashes[1], "output hashes differ between runs");
    fs::remove_all(root);
}

struct Criterion {
    std::string name;
    std::function<void(Check&)> run;
    double budget_seconds;  // 0: no time limit
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"rouge-oracle: R1/R2/RL match brute force on 200 cases", rouge_criterion, 1.0},
        {"oracle-gain: exhaustive argmax and stop rule on 50 admissions", oracle_gain_criterion, 5.0},
        {"alignment: weights monotone, verbatim copy first, disjoint filtered", alignment_criterion, 0.0},
        {"esg: partition, order independence, salience monotone, novelty 0.4", esg_criterion, 0.0},
        {"entity-metrics: SGR/HR/FaR match set arithmetic on 100 cases", entity_metrics_criterion, 2.0},
        {"selection: max-margin exhaustive, diversity order, top beams, method totals", selection_criterion, 0.0},
        {"losses: margin loss values, latent contrast closed form and invariance", losses_criterion, 0.0},
        {"normalization: z mean 0 / std 1, g at means, opposite-z target", normalization_criterion, 0.0},
        {"correlation: pearson +-1, spearman with ties", correlation_criterion, 0.0},
        {"speer: 500 round trips, brace marks, adherence, oracle plan order", speer_criterion, 0.0},
        {"corruption: full swap, revision codes, loss to 0, tuple forms", corruption_criterion, 0.0},
        {"demo: end to end under 30 s with stable output hashes", demo_criterion, 30.0},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check check;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].run(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (criteria[i].budget_seconds > 0 && secs > criteria[i].budget_seconds)
            check.expect(false, "took " + str(secs) + " s, budget " + str(criteria[i].budget_seconds) + " s");
        const bool ok = check.failures.empty();
        failed += !ok;
        std::printf("%s [%02zu] %s (%zu checks, %.3f s)\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].name.c_str(),
                    check.checks, secs);
        for (const auto& f : check.failures)
            if (!f.empty()) std::printf("       %s\n", f.c_str());
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed ? 1 : 0;
}
