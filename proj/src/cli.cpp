#include "coursekit/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "coursekit/aligner.hpp"
#include "coursekit/analytics.hpp"
#include "coursekit/annotation.hpp"
#include "coursekit/calibration.hpp"
#include "coursekit/corpus.hpp"
#include "coursekit/corruption.hpp"
#include "coursekit/entity.hpp"
#include "coursekit/lexical.hpp"
#include "coursekit/oracles.hpp"
#include "coursekit/speer.hpp"

#ifndef COURSEKIT_DATA_DIR
#define COURSEKIT_DATA_DIR "data"
#endif

namespace coursekit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

class Manifest {
  public:
    explicit Manifest(std::string command) : command_(std::move(command)), started_(Clock::now()) {}

    void config(const std::string& key, json value) { config_[key] = std::move(value); }
    void replace_config(json value) { config_ = std::move(value); }

    void input(const std::string& path) {
        if (path.empty() || inputs_.contains(path)) return;
        inputs_[path] = hex64(fnv1a64(read_file(path)));
    }

    void write(const std::string& path, const std::string& contents) {
        write_file(path, contents);
        outputs_.push_back({{"path", path}, {"hash", hex64(fnv1a64(contents))}, {"bytes", contents.size()}});
    }

    json to_json() const {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started_).count();
        return {{"command", command_}, {"config", config_},   {"inputs", inputs_},
                {"tool_version", kVersion}, {"wall_time_ms", ms}, {"outputs", outputs_}};
    }

    void save(const std::string& path) const { write_file(path, to_json().dump(2) + "\n"); }

  private:
    using Clock = std::chrono::steady_clock;
    std::string command_;
    json config_ = json::object();
    std::map<std::string, std::string> inputs_;
    json outputs_ = json::array();
    Clock::time_point started_;
};

std::string jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results are written by
// index, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Shared inputs
// ---------------------------------------------------------------------------

struct Options {
    std::string corpus;
    std::string train;
    std::string esg;
    std::string backend = "exact";
    std::string predicate = "feature";
    std::string out;
    std::uint64_t seed = 13;
    int jobs = 1;
};

Corpus load_sorted(const std::string& path) {
    Corpus c = load_corpus(path);
    std::sort(c.begin(), c.end(),
              [](const AdmissionRecord& a, const AdmissionRecord& b) { return a.admission_id < b.admission_id; });
    return c;
}

// Per-admission state. Predicates hold references into this object, so it
// lives behind a unique_ptr and is never moved.
struct AdmissionContext {
    const AdmissionRecord* admission = nullptr;
    std::vector<SourceSentence> source;
    TfidfIndex tfidf;
    SynonymPredicate predicate;
    EsgIndex index;
    double salient_fraction = 0.0;
};

struct Workspace {
    Options options;
    Corpus corpus;
    SimilarityBackend backend = SimilarityBackend::exact();
    std::vector<std::unique_ptr<AdmissionContext>> contexts;

    const AdmissionContext& context(const std::string& admission_id) const {
        for (const auto& c : contexts) {
            if (c->admission->admission_id == admission_id) return *c;
        }
        throw NotFoundError("unknown admission '" + admission_id + "'");
    }
};

std::unique_ptr<Workspace> open_workspace(const Options& options, Manifest& manifest, bool need_esg = true) {
    auto ws = std::make_unique<Workspace>();
    ws->options = options;
    manifest.input(options.corpus);
    ws->corpus = load_sorted(options.corpus);
    ws->backend = SimilarityBackend::from_spec(options.backend);
    if (options.backend.starts_with("vectors:")) manifest.input(options.backend.substr(8));
    if (options.predicate != "feature" && options.predicate != "embedding")
        throw ValidationError("--predicate: expected feature or embedding, got '" + options.predicate + "'");
    manifest.config("corpus", options.corpus);
    manifest.config("backend", ws->backend.describe());
    manifest.config("predicate", options.predicate);
    manifest.config("seed", options.seed);
    manifest.config("jobs", options.jobs);

    std::map<std::string, std::vector<EntitySynonymGroup>> sidecar;
    if (!options.esg.empty()) {
        manifest.input(options.esg);
        manifest.config("esg", options.esg);
        sidecar = parse_esg_file(read_file(options.esg));
    }

    ws->contexts.resize(ws->corpus.size());
    parallel_for(ws->corpus.size(), options.jobs, [&](std::size_t i) {
        auto ctx = std::make_unique<AdmissionContext>();
        const auto& a = ws->corpus[i];
        ctx->admission = &a;
        ctx->source = source_sentences(a);
        if (options.predicate == "feature") {
            std::vector<std::string> texts;
            for (const auto& m : a.mentions) texts.push_back(m.text);
            ctx->tfidf = TfidfIndex(texts);
            ctx->predicate = feature_predicate(ws->backend, ctx->tfidf);
        } else {
            ctx->predicate = embedding_predicate(ws->backend);
        }
        if (need_esg) {
            if (auto it = sidecar.find(a.admission_id); it != sidecar.end()) {
                ctx->index = EsgIndex(source_mentions(a), it->second);
                std::size_t salient = 0;
                for (const auto& g : ctx->index.groups()) salient += g.source_salient;
                ctx->salient_fraction = ctx->index.groups().empty()
                                            ? 0.0
                                            : static_cast<double>(salient) /
                                                  static_cast<double>(ctx->index.groups().size());
            } else {
                ctx->index = build_source_index(a, ctx->predicate);
                ctx->salient_fraction =
                    label_salience(ctx->index, mentions_in(a, DocRef::reference()), ctx->predicate);
            }
        }
        ws->contexts[i] = std::move(ctx);
    });
    return ws;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

json rouge_json(const RougeScore& r) { return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}}; }

TokenList concat_tokens(const std::vector<SourceSentence>& source) {
    TokenList out;
    for (const auto& s : source) out.insert(out.end(), s.sentence.tokens.begin(), s.sentence.tokens.end());
    return out;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

void cmd_analyze(const Options& o, Manifest& m, const std::string& out) {
    auto ws = open_workspace(o, m, false);
    std::vector<json> rows(ws->corpus.size());
    parallel_for(ws->corpus.size(), o.jobs, [&](std::size_t i) {
        const auto& ctx = *ws->contexts[i];
        const auto& a = *ctx.admission;
        const TokenList source = concat_tokens(ctx.source);
        const TokenList ref = tokenize(a.reference);
        json row{{"admission_id", a.admission_id},
                 {"notes", a.notes.size()},
                 {"source_sentences", ctx.source.size()},
                 {"source_tokens", source.size()},
                 {"reference_tokens", ref.size()},
                 {"reference_sentences", reference_sentences(a).size()}};
        if (!ref.empty()) {
            const auto frag = extractive_fragments(ref, source);
            row["coverage"] = frag.coverage;
            row["density"] = frag.density;
            row["fragments"] = frag.fragments.size();
            row["compression"] = compression_ratio(source.size(), ref.size());
        }
        json gen = json::object();
        for (const auto& [system, text] : a.generated) {
            const TokenList g = tokenize(text);
            gen[system.empty() ? "GENERATED" : system] = {{"rouge1", rouge_json(rouge_n(g, ref, 1))},
                                                          {"rouge2", rouge_json(rouge_n(g, ref, 2))},
                                                          {"rougeL", rouge_json(rouge_l(g, ref))}};
        }
        row["generated"] = gen;
        rows[i] = std::move(row);
    });
    std::vector<double> cov, dens, comp;
    for (const auto& r : rows) {
        if (!r.contains("coverage")) continue;
        cov.push_back(r["coverage"]);
        dens.push_back(r["density"]);
        comp.push_back(r["compression"]);
    }
    json report{{"admissions", rows},
                {"corpus", {{"admissions", rows.size()},
                            {"mean_coverage", mean_of(cov)},
                            {"mean_density", mean_of(dens)},
                            {"mean_compression", mean_of(comp)}}},
                {"rouge_config", "lowercased tokens, no stemming, no stopword removal"}};
    m.write(out, report.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// esg
// ---------------------------------------------------------------------------

void cmd_esg(const Options& o, Manifest& m, const std::string& out) {
    auto ws = open_workspace(o, m);
    std::vector<json> rows;
    for (const auto& ctx : ws->contexts) {
        for (const auto& g : ctx->index.groups()) rows.push_back(esg_to_json(ctx->admission->admission_id, g, ctx->index));
    }
    m.write(out, jsonl(rows));
}

// ---------------------------------------------------------------------------
// align
// ---------------------------------------------------------------------------

void cmd_align(const Options& o, const std::string& method_text, Manifest& m, const std::string& out) {
    const auto method = AlignmentMethod::parse(method_text);
    m.config("method", method.name());
    auto ws = open_workspace(o, m, method.kind == AlignKind::EntityChain);
    std::vector<std::vector<json>> per(ws->corpus.size());
    parallel_for(ws->corpus.size(), o.jobs, [&](std::size_t i) {
        const auto& ctx = *ws->contexts[i];
        AlignInputs in{ctx.admission, &ctx.source, &ws->backend, &ctx.index, &ctx.predicate};
        for (const auto& s : reference_sentences(*ctx.admission)) {
            json j = to_json(align(method, s, in));
            j["admission_id"] = ctx.admission->admission_id;
            per[i].push_back(std::move(j));
        }
    });
    std::vector<json> rows;
    for (auto& p : per) rows.insert(rows.end(), p.begin(), p.end());
    m.write(out, jsonl(rows));
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

std::vector<OracleStrategy> parse_strategies(const std::string& text) {
    if (text == "all")
        return {OracleStrategy::Random,    OracleStrategy::LexRank,   OracleStrategy::TopK,    OracleStrategy::Gain,
                OracleStrategy::SentAlign, OracleStrategy::Retrieval, OracleStrategy::Ensemble};
    std::vector<OracleStrategy> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        out.push_back(parse_oracle_strategy(text.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

void cmd_oracle(const Options& o, const std::string& strategy_text, std::size_t budget_flag, Manifest& m,
                const std::string& out, const std::string& report_path) {
    const auto strategies = parse_strategies(strategy_text);
    auto ws = open_workspace(o, m, false);
    Corpus train;
    if (!o.train.empty()) {
        m.input(o.train);
        m.config("train", o.train);
        train = load_sorted(o.train);
    }
    const Corpus& bm25_corpus = o.train.empty() ? ws->corpus : train;
    const std::size_t budget = budget_flag ? budget_flag : mean_reference_length(bm25_corpus);
    m.config("budget", budget);
    m.config("strategy", strategy_text);

    std::vector<std::vector<json>> per(ws->corpus.size());
    std::vector<std::map<OracleStrategy, std::array<RougeScore, 2>>> scores(ws->corpus.size());
    parallel_for(ws->corpus.size(), o.jobs, [&](std::size_t i) {
        const auto& ctx = *ws->contexts[i];
        const auto& a = *ctx.admission;
        const auto ref_sents = reference_sentences(a);
        const TokenList ref = tokenize(a.reference);
        std::vector<TokenList> ref_tokens;
        for (const auto& s : ref_sents) ref_tokens.push_back(s.tokens);
        std::optional<Bm25Index> index;
        for (auto strategy : strategies) {
            if ((strategy == OracleStrategy::Retrieval || strategy == OracleStrategy::Ensemble) && !index)
                index.emplace(reference_index(bm25_corpus, a.admission_id));
            ExtractiveSummary s;
            switch (strategy) {
                case OracleStrategy::Random:
                    s = random_baseline(ctx.source, budget, derive_seed(o.seed, "oracle/random/" + a.admission_id));
                    break;
                case OracleStrategy::LexRank: s = lexrank(ctx.source, budget); break;
                case OracleStrategy::TopK: s = oracle_top_k(ctx.source, ref, budget); break;
                case OracleStrategy::Gain: s = oracle_gain(ctx.source, ref_tokens); break;
                case OracleStrategy::SentAlign: s = oracle_sent_align(ctx.source, ref_sents); break;
                case OracleStrategy::Retrieval: s = oracle_retrieval(ref_sents, *index); break;
                case OracleStrategy::Ensemble: s = oracle_sa_plus_retrieval(ctx.source, ref_sents, *index); break;
            }
            json j = to_json(s);
            j["admission_id"] = a.admission_id;
            per[i].push_back(std::move(j));
            const TokenList toks = s.tokens();
            scores[i][strategy] = {rouge_n(toks, ref, 1), rouge_n(toks, ref, 2)};
        }
    });
    std::vector<json> rows;
    for (auto& p : per) rows.insert(rows.end(), p.begin(), p.end());
    m.write(out, jsonl(rows));

    json report = json::array();
    for (auto strategy : strategies) {
        RougeScore r1{}, r2{};
        for (const auto& s : scores) {
            const auto& [a1, a2] = s.at(strategy);
            r1.precision += a1.precision, r1.recall += a1.recall, r1.f1 += a1.f1;
            r2.precision += a2.precision, r2.recall += a2.recall, r2.f1 += a2.f1;
        }
        const double n = scores.empty() ? 1.0 : static_cast<double>(scores.size());
        for (auto* r : {&r1, &r2}) r->precision /= n, r->recall /= n, r->f1 /= n;
        report.push_back({{"strategy", to_string(strategy)}, {"rouge1", rouge_json(r1)}, {"rouge2", rouge_json(r2)}});
    }
    m.write(report_path, json{{"budget", budget}, {"strategies", report}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// corrupt / revision-tuples
// ---------------------------------------------------------------------------

std::vector<PoolEntity> pool_of(const std::vector<EntityMention>& mentions) {
    std::vector<PoolEntity> pool;
    std::set<std::pair<std::string, SemanticType>> seen;
    for (const auto& m : mentions) {
        if (seen.insert({normalize_mention(m.text), m.semantic_type}).second) pool.push_back({m.text, m.semantic_type});
    }
    return pool;
}

std::vector<EntityMention> extrinsic_mentions(const Corpus& corpus, const std::string& exclude) {
    std::vector<EntityMention> out;
    for (const auto& a : corpus) {
        if (a.admission_id == exclude) continue;
        auto s = source_mentions(a);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

// Candidate spans for masking: entity mentions plus fixed three-token windows.
std::vector<TokenSpan> mask_candidates(const std::string& text, const std::vector<EntityMention>& mentions) {
    std::vector<std::pair<std::size_t, std::size_t>> chars;
    for (const auto& m : mentions) chars.push_back({m.start, m.end});
    auto spans = char_to_token_spans(text, chars);
    const std::size_t n = tokenize(text).size();
    for (std::size_t i = 0; i + 3 <= n; i += 3) spans.push_back({i, i + 3});
    return spans;
}

struct CorruptSettings {
    std::string mode = "swap-intrinsic";
    double s = 0.5;
    double mm = 0.25;
    int candidates = 1;
};

json corrupt_one(const Corpus& corpus, const AdmissionRecord& a, const CorruptSettings& cs, Rng& rng) {
    const auto ref_mentions = mentions_in(a, DocRef::reference());
    json j{{"admission_id", a.admission_id}, {"mode", cs.mode}};
    if (cs.mode == "mask") {
        const auto result = delete_spans(tokenize(a.reference), mask_candidates(a.reference, ref_mentions), cs.mm, rng);
        j["text"] = join(result.tokens, " ");
        j["masked_tokens"] = result.masked_tokens;
        json spans = json::array();
        for (const auto& s : result.spans) spans.push_back({s.begin, s.end});
        j["spans"] = spans;
        j["m"] = cs.mm;
        return j;
    }
    const bool intrinsic = cs.mode == "swap-intrinsic";
    const auto pool_mentions = intrinsic ? source_mentions(a) : extrinsic_mentions(corpus, a.admission_id);
    const auto result = swap_entities(a.reference, ref_mentions, pool_of(pool_mentions), cs.s, rng);
    json swaps = json::array();
    std::vector<std::string> removed;
    for (const auto& s : result.swaps) {
        swaps.push_back({{"mention_id", s.mention_id},
                         {"original", s.original},
                         {"replacement", s.replacement},
                         {"start", s.start},
                         {"end", s.end}});
        removed.push_back(s.original);
    }
    std::vector<std::vector<EntityMention>> neighbors{source_mentions(a)};
    const auto distractors = build_distractor_set(neighbors);
    std::vector<std::string> usable;
    for (const auto& d : distractors) {
        if (d.find(';') == std::string::npos && d.find(kRedressSeparator) == std::string::npos && trim(d) == d)
            usable.push_back(d);
    }
    const auto input =
        encode_redress_input(static_cast<int>(result.swaps.size()), usable, removed, result.text);
    j["text"] = result.text;
    j["swaps"] = swaps;
    j["skipped"] = result.skipped;
    j["s"] = cs.s;
    j["redress_input"] = serialize_redress(input);
    return j;
}

void cmd_corrupt(const Options& o, const CorruptSettings& cs, Manifest& m, const std::string& out) {
    if (cs.mode != "swap-intrinsic" && cs.mode != "swap-extrinsic" && cs.mode != "mask")
        throw ValidationError("--mode: expected swap-intrinsic, swap-extrinsic or mask, got '" + cs.mode + "'");
    CorruptionSpec spec{cs.s, cs.mode == "swap-extrinsic" ? SwapMode::Extrinsic : SwapMode::Intrinsic, cs.mm, o.seed};
    spec.validate();
    if (cs.candidates < 1) throw ValidationError("--candidates must be >= 1");
    m.config("mode", cs.mode);
    m.config("s", cs.s);
    m.config("m", cs.mm);
    m.config("candidates", cs.candidates);
    auto ws = open_workspace(o, m, false);
    std::vector<std::vector<json>> per(ws->corpus.size());
    parallel_for(ws->corpus.size(), o.jobs, [&](std::size_t i) {
        const auto& a = ws->corpus[i];
        for (int c = 0; c < cs.candidates; ++c) {
            Rng rng(derive_seed(o.seed, "corrupt/" + cs.mode + "/" + a.admission_id + "/" + std::to_string(c)));
            json j = corrupt_one(ws->corpus, a, cs, rng);
            j["candidate"] = c;
            per[i].push_back(std::move(j));
        }
    });
    std::vector<json> rows;
    for (auto& p : per) rows.insert(rows.end(), p.begin(), p.end());
    m.write(out, jsonl(rows));
}

void cmd_revision_tuples(const Options& o, Manifest& m, const std::string& out) {
    auto ws = open_workspace(o, m, true);
    std::vector<std::vector<json>> per(ws->corpus.size());
    parallel_for(ws->corpus.size(), o.jobs, [&](std::size_t i) {
        const auto& ctx = *ws->contexts[i];
        const auto& a = *ctx.admission;
        const auto ref_mentions = mentions_in(a, DocRef::reference());
        const auto pool = pool_of(source_mentions(a));
        const AlignmentMethod method = AlignmentMethod::parse("bs-gain");
        AlignInputs in{&a, &ctx.source, &ws->backend, &ctx.index, &ctx.predicate};
        std::vector<SupportedExample> examples;
        for (const auto& s : reference_sentences(a)) {
            const auto result = align(method, s, in);
            std::vector<SourceSentence> aligned;
            for (const auto& al : result.aligned) aligned.push_back(ctx.source[al.position]);
            const auto verdict = support_verdict(s, aligned, ref_mentions, ws->backend, ctx.predicate);
            if (!verdict.supported) continue;
            SupportedExample ex{s.index, s.text, {}, {}};
            for (const auto& al : aligned) ex.context.push_back(al.sentence.text);
            auto local = mentions_within(ref_mentions, DocRef::reference(), s.begin, s.end);
            for (auto& lm : local) lm.start -= s.begin, lm.end -= s.begin;
            for (int c = 0; c < 3; ++c) {
                Rng rng(derive_seed(o.seed, "redress/" + a.admission_id + "/" + std::to_string(s.index) + "/" +
                                                std::to_string(c)));
                const auto k = sample_swap_count(local.size(), rng);
                auto swapped = swap_k_entities(s.text, local, pool, k, rng);
                if (swapped.text != s.text) ex.corruptions.push_back(swapped.text);
            }
            examples.push_back(std::move(ex));
        }
        Rng rng(derive_seed(o.seed, "tuples/" + a.admission_id));
        for (const auto& t : build_revision_tuples(examples, ws->backend, rng)) {
            json j = to_json(t);
            j["admission_id"] = a.admission_id;
            per[i].push_back(std::move(j));
        }
    });
    std::vector<json> rows;
    for (auto& p : per) rows.insert(rows.end(), p.begin(), p.end());
    m.write(out, jsonl(rows));
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

std::vector<double> pool_quality(const CandidatePool& pool, const MetricNormalizer& normalizer) {
    std::vector<double> q;
    const auto metrics = normalizer.metrics();
    for (const auto& c : pool.candidates) q.push_back(normalizer.aggregate(c.scores, metrics));
    return q;
}

MetricNormalizer fit_population(const std::vector<CandidatePool>& pools, const std::string& name) {
    std::map<std::string, std::vector<double>> values;
    std::set<std::string> metrics;
    for (const auto& p : pools) {
        for (const auto& c : p.candidates) {
            for (const auto& [k, v] : c.scores) metrics.insert(k);
        }
    }
    for (const auto& p : pools) {
        for (const auto& c : p.candidates) {
            for (const auto& k : metrics) {
                auto it = c.scores.find(k);
                if (it == c.scores.end())
                    throw ValidationError("pool " + p.example_id + ": candidate " + c.candidate_id +
                                          " lacks metric '" + k + "'");
                values[k].push_back(it->second);
            }
        }
    }
    return MetricNormalizer::fit(name, values);
}

void run_select(const std::vector<CandidatePool>& pools, const std::string& population, Task task,
                const std::string& strategy_text, std::uint64_t seed, Manifest& m, const std::string& out,
                const std::string& stats_path) {
    std::vector<Strategy> strategies;
    if (strategy_text == "all") strategies = strategies_for(task);
    else strategies.push_back(parse_strategy(strategy_text));
    const auto normalizer = fit_population(pools, population);
    for (const auto& w : normalizer.warnings()) std::cerr << "warning: " << w << "\n";
    SelectOptions options;
    options.seed = seed;

    std::vector<json> rows;
    json stats = json::object();
    for (auto strategy : strategies) {
        std::vector<double> margin, diversity, quality, ll, length;
        for (const auto& pool : pools) {
            const auto q = pool_quality(pool, normalizer);
            auto sel = select(pool, strategy, task, q, options);
            const auto st = set_statistics(pool, sel, q);
            json j = to_json(sel);
            j["example_id"] = pool.example_id;
            j["statistics"] = to_json(st);
            rows.push_back(std::move(j));
            margin.push_back(st.margin);
            diversity.push_back(st.diversity);
            quality.push_back(st.mean_quality);
            ll.push_back(st.mean_log_likelihood);
            length.push_back(st.mean_length);
        }
        stats[to_string(strategy)] = {{"mean_quality", mean_of(quality)},
                                      {"margin", mean_of(margin)},
                                      {"diversity", mean_of(diversity)},
                                      {"mean_log_likelihood", mean_of(ll)},
                                      {"mean_length", mean_of(length)}};
    }
    m.write(out, jsonl(rows));
    json pool_stats = json::array();
    for (const auto& pool : pools) {
        json j = to_json(pool_statistics(pool, pool_quality(pool, normalizer)));
        j["example_id"] = pool.example_id;
        j["method_count_mismatches"] = method_count_mismatches(pool, task == Task::Faithfulness);
        pool_stats.push_back(std::move(j));
    }
    json normalizer_json = json::object();
    for (const auto& k : normalizer.metrics())
        normalizer_json[k] = {{"mean", normalizer.mean(k)}, {"stddev", normalizer.stddev(k)}};
    m.write(stats_path, json{{"task", to_string(task)},
                             {"population", population},
                             {"normalizer", normalizer_json},
                             {"excluded_metrics", normalizer.excluded()},
                             {"strategies", stats},
                             {"pools", pool_stats}}
                            .dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// speer
// ---------------------------------------------------------------------------

struct Generation {
    std::string admission_id;
    std::string output_text;
};

std::vector<Generation> parse_generations(const std::string& text) {
    std::vector<Generation> out;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            out.push_back({j.at("admission_id").get<std::string>(), j.at("output_text").get<std::string>()});
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("generations: ") + e.what(), line_no);
        } catch (const json::exception& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": generations: " + e.what());
        }
    }
    return out;
}

std::set<std::string> salient_ids(const EsgIndex& index) {
    std::set<std::string> out;
    for (const auto& g : index.groups()) {
        if (g.source_salient) out.insert(g.esg_id);
    }
    return out;
}

void cmd_speer(Options o, const std::string& action, const std::string& in_path, Manifest& m,
               const std::string& out) {
    m.config("action", action);
    auto ws = open_workspace(o, m, true);
    std::vector<json> rows;
    if (action == "mark") {
        for (const auto& ctx : ws->contexts) {
            const auto& a = *ctx->admission;
            const auto marked = mark_source(a, ctx->index);
            json notes = json::array(), log = json::array();
            for (const auto& mn : marked) {
                json spans = json::array();
                for (const auto& s : mn.source.spans)
                    spans.push_back({{"mention_id", s.mention_id},
                                     {"original", {s.original_begin, s.original_end}},
                                     {"marked", {s.marked_begin, s.marked_end}}});
                notes.push_back({{"note_id", mn.note_id}, {"text", mn.source.text}, {"spans", spans}});
                for (const auto& l : mn.source.log) log.push_back(mn.note_id + ": " + l);
            }
            const auto guidance = oracle_guidance(ctx->index, a.admission_id, o.seed);
            rows.push_back({{"admission_id", a.admission_id},
                            {"notes", notes},
                            {"log", log},
                            {"guidance", guidance.render()},
                            {"prompt", assemble_prompt(a, InstructionMode::Speer, nullptr, &marked)}});
        }
    } else if (action == "plan") {
        for (const auto& ctx : ws->contexts) {
            const auto doc = oracle_plan(*ctx->admission, ctx->index, ctx->predicate);
            json j = to_json(doc);
            j["admission_id"] = ctx->admission->admission_id;
            j["output_text"] = serialize_speer(doc);
            rows.push_back(std::move(j));
        }
    } else if (action == "parse" || action == "score") {
        if (in_path.empty()) throw ValidationError("speer " + action + ": --in is required");
        m.input(in_path);
        std::vector<double> f1s;
        for (const auto& g : parse_generations(read_file(in_path))) {
            json j{{"admission_id", g.admission_id}};
            try {
                const auto doc = parse_speer(g.output_text);
                if (action == "parse") {
                    j.update(to_json(doc));
                } else {
                    const auto& ctx = ws->context(g.admission_id);
                    const auto gaz = gazetteer_from(source_mentions(*ctx.admission));
                    const auto mentions = gazetteer_mentions(doc.summary(), DocRef::generated("speer"), gaz);
                    const auto adh = adherence(mentions, salient_ids(ctx.index), ctx.index, ctx.predicate);
                    j["adherence"] = to_json(adh);
                    f1s.push_back(adh.f1);
                }
            } catch (const ParseError& e) {
                j["error"] = e.what();
            }
            rows.push_back(std::move(j));
        }
        if (action == "score") m.config("mean_f1", mean_of(f1s));
    } else {
        throw ValidationError("speer: expected mark, plan, parse or score, got '" + action + "'");
    }
    m.write(out, jsonl(rows));
}

// ---------------------------------------------------------------------------
// analytics
// ---------------------------------------------------------------------------

void cmd_analytics(const Options& o, Manifest& m, const std::string& out) {
    auto ws = open_workspace(o, m, true);
    const std::vector<OrderingStrategy> orderings{OrderingStrategy::Forward, OrderingStrategy::Backward,
                                                  OrderingStrategy::GreedyOracle};
    std::map<OrderingStrategy, std::vector<double>> decile_sum;
    std::map<OrderingStrategy, std::size_t> decile_n;
    std::vector<double> lead_mass(10, 0.0);
    std::size_t lead_samples = 0;
    std::vector<EsgFrequency> freq;
    std::vector<double> salient, singleton, adjacent, novelty;
    Eigen::Matrix3d counts = Eigen::Matrix3d::Zero();

    for (const auto& ctx : ws->contexts) {
        const auto& a = *ctx->admission;
        salient.push_back(ctx->salient_fraction);
        if (!a.notes.empty()) {
            for (const auto& curve : ordering_curves(a, ctx->index, ctx->predicate)) {
                if (curve.empty) continue;
                auto& sum = decile_sum[curve.strategy];
                sum.resize(curve.deciles.size(), 0.0);
                for (std::size_t d = 0; d < curve.deciles.size(); ++d) sum[d] += curve.deciles[d];
                ++decile_n[curve.strategy];
            }
        }
        const auto lead = lead_bias_histogram(a, ctx->index, ctx->predicate);
        if (!lead.empty) {
            for (std::size_t b = 0; b < lead.mass.size(); ++b)
                lead_mass[b] += lead.mass[b] * static_cast<double>(lead.samples);
            lead_samples += lead.samples;
        }
        for (const auto& g : ctx->index.groups()) freq.push_back({g.members.size(), g.source_salient});

        const auto ref_mentions = mentions_in(a, DocRef::reference());
        std::vector<std::vector<std::string>> assignments;
        std::vector<SemanticType> types;
        for (const auto& s : reference_sentences(a)) {
            const auto local = mentions_within(ref_mentions, DocRef::reference(), s.begin, s.end);
            const auto ids = aligned_esgs(local, ctx->index, ctx->predicate);
            assignments.emplace_back(ids.begin(), ids.end());
            for (const auto& lm : local) types.push_back(lm.semantic_type);
        }
        const auto grid = entity_grid(assignments);
        if (!grid.empty) {
            singleton.push_back(grid.singleton_fraction);
            adjacent.push_back(grid.adjacent_fraction);
        }
        counts += transition_matrix(types).counts;
        if (!ref_mentions.empty()) {
            std::size_t supported = 0;
            for (const auto& rm : ref_mentions) supported += ctx->index.has_synonym(rm, ctx->predicate);
            novelty.push_back(entity_novelty(ref_mentions.size(), supported));
        }
    }

    json ordering = json::object();
    for (auto s : orderings) {
        auto sum = decile_sum[s];
        for (auto& v : sum) v /= static_cast<double>(std::max<std::size_t>(1, decile_n[s]));
        ordering[to_string(s)] = {{"deciles", sum}, {"admissions", decile_n[s]}};
    }
    if (lead_samples)
        for (auto& v : lead_mass) v /= static_cast<double>(lead_samples);
    json fragments = json::array();
    for (const auto& p : fragment_length_by_rank(ws->corpus))
        fragments.push_back({{"rank", p.rank}, {"mean_length", p.mean_length}, {"count", p.count}});
    json buckets = json::array();
    for (const auto& b : frequency_salience_curve(freq))
        buckets.push_back({{"label", b.label}, {"groups", b.groups}, {"salient_probability", b.salient_probability}});
    Eigen::Matrix3d probs = Eigen::Matrix3d::Zero();
    for (int r = 0; r < 3; ++r) {
        const double total = counts.row(r).sum();
        if (total > 0) probs.row(r) = counts.row(r) / total;
    }
    json transitions = json::array();
    for (int r = 0; r < 3; ++r) transitions.push_back({probs(r, 0), probs(r, 1), probs(r, 2)});

    json report{{"fragment_length_by_rank", fragments},
                {"ordering", ordering},
                {"lead_bias", {{"mass", lead_mass}, {"samples", lead_samples}}},
                {"frequency_salience", buckets},
                {"mean_salient_fraction", mean_of(salient)},
                {"entity_grid", {{"singleton_fraction", mean_of(singleton)}, {"adjacent_fraction", mean_of(adjacent)}}},
                {"transitions", {{"order", {"PROBLEM", "TREATMENT", "TEST"}}, {"probabilities", transitions}}},
                {"mean_entity_novelty", mean_of(novelty)}};
    m.write(out, report.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

std::vector<CandidatePool> relevance_pools(const Workspace& ws, std::uint64_t seed, std::size_t limit) {
    std::vector<CandidatePool> pools;
    const std::size_t budget = std::max<std::size_t>(8, mean_reference_length(ws.corpus));
    for (std::size_t i = 0; i < std::min(limit, ws.contexts.size()); ++i) {
        const auto& ctx = *ws.contexts[i];
        const TokenList ref = tokenize(ctx.admission->reference);
        CandidatePool pool;
        pool.example_id = ctx.admission->admission_id;
        for (const std::string gen : {"DIVERSE_BEAM_PRIMERA", "DIVERSE_BEAM_LONGT5"}) {
            for (int b = 1; b <= 10; ++b) {
                const auto tag = gen + "/" + std::to_string(b);
                const auto s = random_baseline(ctx.source, budget, derive_seed(seed, "pool/" + pool.example_id + tag));
                Candidate c;
                c.candidate_id = (gen == "DIVERSE_BEAM_PRIMERA" ? "p" : "l") + std::string(b < 10 ? "0" : "") +
                                 std::to_string(b);
                std::vector<std::string> parts;
                for (const auto& e : s.selected) parts.push_back(e.text);
                c.text = join(parts, " ");
                c.tokens = tokenize(c.text);
                c.tag = gen;
                c.beam_rank = b;
                c.scores = {{"rouge1", rouge_n(c.tokens, ref, 1).f1},
                            {"rouge2", rouge_n(c.tokens, ref, 2).f1},
                            {"rougeL", rouge_l(c.tokens, ref).f1}};
                Rng rng(derive_seed(seed, "ll/" + pool.example_id + tag));
                c.log_likelihood = -1.0 - 0.05 * b - 0.01 * rng.unit();
                pool.candidates.push_back(std::move(c));
            }
        }
        pools.push_back(std::move(pool));
    }
    return pools;
}

std::vector<CandidatePool> faithfulness_pools(const Workspace& ws, std::uint64_t seed, std::size_t limit) {
    std::vector<CandidatePool> pools;
    for (std::size_t i = 0; i < std::min(limit, ws.contexts.size()); ++i) {
        const auto& ctx = *ws.contexts[i];
        const auto& a = *ctx.admission;
        std::string source_text;
        for (const auto& s : ctx.source) source_text += s.sentence.text + "\n";
        std::set<std::string> vocab;
        for (const auto& s : ctx.source) vocab.insert(s.sentence.tokens.begin(), s.sentence.tokens.end());
        const TokenList ref = tokenize(a.reference);
        const auto ref_mentions = mentions_in(a, DocRef::reference());

        CandidatePool pool;
        pool.example_id = a.admission_id;
        pool.source = source_text;
        auto add = [&](const std::string& tag, int k, std::string text) {
            Candidate c;
            char id[48];
            std::snprintf(id, sizeof id, "%s-%02d", to_lower_ascii(tag).c_str(), k);
            c.candidate_id = id;
            c.text = std::move(text);
            c.tokens = tokenize(c.text);
            c.tag = tag;
            std::size_t in_source = 0;
            for (const auto& t : c.tokens) in_source += vocab.contains(t);
            const double precision =
                c.tokens.empty() ? 0.0 : static_cast<double>(in_source) / static_cast<double>(c.tokens.size());
            c.scores = {{"source_precision", precision}, {"reference_r12", r12(c.tokens, ref)}};
            Rng rng(derive_seed(seed, "ll/" + pool.example_id + "/" + c.candidate_id));
            c.log_likelihood = -(1.0 - precision) - 0.1 * rng.unit();
            pool.candidates.push_back(std::move(c));
        };
        CorruptSettings cs;
        for (const auto& [tag, mode, s, mm] : std::vector<std::tuple<std::string, std::string, double, double>>{
                 {"MASK_FILL_LOW", "mask", 0.0, 0.25},
                 {"MASK_FILL_HIGH", "mask", 0.0, 0.75},
                 {"SWAP_INTRINSIC_LOW", "swap-intrinsic", 0.5, 0.0},
                 {"SWAP_INTRINSIC_HIGH", "swap-intrinsic", 1.0, 0.0},
                 {"SWAP_EXTRINSIC_LOW", "swap-extrinsic", 0.5, 0.0},
                 {"SWAP_EXTRINSIC_HIGH", "swap-extrinsic", 1.0, 0.0}}) {
            cs.mode = mode;
            cs.s = s;
            cs.mm = mm;
            for (int k = 0; k < 10; ++k) {
                Rng rng(derive_seed(seed, "pool/" + a.admission_id + "/" + tag + "/" + std::to_string(k)));
                add(tag, k, corrupt_one(ws.corpus, a, cs, rng)["text"].get<std::string>());
            }
        }
        // Paraphrase stand-in: the reference sentences in a seeded order.
        const auto sentences = reference_sentences(a);
        for (int k = 0; k < 5; ++k) {
            std::vector<std::string> parts;
            for (const auto& s : sentences) parts.push_back(s.text);
            Rng rng(derive_seed(seed, "paraphrase/" + a.admission_id + "/" + std::to_string(k)));
            rng.shuffle(parts);
            add("PARAPHRASE", k, join(parts, " "));
        }
        add("REFERENCE", 0, a.reference);
        pools.push_back(std::move(pool));
    }
    return pools;
}

std::string default_corpus() {
    const std::string built = std::string(COURSEKIT_DATA_DIR) + "/mini_corpus.jsonl";
    if (fs::exists(built)) return built;
    return "data/mini_corpus.jsonl";
}

void cmd_demo(Options o) {
    if (o.corpus.empty()) o.corpus = default_corpus();
    if (o.out.empty()) o.out = "out";
    const std::string dir = o.out;
    fs::create_directories(dir);
    Manifest m("demo");
    m.config("out", dir);
    auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

    cmd_analyze(o, m, path("analyze.json"));
    cmd_esg(o, m, path("esgs.jsonl"));
    Options with_esg = o;
    with_esg.esg = path("esgs.jsonl");
    cmd_align(with_esg, "rouge-gain", m, path("alignments_rouge_gain.jsonl"));
    cmd_align(with_esg, "bs-gain", m, path("alignments_bs_gain.jsonl"));
    cmd_align(with_esg, "entity-chain", m, path("alignments_entity_chain.jsonl"));
    cmd_oracle(o, "all", 0, m, path("oracles.jsonl"), path("oracle_report.json"));
    CorruptSettings cs;
    cs.candidates = 2;
    cmd_corrupt(o, cs, m, path("corruptions_swap_intrinsic.jsonl"));
    cs.mode = "mask";
    cmd_corrupt(o, cs, m, path("corruptions_mask.jsonl"));
    cmd_revision_tuples(with_esg, m, path("revision_tuples.jsonl"));

    auto ws = open_workspace(o, m, false);
    const auto rel = relevance_pools(*ws, o.seed, 5);
    const auto faith = faithfulness_pools(*ws, o.seed, 5);
    std::vector<json> rel_rows, faith_rows;
    for (const auto& p : rel) rel_rows.push_back(to_json(p));
    for (const auto& p : faith) faith_rows.push_back(to_json(p));
    m.write(path("pools_relevance.jsonl"), jsonl(rel_rows));
    m.write(path("pools_faithfulness.jsonl"), jsonl(faith_rows));
    run_select(rel, "demo:relevance", Task::Relevance, "all", o.seed, m, path("selections_relevance.jsonl"),
               path("select_stats_relevance.json"));
    run_select(faith, "demo:faithfulness", Task::Faithfulness, "all", o.seed, m,
               path("selections_faithfulness.jsonl"), path("select_stats_faithfulness.json"));

    Options speer_opts = with_esg;
    cmd_speer(speer_opts, "mark", "", m, path("speer_marked.jsonl"));
    cmd_speer(speer_opts, "plan", "", m, path("speer_plans.jsonl"));
    cmd_speer(speer_opts, "score", path("speer_plans.jsonl"), m, path("speer_scores.jsonl"));
    cmd_analytics(with_esg, m, path("analytics.json"));

    AnnotationService service(ws->corpus, {}, {});
    json annotation{{"admissions", service.admissions()}, {"herr", service.herr_report()}};
    m.write(path("annotation_report.json"), annotation.dump(2) + "\n");

    // Sub-steps share the manifest; keep only the run-level settings.
    m.replace_config({{"corpus", o.corpus}, {"out", dir}, {"seed", o.seed}, {"jobs", o.jobs}});
    m.save(path("manifest.json"));
    std::cout << "demo outputs written to " << dir << "\n";
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

void cmd_serve(std::string corpus_path, int port, std::string se_path, std::string labels_path,
               std::string esg_path, const std::string& host) {
    corpus_path = corpus_path.empty() ? env_or("COURSEKIT_CORPUS", "") : corpus_path;
    if (corpus_path.empty()) throw ValidationError("serve: --corpus or COURSEKIT_CORPUS is required");
    if (port < 0) port = std::stoi(env_or("COURSEKIT_PORT", "8080"));
    se_path = se_path.empty() ? env_or("COURSEKIT_SE", "") : se_path;
    labels_path = labels_path.empty() ? env_or("COURSEKIT_LABELS", "") : labels_path;
    esg_path = esg_path.empty() ? env_or("COURSEKIT_ESG", "") : esg_path;

    ServiceConfig config;
    config.labels_path = labels_path;
    if (!esg_path.empty()) config.esgs = parse_esg_file(read_file(esg_path));
    std::vector<SummaryElement> inventory;
    if (!se_path.empty()) inventory = parse_se_inventory(read_file(se_path));
    AnnotationService service(load_sorted(corpus_path), std::move(inventory), std::move(config));
    AnnotationServer server(service);
    const int bound = server.start(host, port);
    std::cerr << "annotation service listening on " << host << ":" << bound << "\n";
    server.wait();
}

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"coursekit: alignment, corruption, selection and faithfulness tooling for clinical summaries"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Options o;
    auto common = [&](CLI::App* sub, bool corpus_required = true) {
        auto* c = sub->add_option("--corpus", o.corpus, "Admission corpus (JSONL)");
        if (corpus_required) c->required();
        sub->add_option("--backend", o.backend, "Similarity backend: exact | vectors:<path>");
        sub->add_option("--esg", o.esg, "ESG sidecar (JSONL) produced by `coursekit esg`");
        sub->add_option("--predicate", o.predicate, "Synonym predicate: feature | embedding");
        sub->add_option("--seed", o.seed, "Global seed");
        sub->add_option("--jobs", o.jobs, "Worker threads for per-admission work")->check(CLI::PositiveNumber);
    };

    auto* analyze = app.add_subcommand("analyze", "Extractiveness and ROUGE report");
    common(analyze);
    analyze->add_option("--out", o.out)->required();

    auto* esg = app.add_subcommand("esg", "Build entity synonym groups and salience labels");
    common(esg);
    esg->add_option("--out", o.out)->required();

    std::string method = "rouge-gain";
    auto* align_cmd = app.add_subcommand("align", "Align reference sentences to source sentences");
    common(align_cmd);
    align_cmd->add_option("--method", method, "rouge-gain | bs-gain | rouge-topk[:k] | bs-topk[:k] | top-section | "
                                               "entity-chain | full[:budget]");
    align_cmd->add_option("--out", o.out)->required();

    std::string strategy = "gain";
    std::size_t budget = 0;
    std::string report;
    auto* oracle = app.add_subcommand("oracle", "Extractive baselines and oracles");
    common(oracle);
    oracle->add_option("--strategy", strategy, "gain|topk|sent-align|retrieval|ensemble|lexrank|random, a comma "
                                               "list, or all");
    oracle->add_option("--train", o.train, "Training corpus for retrieval (default: the corpus, leave-one-out)");
    oracle->add_option("--budget", budget, "Token budget (default: mean reference length)");
    oracle->add_option("--report", report, "Scoring report path (default: <out>.report.json)");
    oracle->add_option("--out", o.out)->required();

    CorruptSettings cs;
    auto* corrupt = app.add_subcommand("corrupt", "Entity swap and span-masking corruptions of references");
    common(corrupt);
    corrupt->add_option("--mode", cs.mode, "swap-intrinsic | swap-extrinsic | mask");
    corrupt->add_option("--s", cs.s, "Swap rate");
    corrupt->add_option("--m", cs.mm, "Mask rate");
    corrupt->add_option("--candidates", cs.candidates, "Corruptions per admission");
    corrupt->add_option("--out", o.out)->required();

    auto* tuples = app.add_subcommand("revision-tuples", "Build contrastive revision tuples");
    common(tuples);
    tuples->add_option("--out", o.out)->required();

    std::string pools_path, task = "relevance", select_strategy = "max-margin", stats_path;
    auto* select_cmd = app.add_subcommand("select", "Select calibration sets from candidate pools");
    select_cmd->add_option("--pools", pools_path, "Candidate pools (JSONL)")->required();
    select_cmd->add_option("--task", task, "relevance | faithfulness");
    select_cmd->add_option("--strategy", select_strategy, "Selection strategy, or all");
    select_cmd->add_option("--seed", o.seed, "Global seed");
    select_cmd->add_option("--stats", stats_path, "Statistics path (default: <out>.stats.json)");
    select_cmd->add_option("--out", o.out)->required();

    std::string action, in_path;
    auto* speer = app.add_subcommand("speer", "Entity marking, plan documents and adherence");
    speer->add_option("action", action, "mark | plan | parse | score")->required();
    common(speer);
    speer->add_option("--in", in_path, "Generations (JSONL with admission_id, output_text)");
    speer->add_option("--out", o.out)->required();

    auto* analytics = app.add_subcommand("analytics", "Corpus statistics for plotting");
    common(analytics);
    analytics->add_option("--out", o.out)->required();

    int port = -1;
    std::string se_path, labels_path, host = "127.0.0.1";
    auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
    serve->add_option("--corpus", o.corpus);
    serve->add_option("--port", port);
    serve->add_option("--host", host);
    serve->add_option("--se", se_path, "Summary element inventory (JSONL)");
    serve->add_option("--labels", labels_path, "Label event log (JSONL, append-only)");
    serve->add_option("--esg", o.esg);

    auto* demo = app.add_subcommand("demo", "Run every pipeline on the bundled mini corpus");
    demo->add_option("--corpus", o.corpus, "Corpus (default: bundled mini corpus)");
    demo->add_option("--out", o.out, "Output directory (default: ./out)");
    demo->add_option("--seed", o.seed);
    demo->add_option("--jobs", o.jobs)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "demo") {
            cmd_demo(o);
            return 0;
        }
        if (name == "serve") {
            cmd_serve(o.corpus, port, se_path, labels_path, o.esg, host);
            return 0;
        }
        Manifest m(name);
        if (name == "analyze") cmd_analyze(o, m, o.out);
        else if (name == "esg") cmd_esg(o, m, o.out);
        else if (name == "align") cmd_align(o, method, m, o.out);
        else if (name == "oracle") cmd_oracle(o, strategy, budget, m, o.out, report.empty() ? o.out + ".report.json" : report);
        else if (name == "corrupt") cmd_corrupt(o, cs, m, o.out);
        else if (name == "revision-tuples") cmd_revision_tuples(o, m, o.out);
        else if (name == "select") {
            m.input(pools_path);
            m.config("pools", pools_path);
            m.config("task", task);
            m.config("strategy", select_strategy);
            m.config("seed", o.seed);
            const auto pools = parse_pools(read_file(pools_path));
            run_select(pools, "pools:" + pools_path, parse_task(task), select_strategy, o.seed, m, o.out,
                       stats_path.empty() ? o.out + ".stats.json" : stats_path);
        } else if (name == "speer") cmd_speer(o, action, in_path, m, o.out);
        else if (name == "analytics") cmd_analytics(o, m, o.out);
        m.save(manifest_path(o.out));
        return 0;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: parse: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 1;
    } catch (const NotFoundError& e) {
        std::cerr << "error: not found: " << e.what() << "\n";
        return 1;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace coursekit::cli
