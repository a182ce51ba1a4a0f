#include "coursekit/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "coursekit/lexical.hpp"

namespace coursekit {

using nlohmann::json;

OracleStrategy parse_oracle_strategy(const std::string& text) {
    if (text == "random") return OracleStrategy::Random;
    if (text == "lexrank") return OracleStrategy::LexRank;
    if (text == "topk") return OracleStrategy::TopK;
    if (text == "gain") return OracleStrategy::Gain;
    if (text == "sent-align") return OracleStrategy::SentAlign;
    if (text == "retrieval") return OracleStrategy::Retrieval;
    if (text == "ensemble") return OracleStrategy::Ensemble;
    throw ValidationError("--strategy: unknown oracle strategy '" + text + "'");
}

std::string to_string(OracleStrategy strategy) {
    switch (strategy) {
        case OracleStrategy::Random: return "random";
        case OracleStrategy::LexRank: return "lexrank";
        case OracleStrategy::TopK: return "topk";
        case OracleStrategy::Gain: return "gain";
        case OracleStrategy::SentAlign: return "sent-align";
        case OracleStrategy::Retrieval: return "retrieval";
        case OracleStrategy::Ensemble: return "ensemble";
    }
    return {};
}

TokenList ExtractiveSummary::tokens() const {
    TokenList out;
    for (const auto& s : selected) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
    return out;
}

std::size_t ExtractiveSummary::token_count() const {
    std::size_t n = 0;
    for (const auto& s : selected) n += s.tokens.size();
    return n;
}

namespace {

ExtractedSentence from_source(const SourceSentence& s) {
    return {false, s.sentence.doc.id, s.sentence.index, s.position, s.sentence.text, s.sentence.tokens};
}

ExtractedSentence from_train(const Bm25Index::Document& d) {
    return {true, d.owner, d.index, 0, d.text, d.tokens};
}

// Positions of `scores` sorted descending, ties by ascending position.
std::vector<std::size_t> rank_by(const std::vector<SourceSentence>& source, const std::vector<double>& scores) {
    std::vector<std::size_t> order(source.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (scores[x] != scores[y]) return scores[x] > scores[y];
        return source[x].position < source[y].position;
    });
    return order;
}

// Takes sentences in the given order, skipping exact duplicates, until the
// next one would exceed the budget.
void fill_budget(ExtractiveSummary& out, const std::vector<SourceSentence>& source,
                 const std::vector<std::size_t>& order, const std::vector<double>* scores) {
    std::set<TokenList> seen;
    std::size_t used = 0;
    for (auto i : order) {
        const auto& toks = source[i].sentence.tokens;
        if (seen.contains(toks)) continue;
        if (used + toks.size() > out.budget) break;
        used += toks.size();
        seen.insert(toks);
        out.selected.push_back(from_source(source[i]));
        out.step_scores.push_back(scores ? (*scores)[i] : 0.0);
    }
}

// Appends unless an identical token sequence is already selected.
bool push_unique(ExtractiveSummary& out, ExtractedSentence s, double score) {
    for (const auto& existing : out.selected) {
        if (existing.tokens == s.tokens) return false;
    }
    out.selected.push_back(std::move(s));
    out.step_scores.push_back(score);
    return true;
}

std::size_t best_source(const std::vector<SourceSentence>& source, const TokenList& target, double& score) {
    std::size_t best = 0;
    score = -1.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const double s = r12(source[i].sentence.tokens, target);
        if (s > score || (s == score && source[i].position < source[best].position)) {
            score = s;
            best = i;
        }
    }
    return best;
}

}  // namespace

ExtractiveSummary oracle_top_k(const std::vector<SourceSentence>& source, const TokenList& reference,
                               std::size_t budget) {
    ExtractiveSummary out;
    out.strategy = OracleStrategy::TopK;
    out.budget = budget;
    std::vector<double> scores;
    for (const auto& s : source) scores.push_back(r12(s.sentence.tokens, reference));
    fill_budget(out, source, rank_by(source, scores), &scores);
    return out;
}

ExtractiveSummary oracle_gain(const std::vector<SourceSentence>& source, const std::vector<TokenList>& reference) {
    ExtractiveSummary out;
    out.strategy = OracleStrategy::Gain;
    NgramBag target(2);
    for (const auto& r : reference) target.add(r);
    NgramBag chosen(2);
    std::vector<bool> used(source.size(), false);
    std::set<TokenList> seen;
    double current = 0.0;
    while (true) {
        std::size_t best = source.size();
        double best_gain = 0.0;
        for (std::size_t i = 0; i < source.size(); ++i) {
            if (used[i] || seen.contains(source[i].sentence.tokens)) continue;
            NgramBag trial = chosen;
            trial.add(source[i].sentence.tokens);
            const double gain = r12(trial, target) - current;
            if (best == source.size() || gain > best_gain ||
                (gain == best_gain && source[i].position < source[best].position)) {
                best_gain = gain;
                best = i;
            }
        }
        if (best == source.size() || best_gain <= 0.0) break;
        used[best] = true;
        seen.insert(source[best].sentence.tokens);
        chosen.add(source[best].sentence.tokens);
        current = r12(chosen, target);
        out.selected.push_back(from_source(source[best]));
        out.step_scores.push_back(current);
    }
    return out;
}

ExtractiveSummary oracle_sent_align(const std::vector<SourceSentence>& source,
                                    const std::vector<Sentence>& reference) {
    ExtractiveSummary out;
    out.strategy = OracleStrategy::SentAlign;
    if (source.empty()) return out;
    for (const auto& r : reference) {
        double score = 0.0;
        auto best = best_source(source, r.tokens, score);
        push_unique(out, from_source(source[best]), score);
    }
    return out;
}

// ---------------------------------------------------------------------------
// BM25
// ---------------------------------------------------------------------------

Bm25Index::Bm25Index(std::vector<Document> documents, double k1, double b)
    : docs_(std::move(documents)), k1_(k1), b_(b) {
    std::size_t total = 0;
    for (const auto& d : docs_) {
        std::map<std::string, std::size_t> tf;
        for (const auto& t : d.tokens) ++tf[t];
        for (const auto& [t, c] : tf) ++df_[t];
        tf_.push_back(std::move(tf));
        total += d.tokens.size();
    }
    avgdl_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());
    key_order_.resize(docs_.size());
    std::iota(key_order_.begin(), key_order_.end(), 0);
    std::sort(key_order_.begin(), key_order_.end(),
              [&](std::size_t x, std::size_t y) { return docs_[x].key < docs_[y].key; });
}

double Bm25Index::idf(const std::string& token) const {
    auto it = df_.find(token);
    const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    const double n = static_cast<double>(docs_.size());
    return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
}

double Bm25Index::score(const TokenList& query, std::size_t doc) const {
    const auto& tf = tf_.at(doc);
    const double dl = static_cast<double>(docs_[doc].tokens.size());
    const double norm = avgdl_ > 0.0 ? k1_ * (1.0 - b_ + b_ * dl / avgdl_) : k1_;
    double s = 0.0;
    for (const auto& q : query) {
        auto it = tf.find(q);
        if (it == tf.end()) continue;
        const double f = static_cast<double>(it->second);
        s += idf(q) * f * (k1_ + 1.0) / (f + norm);
    }
    return s;
}

std::size_t Bm25Index::best(const TokenList& query) const {
    if (docs_.empty()) throw ValidationError("bm25: empty index");
    std::size_t best = key_order_.front();
    double best_score = score(query, best);
    for (auto i : key_order_) {
        const double s = score(query, i);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return best;
}

Bm25Index reference_index(const Corpus& train, const std::string& exclude) {
    std::vector<Bm25Index::Document> docs;
    for (const auto& r : train) {
        if (r.admission_id == exclude) continue;
        for (const auto& s : reference_sentences(r)) {
            char key[32];
            std::snprintf(key, sizeof(key), "#%06d", s.index);
            docs.push_back({r.admission_id + key, s.tokens, s.text, r.admission_id, s.index});
        }
    }
    return Bm25Index(std::move(docs));
}

ExtractiveSummary oracle_retrieval(const std::vector<Sentence>& reference, const Bm25Index& index) {
    ExtractiveSummary out;
    out.strategy = OracleStrategy::Retrieval;
    if (index.documents().empty()) return out;
    for (const auto& r : reference) {
        auto best = index.best(r.tokens);
        push_unique(out, from_train(index.documents()[best]), index.score(r.tokens, best));
    }
    return out;
}

ExtractiveSummary oracle_sa_plus_retrieval(const std::vector<SourceSentence>& source,
                                           const std::vector<Sentence>& reference, const Bm25Index& index) {
    ExtractiveSummary out;
    out.strategy = OracleStrategy::Ensemble;
    std::size_t retrieved = 0, decided = 0;
    for (const auto& r : reference) {
        std::optional<ExtractedSentence> pick;
        double pick_score = -1.0;
        if (!source.empty()) {
            double s = 0.0;
            auto best = best_source(source, r.tokens, s);
            pick = from_source(source[best]);
            pick_score = s;
        }
        bool from_retrieval = false;
        if (!index.documents().empty()) {
            const auto& doc = index.documents()[index.best(r.tokens)];
            const double s = r12(doc.tokens, r.tokens);
            if (!pick || s > pick_score) {
                pick = from_train(doc);
                pick_score = s;
                from_retrieval = true;
            }
        }
        if (!pick) continue;
        ++decided;
        retrieved += from_retrieval;
        push_unique(out, std::move(*pick), pick_score);
    }
    out.retrieval_share = decided ? static_cast<double>(retrieved) / static_cast<double>(decided) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// LexRank / random
// ---------------------------------------------------------------------------

Eigen::MatrixXd lexrank_transition(const std::vector<TokenList>& sentences, double threshold) {
    const auto n = static_cast<Eigen::Index>(sentences.size());
    std::map<std::string, double> df;
    for (const auto& s : sentences) {
        for (const auto& t : std::set<std::string>(s.begin(), s.end())) df[t] += 1.0;
    }
    std::map<std::string, Eigen::Index> vocab;
    for (const auto& [t, c] : df) vocab.emplace(t, static_cast<Eigen::Index>(vocab.size()));
    Eigen::MatrixXd tfidf = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(vocab.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (const auto& t : sentences[static_cast<std::size_t>(i)]) tfidf(i, vocab[t]) += 1.0;
    }
    for (const auto& [t, c] : df) {
        tfidf.col(vocab[t]) *= std::log((1.0 + static_cast<double>(n)) / (1.0 + c)) + 1.0;
    }
    Eigen::VectorXd norms = tfidf.rowwise().norm();
    Eigen::MatrixXd sim = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (norms(i) == 0.0 || norms(j) == 0.0) continue;
            const double c = tfidf.row(i).dot(tfidf.row(j)) / (norms(i) * norms(j));
            if (c >= threshold) sim(i, j) = c;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double total = sim.row(i).sum();
        if (total > 0.0) sim.row(i) /= total;
        else sim.row(i).setConstant(1.0 / static_cast<double>(n));
    }
    return sim;
}

Eigen::VectorXd lexrank_scores(const std::vector<TokenList>& sentences, double damping, double threshold,
                               double tol, int max_iter) {
    const auto n = static_cast<Eigen::Index>(sentences.size());
    if (n == 0) return {};
    const Eigen::MatrixXd transition = lexrank_transition(sentences, threshold);
    const Eigen::MatrixXd pt = transition.transpose();
    Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    const double teleport = (1.0 - damping) / static_cast<double>(n);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd next = (damping * (pt * p)).array() + teleport;
        next /= next.sum();
        const double delta = (next - p).lpNorm<1>();
        p = std::move(next);
        if (delta < tol) break;
    }
    return p;
}

ExtractiveSummary lexrank(const std::vector<SourceSentence>& source, std::size_t budget, double damping,
                          double threshold) {
    ExtractiveSummary out;
    out.strategy = OracleStrategy::LexRank;
    out.budget = budget;
    if (source.empty()) return out;
    std::vector<TokenList> sentences;
    for (const auto& s : source) sentences.push_back(s.sentence.tokens);
    Eigen::VectorXd p = lexrank_scores(sentences, damping, threshold);
    std::vector<double> scores(p.data(), p.data() + p.size());
    fill_budget(out, source, rank_by(source, scores), &scores);
    return out;
}

ExtractiveSummary random_baseline(const std::vector<SourceSentence>& source, std::size_t budget,
                                  std::uint64_t seed) {
    ExtractiveSummary out;
    out.strategy = OracleStrategy::Random;
    out.budget = budget;
    std::vector<std::size_t> order(source.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    fill_budget(out, source, order, nullptr);
    return out;
}

std::size_t mean_reference_length(const Corpus& corpus) {
    if (corpus.empty()) return 0;
    double total = 0.0;
    for (const auto& r : corpus) total += static_cast<double>(tokenize(r.reference).size());
    return static_cast<std::size_t>(std::llround(total / static_cast<double>(corpus.size())));
}

json to_json(const ExtractiveSummary& summary) {
    json selected = json::array();
    for (std::size_t i = 0; i < summary.selected.size(); ++i) {
        const auto& s = summary.selected[i];
        json j{{"origin", s.from_train ? "TRAIN_REFERENCE" : "SOURCE"},
               {"doc_id", s.doc_id},
               {"index", s.index},
               {"text", s.text},
               {"score", summary.step_scores.at(i)}};
        selected.push_back(std::move(j));
    }
    json j{{"strategy", to_string(summary.strategy)}, {"selected", selected}};
    if (summary.budget) j["budget"] = summary.budget;
    if (summary.strategy == OracleStrategy::Ensemble) j["retrieval_share"] = summary.retrieval_share;
    return j;
}

}  // namespace coursekit
