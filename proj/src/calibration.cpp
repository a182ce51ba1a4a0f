#include "coursekit/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "coursekit/corpus.hpp"
#include "coursekit/lexical.hpp"

namespace coursekit {

using nlohmann::json;

namespace {
constexpr double kTieTolerance = 1e-12;
}

// ---------------------------------------------------------------------------
// Pools
// ---------------------------------------------------------------------------

const Candidate& CandidatePool::get(const std::string& candidate_id) const {
    for (const auto& c : candidates) {
        if (c.candidate_id == candidate_id) return c;
    }
    throw NotFoundError("pool " + example_id + ": no candidate '" + candidate_id + "'");
}

CandidatePool pool_from_json(const json& j) {
    CandidatePool pool;
    try {
        pool.example_id = j.at("example_id").get<std::string>();
        if (auto it = j.find("source"); it != j.end() && it->is_string()) pool.source = it->get<std::string>();
        std::set<std::string> ids;
        for (const auto& jc : j.at("candidates")) {
            Candidate c;
            c.candidate_id = jc.at("candidate_id").get<std::string>();
            if (!ids.insert(c.candidate_id).second)
                throw ValidationError("candidate_id: duplicate '" + c.candidate_id + "' in " + pool.example_id);
            c.text = jc.at("text").get<std::string>();
            c.tokens = tokenize(c.text);
            c.tag = jc.at("tag").get<std::string>();
            if (auto s = jc.find("scores"); s != jc.end()) c.scores = s->get<std::map<std::string, double>>();
            c.log_likelihood = jc.value("log_likelihood", 0.0);
            if (auto b = jc.find("beam_rank"); b != jc.end() && !b->is_null()) c.beam_rank = b->get<int>();
            if (auto v = jc.find("vector"); v != jc.end() && !v->is_null()) {
                auto values = v->get<std::vector<double>>();
                c.vector = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
            }
            pool.candidates.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("candidate pool: ") + e.what());
    }
    return pool;
}

json to_json(const CandidatePool& pool) {
    json cands = json::array();
    for (const auto& c : pool.candidates) {
        json jc{{"candidate_id", c.candidate_id}, {"text", c.text},     {"tag", c.tag},
                {"scores", c.scores},             {"log_likelihood", c.log_likelihood}};
        if (c.beam_rank) jc["beam_rank"] = *c.beam_rank;
        if (c.vector) jc["vector"] = std::vector<double>(c.vector->data(), c.vector->data() + c.vector->size());
        cands.push_back(std::move(jc));
    }
    json j{{"example_id", pool.example_id}, {"candidates", cands}};
    if (pool.source) j["source"] = *pool.source;
    return j;
}

std::vector<CandidatePool> parse_pools(std::string_view jsonl) {
    std::vector<CandidatePool> out;
    std::size_t pos = 0, line_no = 0;
    while (pos < jsonl.size()) {
        auto nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        auto line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        try {
            out.push_back(pool_from_json(j));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

bool is_positive_tag(const std::string& tag) { return tag == "PARAPHRASE" || tag == "REFERENCE"; }

bool is_negative_tag(const std::string& tag) { return tag.starts_with("MASK_FILL") || tag.starts_with("SWAP"); }

const std::vector<MethodCount>& method_counts() {
    static const std::vector<MethodCount> rows = {
        {"MASK_FILL_LOW", "Mask-And-Fill (Low)", "m=0.25", 10, true},
        {"MASK_FILL_HIGH", "Mask-And-Fill (High)", "m=0.75", 10, true},
        {"SWAP_INTRINSIC_LOW", "Swap Intrinsic (Low)", "s=0.5", 10, true},
        {"SWAP_INTRINSIC_HIGH", "Swap Intrinsic (High)", "s=1.0", 10, true},
        {"SWAP_EXTRINSIC_LOW", "Swap Extrinsic (Low)", "s=0.5", 10, true},
        {"SWAP_EXTRINSIC_HIGH", "Swap Extrinsic (High)", "s=1.0", 10, true},
        {"PARAPHRASE", "Paraphrase", "t=0.7", 5, true},
        {"REFERENCE", "Reference", "N/A", 1, true},
        {"DIVERSE_BEAM_PRIMERA", "Diverse Beam (PRIMERA)", "p=1", 10, false},
        {"DIVERSE_BEAM_LONGT5", "Diverse Beam (LongT5)", "p=1", 10, false},
    };
    return rows;
}

int method_total(bool faithfulness) {
    int total = 0;
    for (const auto& r : method_counts()) {
        if (r.faithfulness == faithfulness) total += r.count;
    }
    return total;
}

std::vector<std::string> method_count_mismatches(const CandidatePool& pool, bool faithfulness) {
    std::map<std::string, int> have;
    for (const auto& c : pool.candidates) ++have[c.tag];
    std::vector<std::string> bad;
    std::set<std::string> expected;
    for (const auto& r : method_counts()) {
        if (r.faithfulness != faithfulness) continue;
        expected.insert(r.tag);
        if (have[r.tag] != r.count) bad.push_back(r.tag);
    }
    for (const auto& [tag, n] : have) {
        if (n && !expected.contains(tag)) bad.push_back(tag);
    }
    return bad;
}

// ---------------------------------------------------------------------------
// Normalisation
// ---------------------------------------------------------------------------

double population_mean(const std::vector<double>& x) {
    if (x.empty()) throw ValidationError("mean of an empty population");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double population_stddev(const std::vector<double>& x) {
    const double mu = population_mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

std::vector<double> zscores(const std::vector<double>& x) {
    const double mu = population_mean(x);
    const double sigma = population_stddev(x);
    if (sigma == 0.0) throw ValidationError("z-score: population has zero standard deviation");
    std::vector<double> z;
    for (double v : x) z.push_back((v - mu) / sigma);
    return z;
}

MetricNormalizer MetricNormalizer::fit(std::string population,
                                       const std::map<std::string, std::vector<double>>& values) {
    if (population.empty()) throw ValidationError("normalizer: population name is required");
    MetricNormalizer n;
    n.population_ = std::move(population);
    for (const auto& [metric, xs] : values) {
        if (xs.empty()) {
            n.excluded_.push_back(metric);
            n.warnings_.push_back("metric '" + metric + "' has no values in population " + n.population_);
            continue;
        }
        const double sigma = population_stddev(xs);
        if (sigma == 0.0) {
            n.excluded_.push_back(metric);
            n.warnings_.push_back("metric '" + metric + "' is constant in population " + n.population_ +
                                  "; excluded");
            continue;
        }
        n.stats_[metric] = {population_mean(xs), sigma};
    }
    return n;
}

double MetricNormalizer::mean(const std::string& metric) const {
    auto it = stats_.find(metric);
    if (it == stats_.end()) throw NotFoundError("normalizer: metric '" + metric + "' not fitted");
    return it->second.first;
}

double MetricNormalizer::stddev(const std::string& metric) const {
    auto it = stats_.find(metric);
    if (it == stats_.end()) throw NotFoundError("normalizer: metric '" + metric + "' not fitted");
    return it->second.second;
}

double MetricNormalizer::z(const std::string& metric, double x) const { return (x - mean(metric)) / stddev(metric); }

std::vector<std::string> MetricNormalizer::metrics() const {
    std::vector<std::string> out;
    for (const auto& [m, s] : stats_) out.push_back(m);
    return out;
}

double MetricNormalizer::aggregate(const std::map<std::string, double>& scores,
                                   const std::vector<std::string>& metrics) const {
    std::vector<double> z;
    for (const auto& m : metrics) {
        if (!has(m)) continue;
        auto it = scores.find(m);
        if (it == scores.end()) throw ValidationError("aggregate: candidate lacks metric '" + m + "'");
        z.push_back(this->z(m, it->second));
    }
    if (z.empty()) throw ValidationError("aggregate: no usable metrics");
    return coursekit::aggregate(z);
}

double aggregate(const std::vector<double>& z, const std::vector<double>& weights) {
    if (z.empty()) throw ValidationError("aggregate: no scores");
    if (weights.empty()) return population_mean(z);
    if (weights.size() != z.size()) throw ValidationError("aggregate: weight count mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        num += weights[i] * z[i];
        den += weights[i];
    }
    if (den == 0.0) throw ValidationError("aggregate: weights sum to zero");
    return num / den;
}

std::vector<double> coverage_combined_metric(const std::vector<double>& f, const std::vector<double>& cov) {
    if (f.size() != cov.size()) throw ValidationError("coverage_combined_metric: length mismatch");
    auto zf = zscores(f), zc = zscores(cov);
    std::vector<double> g;
    for (std::size_t i = 0; i < f.size(); ++i) g.push_back(0.5 * (zf[i] + zc[i]));
    return g;
}

std::vector<double> distillation_targets(const std::vector<std::vector<double>>& metric_values) {
    if (metric_values.empty()) throw ValidationError("distillation_targets: no metrics");
    const std::size_t n = metric_values.front().size();
    std::vector<double> sum(n, 0.0);
    std::size_t used = 0;
    for (const auto& values : metric_values) {
        if (values.size() != n) throw ValidationError("distillation_targets: ragged metric table");
        if (population_stddev(values) == 0.0) continue;
        auto z = zscores(values);
        for (std::size_t i = 0; i < n; ++i) sum[i] += z[i];
        ++used;
    }
    if (!used) throw ValidationError("distillation_targets: every metric is constant");
    for (auto& s : sum) s /= static_cast<double>(used);
    return sum;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double pairwise_margin_loss(const std::vector<double>& scores, double lambda_margin) {
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t j = i + 1; j < scores.size(); ++j) {
            loss += std::max(0.0, scores[j] - scores[i] + static_cast<double>(j - i) * lambda_margin);
        }
    }
    return loss;
}

double latent_contrast_loss(const std::vector<Eigen::VectorXd>& positives,
                            const std::vector<Eigen::VectorXd>& negatives, double tau) {
    if (positives.size() < 2) throw ValidationError("latent_contrast_loss: need at least 2 positives");
    if (negatives.empty()) throw ValidationError("latent_contrast_loss: need at least 1 negative");
    if (!(tau > 0.0)) throw ValidationError("latent_contrast_loss: tau must be > 0");
    auto cosine = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        if (a.size() != b.size()) throw ValidationError("latent_contrast_loss: dimension mismatch");
        const double d = a.norm() * b.norm();
        if (d == 0.0) throw ValidationError("latent_contrast_loss: zero vector");
        return a.dot(b) / d;
    };
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < positives.size(); ++i) {
        Eigen::VectorXd neg(static_cast<Eigen::Index>(negatives.size()));
        for (std::size_t k = 0; k < negatives.size(); ++k)
            neg(static_cast<Eigen::Index>(k)) = cosine(positives[i], negatives[k]) / tau;
        // log-sum-exp over negatives
        const double m = neg.maxCoeff();
        const double lse = m + std::log((neg.array() - m).exp().sum());
        for (std::size_t j = i + 1; j < positives.size(); ++j) {
            total += cosine(positives[i], positives[j]) / tau - lse;
            ++pairs;
        }
    }
    return -total / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

Task parse_task(const std::string& text) {
    if (text == "relevance") return Task::Relevance;
    if (text == "faithfulness") return Task::Faithfulness;
    throw ValidationError("--task: expected relevance or faithfulness, got '" + text + "'");
}

std::string to_string(Task task) { return task == Task::Relevance ? "relevance" : "faithfulness"; }

namespace {

const std::vector<std::pair<Strategy, std::string>>& strategy_names() {
    static const std::vector<std::pair<Strategy, std::string>> names = {
        {Strategy::Random, "random"},
        {Strategy::QualityHigh, "quality-high"},
        {Strategy::QualityMin, "quality-min"},
        {Strategy::QualityExtreme, "quality-extreme"},
        {Strategy::QualityAverage, "quality-average"},
        {Strategy::MaxMargin, "max-margin"},
        {Strategy::MinMargin, "min-margin"},
        {Strategy::MaxDiversity, "max-diversity"},
        {Strategy::MinDiversity, "min-diversity"},
        {Strategy::TopBeams, "top-beams"},
        {Strategy::BottomBeams, "bottom-beams"},
        {Strategy::ExtremeBeams, "extreme-beams"},
        {Strategy::Easy, "easy"},
        {Strategy::Hard, "hard"},
        {Strategy::Short, "short"},
        {Strategy::Long, "long"},
        {Strategy::MaxExtractiveGap, "max-extractive-gap"},
    };
    return names;
}

}  // namespace

Strategy parse_strategy(const std::string& text) {
    for (const auto& [s, name] : strategy_names()) {
        if (name == text) return s;
    }
    throw ValidationError("--strategy: unknown selection strategy '" + text + "'");
}

std::string to_string(Strategy strategy) {
    for (const auto& [s, name] : strategy_names()) {
        if (s == strategy) return name;
    }
    return {};
}

const std::vector<Strategy>& strategies_for(Task task) {
    static const std::vector<Strategy> relevance = {
        Strategy::Random,       Strategy::QualityHigh,  Strategy::QualityMin,   Strategy::QualityExtreme,
        Strategy::QualityAverage, Strategy::MaxMargin,  Strategy::MinMargin,    Strategy::MaxDiversity,
        Strategy::MinDiversity, Strategy::TopBeams,     Strategy::BottomBeams,  Strategy::ExtremeBeams,
        Strategy::Short,        Strategy::Long};
    static const std::vector<Strategy> faithfulness = {
        Strategy::Random,      Strategy::QualityHigh, Strategy::QualityMin,   Strategy::QualityExtreme,
        Strategy::QualityAverage, Strategy::MaxMargin, Strategy::MinMargin,   Strategy::MaxDiversity,
        Strategy::MinDiversity, Strategy::Easy,       Strategy::Hard,         Strategy::MaxExtractiveGap};
    return task == Task::Relevance ? relevance : faithfulness;
}

double rank_margin(std::vector<double> scores) {
    if (scores.size() < 2) return 0.0;
    std::sort(scores.begin(), scores.end(), std::greater<>());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < scores.size(); ++i) sum += scores[i] - scores[i + 1];
    return sum / static_cast<double>(scores.size() - 1);
}

double contrast_margin(const std::vector<double>& positives, const std::vector<double>& negatives) {
    return population_mean(positives) - population_mean(negatives);
}

namespace {

// Selection helper over candidate indices. Every ordering breaks ties by
// candidate id so results do not depend on pool order.
struct Selector {
    const CandidatePool& pool;
    const std::vector<double>& quality;
    const SelectOptions& options;
    std::vector<std::string> warnings;

    const std::string& id(std::size_t i) const { return pool.candidates[i].candidate_id; }

    // Indices sorted by key descending (or ascending), ties by id.
    std::vector<std::size_t> sorted(std::vector<std::size_t> items, const std::function<double(std::size_t)>& key,
                                    bool descending) const {
        std::stable_sort(items.begin(), items.end(), [&](std::size_t a, std::size_t b) {
            const double ka = key(a), kb = key(b);
            if (std::abs(ka - kb) > kTieTolerance) return descending ? ka > kb : ka < kb;
            return id(a) < id(b);
        });
        return items;
    }

    std::vector<std::size_t> take(std::vector<std::size_t> items, const std::function<double(std::size_t)>& key,
                                  bool descending, std::size_t n) const {
        auto s = sorted(std::move(items), key, descending);
        s.resize(std::min(n, s.size()));
        return s;
    }

    // Top half from the high end, remainder from the low end.
    std::vector<std::size_t> extremes(const std::vector<std::size_t>& items,
                                      const std::function<double(std::size_t)>& key, std::size_t n) const {
        auto s = sorted(items, key, true);
        const std::size_t top = (n + 1) / 2, bottom = n - top;
        std::vector<std::size_t> out(s.begin(), s.begin() + static_cast<long>(top));
        std::vector<std::size_t> low = sorted(items, key, false);
        for (std::size_t i = 0, added = 0; added < bottom && i < low.size(); ++i) {
            if (std::find(out.begin(), out.end(), low[i]) == out.end()) {
                out.push_back(low[i]);
                ++added;
            }
        }
        return out;
    }

    std::vector<std::size_t> closest_to_mean(const std::vector<std::size_t>& items, std::size_t n) const {
        double mu = 0.0;
        for (auto i : pool_all()) mu += quality[i];
        mu /= static_cast<double>(pool.candidates.size());
        return take(items, [&](std::size_t i) { return std::abs(quality[i] - mu); }, false, n);
    }

    std::vector<std::size_t> pool_all() const {
        std::vector<std::size_t> all(pool.candidates.size());
        std::iota(all.begin(), all.end(), 0);
        return all;
    }

    std::vector<std::size_t> random(std::vector<std::size_t> items, std::size_t n, std::string_view salt) const {
        Rng rng(derive_seed(options.seed, pool.example_id + "/" + std::string(salt)));
        items = sorted(std::move(items), [](std::size_t) { return 0.0; }, true);  // id order first
        rng.shuffle(items);
        items.resize(n);
        return items;
    }

    // Exhaustive search over n-subsets of `items` (id order); first best wins.
    std::vector<std::size_t> enumerate(std::vector<std::size_t> items, std::size_t n,
                                       const std::function<double(const std::vector<std::size_t>&)>& objective,
                                       bool maximize) const {
        items = sorted(std::move(items), [](std::size_t) { return 0.0; }, true);
        std::vector<std::size_t> idx(n), best;
        std::iota(idx.begin(), idx.end(), 0);
        double best_value = 0.0;
        std::vector<std::size_t> subset(n);
        while (true) {
            for (std::size_t k = 0; k < n; ++k) subset[k] = items[idx[k]];
            const double v = objective(subset);
            if (best.empty() || (maximize ? v > best_value + kTieTolerance : v < best_value - kTieTolerance)) {
                best_value = v;
                best = subset;
            }
            std::size_t k = n;
            while (k > 0 && idx[k - 1] == items.size() - n + k - 1) --k;
            if (k == 0) break;
            ++idx[k - 1];
            for (std::size_t m = k; m < n; ++m) idx[m] = idx[m - 1] + 1;
        }
        return best;
    }

    void require(std::size_t have, std::size_t need, const std::string& what) const {
        if (have < need)
            throw ValidationError("pool " + pool.example_id + ": need " + std::to_string(need) + " " + what +
                                  ", have " + std::to_string(have) + " (short by " + std::to_string(need - have) +
                                  ")");
    }
};

// Symmetric pairwise BLEU matrix entries used by the diversity strategies.
struct BleuTable {
    Eigen::MatrixXd bleu;
    explicit BleuTable(const CandidatePool& pool) {
        const auto n = static_cast<Eigen::Index>(pool.candidates.size());
        bleu = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i != j)
                    bleu(i, j) = coursekit::bleu(pool.candidates[static_cast<std::size_t>(i)].tokens,
                                                 pool.candidates[static_cast<std::size_t>(j)].tokens);
            }
        }
    }
    double self_bleu(const std::vector<std::size_t>& subset) const {
        double s = 0.0;
        for (auto i : subset) {
            for (auto j : subset) {
                if (i != j) s += bleu(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
        return s / static_cast<double>(subset.size() * (subset.size() - 1));
    }
};

}  // namespace

ContrastSelection select(const CandidatePool& pool, Strategy strategy, Task task, const std::vector<double>& quality,
                         const SelectOptions& options) {
    if (quality.size() != pool.candidates.size())
        throw ValidationError("select: quality vector does not match pool size");
    const auto& allowed = strategies_for(task);
    if (std::find(allowed.begin(), allowed.end(), strategy) == allowed.end())
        throw ValidationError("strategy '" + to_string(strategy) + "' does not apply to " + to_string(task));

    Selector sel{pool, quality, options, {}};
    ContrastSelection out;
    out.strategy = strategy;
    out.task = task;
    auto q = [&](std::size_t i) { return quality[i]; };
    auto ids = [&](const std::vector<std::size_t>& items) {
        std::vector<std::string> v;
        for (auto i : items) v.push_back(sel.id(i));
        return v;
    };

    if (task == Task::Relevance) {
        const std::size_t n = options.sizes.rank;
        auto all = sel.pool_all();
        sel.require(all.size(), n, "candidates");
        std::vector<std::size_t> chosen;
        switch (strategy) {
            case Strategy::Random: chosen = sel.random(all, n, "random"); break;
            case Strategy::QualityHigh: chosen = sel.take(all, q, true, n); break;
            case Strategy::QualityMin: chosen = sel.take(all, q, false, n); break;
            case Strategy::QualityExtreme: chosen = sel.extremes(all, q, n); break;
            case Strategy::QualityAverage: chosen = sel.closest_to_mean(all, n); break;
            case Strategy::MaxMargin:
            case Strategy::MinMargin: {
                const bool maximize = strategy == Strategy::MaxMargin;
                auto objective = [&](const std::vector<std::size_t>& s) {
                    std::vector<double> v;
                    for (auto i : s) v.push_back(quality[i]);
                    return rank_margin(v);
                };
                if (all.size() <= options.enumeration_limit) {
                    chosen = sel.enumerate(all, n, objective, maximize);
                } else {
                    sel.warnings.push_back("pool of " + std::to_string(all.size()) +
                                           " exceeds the enumeration limit; using the sorted-window heuristic");
                    auto by_q = sel.sorted(all, q, true);
                    if (maximize) {
                        chosen = sel.extremes(all, q, n);
                    } else {
                        std::size_t best = 0;
                        double best_range = 0.0;
                        for (std::size_t s = 0; s + n <= by_q.size(); ++s) {
                            const double range = quality[by_q[s]] - quality[by_q[s + n - 1]];
                            if (s == 0 || range < best_range - kTieTolerance) {
                                best_range = range;
                                best = s;
                            }
                        }
                        chosen.assign(by_q.begin() + static_cast<long>(best), by_q.begin() + static_cast<long>(best + n));
                    }
                }
                break;
            }
            case Strategy::MaxDiversity:
            case Strategy::MinDiversity: {
                BleuTable table(pool);
                const bool maximize = strategy == Strategy::MaxDiversity;
                auto objective = [&](const std::vector<std::size_t>& s) { return 1.0 - table.self_bleu(s); };
                if (all.size() <= options.enumeration_limit) {
                    chosen = sel.enumerate(all, n, objective, maximize);
                } else {
                    sel.warnings.push_back("pool of " + std::to_string(all.size()) +
                                           " exceeds the enumeration limit; using greedy diversity selection");
                    auto pair = sel.enumerate(all, 2, objective, maximize);
                    chosen = pair;
                    while (chosen.size() < n) {
                        std::size_t best = all.size();
                        double best_v = 0.0;
                        for (auto i : sel.sorted(all, [](std::size_t) { return 0.0; }, true)) {
                            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
                            auto trial = chosen;
                            trial.push_back(i);
                            const double v = objective(trial);
                            if (best == all.size() || (maximize ? v > best_v + kTieTolerance : v < best_v - kTieTolerance)) {
                                best = i;
                                best_v = v;
                            }
                        }
                        chosen.push_back(best);
                    }
                }
                break;
            }
            case Strategy::TopBeams:
            case Strategy::BottomBeams:
            case Strategy::ExtremeBeams: {
                std::vector<std::size_t> ranked;
                for (auto i : all) {
                    if (pool.candidates[i].beam_rank) ranked.push_back(i);
                }
                sel.require(ranked.size(), n, "beam-ranked candidates");
                auto beam = [&](std::size_t i) { return -static_cast<double>(*pool.candidates[i].beam_rank); };
                if (strategy == Strategy::TopBeams) chosen = sel.take(ranked, beam, true, n);
                else if (strategy == Strategy::BottomBeams) chosen = sel.take(ranked, beam, false, n);
                else chosen = sel.extremes(ranked, beam, n);
                break;
            }
            case Strategy::Short:
            case Strategy::Long: {
                auto len = [&](std::size_t i) { return static_cast<double>(pool.candidates[i].tokens.size()); };
                chosen = sel.take(all, len, strategy == Strategy::Long, n);
                break;
            }
            default: throw ValidationError("strategy '" + to_string(strategy) + "' does not apply to relevance");
        }
        out.ranked = ids(sel.sorted(chosen, q, true));
    } else {
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
            if (is_positive_tag(pool.candidates[i].tag)) pos.push_back(i);
            else if (is_negative_tag(pool.candidates[i].tag)) neg.push_back(i);
        }
        const std::size_t np = options.sizes.positives, nn = options.sizes.negatives;
        sel.require(pos.size(), np, "positives");
        sel.require(neg.size(), nn, "negatives");
        std::vector<std::size_t> p, n;
        auto ll = [&](std::size_t i) { return pool.candidates[i].log_likelihood; };
        switch (strategy) {
            case Strategy::Random:
                p = sel.random(pos, np, "positives");
                n = sel.random(neg, nn, "negatives");
                break;
            case Strategy::QualityHigh:
                p = sel.take(pos, q, true, np);
                n = sel.take(neg, q, true, nn);
                break;
            case Strategy::QualityMin:
                p = sel.take(pos, q, false, np);
                n = sel.take(neg, q, false, nn);
                break;
            case Strategy::QualityExtreme:
                p = sel.extremes(pos, q, np);
                n = sel.extremes(neg, q, nn);
                break;
            case Strategy::QualityAverage:
                p = sel.closest_to_mean(pos, np);
                n = sel.closest_to_mean(neg, nn);
                break;
            case Strategy::MaxMargin:
            case Strategy::MinMargin: {
                // Margin = mean(pos) - mean(neg) separates, so each side is optimised independently.
                const bool maximize = strategy == Strategy::MaxMargin;
                auto mean_q = [&](const std::vector<std::size_t>& s) {
                    double t = 0.0;
                    for (auto i : s) t += quality[i];
                    return t / static_cast<double>(s.size());
                };
                p = sel.enumerate(pos, np, mean_q, maximize);
                n = sel.enumerate(neg, nn, mean_q, !maximize);
                break;
            }
            case Strategy::MaxDiversity:
            case Strategy::MinDiversity: {
                BleuTable table(pool);
                const bool maximize = strategy == Strategy::MaxDiversity;
                auto objective = [&](const std::vector<std::size_t>& s) {
                    return s.size() < 2 ? 0.0 : 1.0 - table.self_bleu(s);
                };
                p = sel.enumerate(pos, np, objective, maximize);
                n = sel.enumerate(neg, nn, objective, maximize);
                break;
            }
            case Strategy::Easy:
                p = sel.take(pos, ll, true, np);
                n = sel.take(neg, ll, false, nn);
                break;
            case Strategy::Hard:
                p = sel.take(pos, ll, false, np);
                n = sel.take(neg, ll, true, nn);
                break;
            case Strategy::MaxExtractiveGap: {
                auto density = candidate_densities(pool);
                if (!density) throw ValidationError("pool " + pool.example_id + ": no source text or density scores");
                auto d = [&](std::size_t i) { return (*density)[i]; };
                p = sel.take(pos, d, true, np);
                n = sel.take(neg, d, false, nn);
                break;
            }
            default: throw ValidationError("strategy '" + to_string(strategy) + "' does not apply to faithfulness");
        }
        out.positives = ids(sel.sorted(p, q, true));
        out.negatives = ids(sel.sorted(n, q, true));
    }
    out.warnings = std::move(sel.warnings);
    return out;
}

std::optional<std::vector<double>> candidate_densities(const CandidatePool& pool) {
    std::vector<double> out;
    const TokenList source = pool.source ? tokenize(*pool.source) : TokenList{};
    for (const auto& c : pool.candidates) {
        if (pool.source) {
            out.push_back(extractive_fragments(c.tokens, source).density);
        } else if (auto it = c.scores.find("density"); it != c.scores.end()) {
            out.push_back(it->second);
        } else {
            return std::nullopt;
        }
    }
    return out;
}

namespace {

std::size_t index_of(const CandidatePool& pool, const std::string& id) {
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        if (pool.candidates[i].candidate_id == id) return i;
    }
    throw NotFoundError("pool " + pool.example_id + ": no candidate '" + id + "'");
}

SetStatistics stats_for(const CandidatePool& pool, const std::vector<std::size_t>& members,
                        const std::vector<double>& quality) {
    if (members.empty()) throw ValidationError("set_statistics: empty selection");
    SetStatistics s;
    s.size = members.size();
    std::vector<double> q;
    std::vector<TokenList> toks;
    double ll = 0.0, len = 0.0;
    for (auto i : members) {
        q.push_back(quality[i]);
        toks.push_back(pool.candidates[i].tokens);
        ll += pool.candidates[i].log_likelihood;
        len += static_cast<double>(pool.candidates[i].tokens.size());
    }
    s.mean_quality = population_mean(q);
    s.margin = rank_margin(q);
    s.diversity = toks.size() >= 2 ? 1.0 - self_bleu(toks) : 0.0;
    s.mean_log_likelihood = ll / static_cast<double>(members.size());
    s.mean_length = len / static_cast<double>(members.size());
    return s;
}

}  // namespace

SetStatistics set_statistics(const CandidatePool& pool, const ContrastSelection& selection,
                             const std::vector<double>& quality) {
    if (quality.size() != pool.candidates.size())
        throw ValidationError("set_statistics: quality vector does not match pool size");
    if (selection.task == Task::Relevance) {
        std::vector<std::size_t> members;
        for (const auto& id : selection.ranked) members.push_back(index_of(pool, id));
        return stats_for(pool, members, quality);
    }
    std::vector<std::size_t> pos, neg, members;
    for (const auto& id : selection.positives) pos.push_back(index_of(pool, id));
    for (const auto& id : selection.negatives) neg.push_back(index_of(pool, id));
    members = pos;
    members.insert(members.end(), neg.begin(), neg.end());
    SetStatistics s = stats_for(pool, members, quality);
    if (pos.empty() || neg.empty()) return s;
    auto mean_of = [&](const std::vector<std::size_t>& idx, const std::function<double(std::size_t)>& f) {
        double t = 0.0;
        for (auto i : idx) t += f(i);
        return t / static_cast<double>(idx.size());
    };
    auto q = [&](std::size_t i) { return quality[i]; };
    s.margin = mean_of(pos, q) - mean_of(neg, q);
    auto ll = [&](std::size_t i) { return pool.candidates[i].log_likelihood; };
    s.likelihood_gap = mean_of(pos, ll) - mean_of(neg, ll);
    // Diversity is measured within each side and averaged.
    auto side_div = [&](const std::vector<std::size_t>& idx) {
        if (idx.size() < 2) return 0.0;
        std::vector<TokenList> t;
        for (auto i : idx) t.push_back(pool.candidates[i].tokens);
        return 1.0 - self_bleu(t);
    };
    s.diversity = 0.5 * (side_div(pos) + side_div(neg));
    if (auto density = candidate_densities(pool)) {
        auto d = [&](std::size_t i) { return (*density)[i]; };
        s.extractive_gap = mean_of(pos, d) - mean_of(neg, d);
    }
    return s;
}

SetStatistics pool_statistics(const CandidatePool& pool, const std::vector<double>& quality) {
    std::vector<std::size_t> all(pool.candidates.size());
    std::iota(all.begin(), all.end(), 0);
    return stats_for(pool, all, quality);
}

json to_json(const ContrastSelection& s) {
    json j{{"strategy", to_string(s.strategy)}, {"task", to_string(s.task)}};
    if (s.task == Task::Relevance) j["ranked"] = s.ranked;
    else j["positives"] = s.positives, j["negatives"] = s.negatives;
    if (!s.warnings.empty()) j["warnings"] = s.warnings;
    return j;
}

json to_json(const SetStatistics& s) {
    json j{{"size", s.size},
           {"mean_quality", s.mean_quality},
           {"margin", s.margin},
           {"diversity", s.diversity},
           {"mean_log_likelihood", s.mean_log_likelihood},
           {"mean_length", s.mean_length}};
    if (s.likelihood_gap) j["likelihood_gap"] = *s.likelihood_gap;
    if (s.extractive_gap) j["extractive_gap"] = *s.extractive_gap;
    return j;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
    if (x.size() < 2) throw ValidationError("pearson: need at least 2 points");
    const double mx = population_mean(x), my = population_mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("spearman: length mismatch");
    return pearson(average_ranks(x), average_ranks(y));
}

std::optional<double> herr(std::size_t se_count, std::size_t errored) {
    if (se_count == 0) return std::nullopt;
    if (errored > se_count) throw ValidationError("herr: more errored SEs than SEs");
    return static_cast<double>(errored) / static_cast<double>(se_count);
}

}  // namespace coursekit
