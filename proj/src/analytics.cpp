#include "coursekit/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "coursekit/lexical.hpp"

namespace coursekit {

std::vector<RankPoint> fragment_length_by_rank(const std::vector<TokenList>& summaries,
                                               const std::vector<TokenList>& sources) {
    if (summaries.size() != sources.size()) throw ValidationError("fragment_length_by_rank: size mismatch");
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        auto stats = extractive_fragments(summaries[i], sources[i]);
        for (std::size_t r = 0; r < stats.fragments.size(); ++r) {
            auto& slot = acc[r + 1];
            slot.first += static_cast<double>(stats.fragments[r].length);
            ++slot.second;
        }
    }
    std::vector<RankPoint> out;
    for (const auto& [rank, slot] : acc) out.push_back({rank, slot.first / static_cast<double>(slot.second), slot.second});
    return out;
}

std::vector<RankPoint> fragment_length_by_rank(const Corpus& corpus) {
    std::vector<TokenList> summaries, sources;
    for (const auto& r : corpus) {
        summaries.push_back(tokenize(r.reference));
        TokenList src;
        for (const auto& s : source_sentences(r)) src.insert(src.end(), s.sentence.tokens.begin(), s.sentence.tokens.end());
        sources.push_back(std::move(src));
    }
    return fragment_length_by_rank(summaries, sources);
}

std::string to_string(OrderingStrategy strategy) {
    switch (strategy) {
        case OrderingStrategy::Forward: return "FORWARD";
        case OrderingStrategy::Backward: return "BACKWARD";
        case OrderingStrategy::GreedyOracle: return "GREEDY_ORACLE";
    }
    return {};
}

namespace {

OrderingCurve curve_for(OrderingStrategy strategy, std::vector<std::size_t> order,
                        const std::vector<std::set<std::string>>& note_esgs, const std::set<std::string>& reference) {
    OrderingCurve c;
    c.strategy = strategy;
    c.note_order = std::move(order);
    c.empty = reference.empty();
    std::set<std::string> covered;
    for (auto n : c.note_order) {
        for (const auto& e : note_esgs[n]) {
            if (reference.contains(e)) covered.insert(e);
        }
        c.cumulative.push_back(c.empty ? 0.0
                                       : static_cast<double>(covered.size()) / static_cast<double>(reference.size()));
    }
    const std::size_t n = c.note_order.size();
    for (std::size_t d = 1; d <= 10; ++d) {
        const std::size_t read = d * n / 10;  // notes with ceil(10 i / n) <= d
        c.deciles.push_back(read == 0 ? 0.0 : c.cumulative[read - 1]);
    }
    return c;
}

}  // namespace

std::vector<OrderingCurve> ordering_curves(const std::vector<std::set<std::string>>& note_esgs,
                                           const std::set<std::string>& reference_esgs) {
    const std::size_t n = note_esgs.size();
    if (n == 0) throw ValidationError("ordering_curves: admission has no notes");
    std::vector<std::size_t> forward(n), backward(n);
    for (std::size_t i = 0; i < n; ++i) {
        forward[i] = i;
        backward[i] = n - 1 - i;
    }
    std::vector<std::size_t> greedy;
    std::vector<bool> read(n, false);
    std::set<std::string> covered;
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t best = n, best_gain = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (read[i]) continue;
            std::size_t gain = 0;
            for (const auto& e : note_esgs[i]) gain += reference_esgs.contains(e) && !covered.contains(e);
            if (best == n || gain > best_gain) {
                best = i;
                best_gain = gain;
            }
        }
        read[best] = true;
        greedy.push_back(best);
        for (const auto& e : note_esgs[best]) {
            if (reference_esgs.contains(e)) covered.insert(e);
        }
    }
    return {curve_for(OrderingStrategy::Forward, forward, note_esgs, reference_esgs),
            curve_for(OrderingStrategy::Backward, backward, note_esgs, reference_esgs),
            curve_for(OrderingStrategy::GreedyOracle, greedy, note_esgs, reference_esgs)};
}

NoteCoverage note_coverage(const AdmissionRecord& admission, const EsgIndex& index,
                           const SynonymPredicate& predicate) {
    NoteCoverage cov;
    cov.reference_esgs = aligned_esgs(mentions_in(admission, DocRef::reference()), index, predicate);
    for (const auto& note : admission.notes) {
        std::set<std::string> esgs;
        for (const auto& m : index.mentions()) {
            if (m.doc != DocRef::note(note.note_id)) continue;
            const auto* g = index.group_of(m.mention_id);
            if (g && cov.reference_esgs.contains(g->esg_id)) esgs.insert(g->esg_id);
        }
        cov.note_esgs.push_back(std::move(esgs));
    }
    return cov;
}

std::vector<OrderingCurve> ordering_curves(const AdmissionRecord& admission, const EsgIndex& index,
                                           const SynonymPredicate& predicate) {
    auto cov = note_coverage(admission, index, predicate);
    return ordering_curves(cov.note_esgs, cov.reference_esgs);
}

Histogram histogram_of(const std::vector<double>& positions, int bins) {
    if (bins < 1) throw ValidationError("histogram: bins must be >= 1");
    Histogram h;
    h.mass.assign(static_cast<std::size_t>(bins), 0.0);
    h.samples = positions.size();
    if (positions.empty()) {
        h.empty = true;
        return h;
    }
    for (double p : positions) {
        auto b = static_cast<int>(std::floor(std::clamp(p, 0.0, 1.0) * bins));
        h.mass[static_cast<std::size_t>(std::min(b, bins - 1))] += 1.0;
    }
    for (auto& m : h.mass) m /= static_cast<double>(positions.size());
    return h;
}

Histogram lead_bias_histogram(const AdmissionRecord& admission, const EsgIndex& index,
                              const SynonymPredicate& predicate, int bins) {
    auto cov = note_coverage(admission, index, predicate);
    std::map<std::string, double> note_length;
    for (const auto& n : admission.notes) note_length[n.note_id] = static_cast<double>(n.text().size());
    std::vector<double> positions;
    for (const auto& m : index.mentions()) {
        const auto* g = index.group_of(m.mention_id);
        if (!g || !cov.reference_esgs.contains(g->esg_id) || m.doc.kind != DocKind::Note) continue;
        const double len = note_length[m.doc.id];
        if (len <= 0.0) continue;
        positions.push_back((static_cast<double>(m.start) + static_cast<double>(m.end)) / 2.0 / len);
    }
    return histogram_of(positions, bins);
}

std::vector<FrequencyBucket> frequency_salience_curve(const std::vector<EsgFrequency>& groups) {
    std::vector<FrequencyBucket> buckets = {{"1", 1, 1}, {"2", 2, 2},   {"3", 3, 3},
                                            {"4", 4, 4}, {"5-9", 5, 9}, {"10+", 10, 0}};
    std::vector<std::size_t> salient(buckets.size(), 0);
    for (const auto& g : groups) {
        for (std::size_t b = 0; b < buckets.size(); ++b) {
            if (g.mentions >= buckets[b].lower && (buckets[b].upper == 0 || g.mentions <= buckets[b].upper)) {
                ++buckets[b].groups;
                salient[b] += g.salient;
                break;
            }
        }
    }
    std::vector<FrequencyBucket> out;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        if (!buckets[b].groups) continue;
        buckets[b].salient_probability = static_cast<double>(salient[b]) / static_cast<double>(buckets[b].groups);
        out.push_back(buckets[b]);
    }
    return out;
}

std::vector<PositionRate> error_rate_by_position(const std::vector<SentenceErrors>& rows) {
    std::map<int, std::pair<double, std::size_t>> acc;
    for (const auto& r : rows) {
        if (r.se_count <= 0) continue;
        if (r.error_count < 0 || r.error_count > r.se_count)
            throw ValidationError("error_rate_by_position: error count out of range");
        auto& slot = acc[r.sentence_index];
        slot.first += static_cast<double>(r.error_count) / static_cast<double>(r.se_count);
        ++slot.second;
    }
    std::vector<PositionRate> out;
    for (const auto& [pos, slot] : acc) out.push_back({pos, slot.first / static_cast<double>(slot.second), slot.second});
    return out;
}

}  // namespace coursekit
