#pragma once

#include <set>
#include <string>
#include <vector>

#include "coursekit/corpus.hpp"
#include "coursekit/entity.hpp"

namespace coursekit {

struct RankPoint {
    std::size_t rank = 0;  // 1-based order of the fragment within its summary
    double mean_length = 0.0;
    std::size_t count = 0;
};

/// Fragments of `summaries[i]` against `sources[i]`, grouped by rank.
std::vector<RankPoint> fragment_length_by_rank(const std::vector<TokenList>& summaries,
                                               const std::vector<TokenList>& sources);
/// Reference vs concatenated source sentences for every admission.
std::vector<RankPoint> fragment_length_by_rank(const Corpus& corpus);

enum class OrderingStrategy { Forward, Backward, GreedyOracle };
std::string to_string(OrderingStrategy strategy);

struct OrderingCurve {
    OrderingStrategy strategy = OrderingStrategy::Forward;
    std::vector<std::size_t> note_order;  // note ordinals in reading order
    std::vector<double> cumulative;       // coverage after reading i+1 notes
    std::vector<double> deciles;          // 10 points, decile d covers floor(d*n/10) notes
    bool empty = false;                   // no reference ESGs to cover
};

/// `note_esgs[i]` are the reference-covered ESG ids present in note i.
std::vector<OrderingCurve> ordering_curves(const std::vector<std::set<std::string>>& note_esgs,
                                           const std::set<std::string>& reference_esgs);

/// Reference ESGs and per-note coverage sets for one admission.
struct NoteCoverage {
    std::set<std::string> reference_esgs;
    std::vector<std::set<std::string>> note_esgs;
};
NoteCoverage note_coverage(const AdmissionRecord& admission, const EsgIndex& index,
                           const SynonymPredicate& predicate);

std::vector<OrderingCurve> ordering_curves(const AdmissionRecord& admission, const EsgIndex& index,
                                           const SynonymPredicate& predicate);

struct Histogram {
    std::vector<double> mass;
    std::size_t samples = 0;
    bool empty = false;
};

/// Midpoints of reference-covered source mentions, normalised by note length.
Histogram lead_bias_histogram(const AdmissionRecord& admission, const EsgIndex& index,
                              const SynonymPredicate& predicate, int bins = 10);
Histogram histogram_of(const std::vector<double>& positions, int bins = 10);

struct FrequencyBucket {
    std::string label;
    std::size_t lower = 0, upper = 0;  // inclusive mention-count range (upper 0 = open)
    std::size_t groups = 0;
    double salient_probability = 0.0;
};

struct EsgFrequency {
    std::size_t mentions = 0;
    bool salient = false;
};

/// Buckets 1, 2, 3, 4, 5-9, 10+; empty buckets are omitted.
std::vector<FrequencyBucket> frequency_salience_curve(const std::vector<EsgFrequency>& groups);

struct SentenceErrors {
    std::string summary_id;
    int sentence_index = 0;
    int se_count = 0;
    int error_count = 0;
};

struct PositionRate {
    int position = 0;
    double rate = 0.0;
    std::size_t sentences = 0;
};

/// Per sentence position, mean over summaries of the errored-SE fraction.
/// Sentences without SEs are skipped.
std::vector<PositionRate> error_rate_by_position(const std::vector<SentenceErrors>& rows);

}  // namespace coursekit
