#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coursekit/common.hpp"
#include "json.hpp"

namespace coursekit {

// ---------------------------------------------------------------------------
// Candidates and pools
// ---------------------------------------------------------------------------

struct Candidate {
    std::string candidate_id;
    std::string text;
    TokenList tokens;
    std::string tag;  // e.g. DIVERSE_BEAM_PRIMERA, MASK_FILL_LOW, SWAP_INTRINSIC_HIGH, PARAPHRASE, REFERENCE
    std::map<std::string, double> scores;
    double log_likelihood = 0.0;  // length-normalised, ingested
    std::optional<int> beam_rank;
    std::optional<Eigen::VectorXd> vector;
};

struct CandidatePool {
    std::string example_id;
    std::vector<Candidate> candidates;
    std::optional<std::string> source;  // used for extractive density when present

    const Candidate& get(const std::string& candidate_id) const;
};

CandidatePool pool_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CandidatePool& pool);
std::vector<CandidatePool> parse_pools(std::string_view jsonl);

bool is_positive_tag(const std::string& tag);  // PARAPHRASE, REFERENCE
bool is_negative_tag(const std::string& tag);  // MASK_FILL*, SWAP*

struct MethodCount {
    std::string tag;
    std::string method;
    std::string hyper_parameter;
    int count = 0;
    bool faithfulness = true;
};

/// Candidates generated per training example for each method configuration.
const std::vector<MethodCount>& method_counts();
int method_total(bool faithfulness);
/// Per-tag counts of `pool` compared against method_counts(); returns the
/// mismatching tags (empty when the pool is fully populated).
std::vector<std::string> method_count_mismatches(const CandidatePool& pool, bool faithfulness);

// ---------------------------------------------------------------------------
// Normalisation
// ---------------------------------------------------------------------------

/// Per-metric mean and population standard deviation fitted on a named
/// population. Metrics with zero deviation are excluded with a warning.
class MetricNormalizer {
  public:
    static MetricNormalizer fit(std::string population, const std::map<std::string, std::vector<double>>& values);

    const std::string& population() const { return population_; }
    bool has(const std::string& metric) const { return stats_.contains(metric); }
    double mean(const std::string& metric) const;
    double stddev(const std::string& metric) const;
    double z(const std::string& metric, double x) const;
    const std::vector<std::string>& excluded() const { return excluded_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    std::vector<std::string> metrics() const;

    /// Mean z-score over `metrics` (those not excluded) for one candidate.
    double aggregate(const std::map<std::string, double>& scores, const std::vector<std::string>& metrics) const;

  private:
    std::string population_;
    std::map<std::string, std::pair<double, double>> stats_;
    std::vector<std::string> excluded_;
    std::vector<std::string> warnings_;
};

double population_mean(const std::vector<double>& x);
double population_stddev(const std::vector<double>& x);
std::vector<double> zscores(const std::vector<double>& x);

/// Unweighted (or weighted) mean of z-scores.
double aggregate(const std::vector<double>& z, const std::vector<double>& weights = {});

/// g = (z(f) + z(cov)) / 2 with population statistics of each input.
std::vector<double> coverage_combined_metric(const std::vector<double>& f, const std::vector<double>& cov);

/// metric_values[m][i] is metric m on candidate i; returns the per-candidate
/// mean of per-metric z-scores. Constant metrics are skipped.
std::vector<double> distillation_targets(const std::vector<std::vector<double>>& metric_values);

// ---------------------------------------------------------------------------
// Loss values
// ---------------------------------------------------------------------------

/// sum_{i<j} max(0, f_j - f_i + (j - i) * lambda), index 0 = best rank.
double pairwise_margin_loss(const std::vector<double>& scores, double lambda_margin);

/// -(1/C(|P|,2)) sum_{i<j in P} log[exp(cos(h_i,h_j)/tau) / sum_{k in N} exp(cos(h_i,h_k)/tau)].
double latent_contrast_loss(const std::vector<Eigen::VectorXd>& positives,
                            const std::vector<Eigen::VectorXd>& negatives, double tau);

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

enum class Task { Relevance, Faithfulness };
Task parse_task(const std::string& text);
std::string to_string(Task task);

enum class Strategy {
    Random,
    QualityHigh,
    QualityMin,
    QualityExtreme,
    QualityAverage,
    MaxMargin,
    MinMargin,
    MaxDiversity,
    MinDiversity,
    TopBeams,
    BottomBeams,
    ExtremeBeams,
    Easy,
    Hard,
    Short,
    Long,
    MaxExtractiveGap,
};

Strategy parse_strategy(const std::string& text);
std::string to_string(Strategy strategy);
const std::vector<Strategy>& strategies_for(Task task);

struct SelectionSizes {
    std::size_t rank = 4;
    std::size_t positives = 2;
    std::size_t negatives = 2;
};

struct ContrastSelection {
    Strategy strategy = Strategy::Random;
    Task task = Task::Relevance;
    std::vector<std::string> ranked;     // relevance, best first
    std::vector<std::string> positives;  // faithfulness
    std::vector<std::string> negatives;
    std::vector<std::string> warnings;
};

struct SelectOptions {
    SelectionSizes sizes;
    std::uint64_t seed = 0;
    std::size_t enumeration_limit = 24;  // larger pools use the windowed heuristics
};

/// `quality[i]` is Rel_Agg or Faith_Agg of pool.candidates[i]. Ties are broken
/// by lowest candidate id.
ContrastSelection select(const CandidatePool& pool, Strategy strategy, Task task, const std::vector<double>& quality,
                         const SelectOptions& options = {});

/// Relevance: mean of adjacent differences of the sorted scores.
double rank_margin(std::vector<double> scores);
/// Faithfulness: mean(positive) - mean(negative).
double contrast_margin(const std::vector<double>& positives, const std::vector<double>& negatives);

struct SetStatistics {
    std::size_t size = 0;
    double mean_quality = 0.0;
    double margin = 0.0;
    double diversity = 0.0;  // 1 - self-BLEU, 0 for fewer than two candidates
    double mean_log_likelihood = 0.0;
    double mean_length = 0.0;
    std::optional<double> likelihood_gap;  // faithfulness
    std::optional<double> extractive_gap;  // faithfulness
};

/// Extractive density of each candidate: against pool.source when present,
/// else scores["density"]; nullopt when neither exists.
std::optional<std::vector<double>> candidate_densities(const CandidatePool& pool);

SetStatistics set_statistics(const CandidatePool& pool, const ContrastSelection& selection,
                             const std::vector<double>& quality);
/// Whole-pool statistics (relevance view: every candidate ranked).
SetStatistics pool_statistics(const CandidatePool& pool, const std::vector<double>& quality);

nlohmann::json to_json(const ContrastSelection& selection);
nlohmann::json to_json(const SetStatistics& stats);

// ---------------------------------------------------------------------------
// Correlation and human error rate
// ---------------------------------------------------------------------------

double pearson(const std::vector<double>& x, const std::vector<double>& y);
std::vector<double> average_ranks(const std::vector<double>& x);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Errored SEs / total SEs; nullopt for a sentence without SEs.
std::optional<double> herr(std::size_t se_count, std::size_t errored);

}  // namespace coursekit
