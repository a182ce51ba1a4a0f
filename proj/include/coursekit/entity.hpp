#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coursekit/corpus.hpp"
#include "coursekit/similarity.hpp"

namespace coursekit {

// ---------------------------------------------------------------------------
// Synonym classification
// ---------------------------------------------------------------------------

/// |c_x ∩ c_y| / (|c_x| + |c_y|); 0 when either set is empty.
double code_overlap(const EntityMention& x, const EntityMention& y);

/// TF-IDF over mention tokens (stopwords removed), smooth idf
/// ln((1+N)/(1+df)) + 1, compared by cosine.
class TfidfIndex {
  public:
    TfidfIndex() = default;
    explicit TfidfIndex(const std::vector<std::string>& texts);

    std::map<std::string, double> vector(const std::string& text) const;
    double cosine(const std::string& a, const std::string& b) const;
    double idf(const std::string& token) const;

  private:
    std::map<std::string, std::size_t> df_;
    std::size_t docs_ = 0;
};

struct SynonymScores {
    double code = 0.0;
    double embed = 0.0;
    double tfidf = 0.0;
    double agg = 0.0;
    bool coded = false;  // both mentions carry codes
};

SynonymScores synonym_scores(const EntityMention& x, const EntityMention& y, const SimilarityBackend& backend,
                             const TfidfIndex& tfidf);

/// Code >= 0.4, embed >= 0.75 or aggregate >= 0.4. When either mention has no
/// codes the code rule is disabled and the aggregate averages embed and TF-IDF.
bool classify_synonyms(const EntityMention& x, const EntityMention& y, const SimilarityBackend& backend,
                       const TfidfIndex& tfidf);

/// mention_sim >= threshold or normalized text equality.
bool classify_synonyms_embedding_only(const EntityMention& x, const EntityMention& y,
                                      const SimilarityBackend& backend, double threshold = 0.75);

using SynonymPredicate = std::function<bool(const EntityMention&, const EntityMention&)>;

SynonymPredicate feature_predicate(const SimilarityBackend& backend, const TfidfIndex& tfidf);
SynonymPredicate embedding_predicate(const SimilarityBackend& backend, double threshold = 0.75);

// ---------------------------------------------------------------------------
// Entity synonym groups
// ---------------------------------------------------------------------------

struct EntitySynonymGroup {
    std::string esg_id;
    std::vector<std::string> members;  // sorted mention ids
    bool source_salient = false;
    SemanticType semantic_type = SemanticType::Other;

    bool operator==(const EntitySynonymGroup&) const = default;
};

/// Connected components of the synonym graph. Exact normalized duplicates are
/// always joined. Output is independent of input order: members are sorted by
/// mention id and groups are numbered by their smallest member.
std::vector<EntitySynonymGroup> build_esgs(const std::vector<EntityMention>& mentions,
                                           const SynonymPredicate& predicate);

/// Mention-to-group lookup over one admission's source ESGs.
class EsgIndex {
  public:
    EsgIndex() = default;
    EsgIndex(std::vector<EntityMention> mentions, std::vector<EntitySynonymGroup> groups);

    const std::vector<EntitySynonymGroup>& groups() const { return groups_; }
    std::vector<EntitySynonymGroup>& mutable_groups() { return groups_; }
    const std::vector<EntityMention>& mentions() const { return mentions_; }

    const EntitySynonymGroup* group(const std::string& esg_id) const;
    const EntitySynonymGroup* group_of(const std::string& mention_id) const;
    const EntityMention* mention(const std::string& mention_id) const;
    std::vector<const EntityMention*> members(const EntitySynonymGroup& group) const;

    /// Every group holding a member synonymous with `m`, in group order.
    std::vector<std::string> matching_groups(const EntityMention& m, const SynonymPredicate& predicate) const;
    bool has_synonym(const EntityMention& m, const SynonymPredicate& predicate) const;

  private:
    std::vector<EntityMention> mentions_;
    std::vector<EntitySynonymGroup> groups_;
    std::map<std::string, std::size_t> group_by_id_;
    std::map<std::string, std::size_t> group_by_mention_;
    std::map<std::string, std::size_t> mention_by_id_;
};

/// Mentions of the admission that sit in notes (source side).
std::vector<EntityMention> source_mentions(const AdmissionRecord& admission);
/// Mentions whose doc_ref matches `doc`.
std::vector<EntityMention> mentions_in(const AdmissionRecord& admission, const DocRef& doc);

/// Builds the admission's source ESGs with the given predicate.
EsgIndex build_source_index(const AdmissionRecord& admission, const SynonymPredicate& predicate);

/// Marks groups with at least one member synonymous with a reference mention.
/// Returns the salient fraction (0 for no groups).
double label_salience(std::vector<EntitySynonymGroup>& groups, const EsgIndex& index,
                      const std::vector<EntityMention>& reference_mentions, const SynonymPredicate& predicate);
double label_salience(EsgIndex& index, const std::vector<EntityMention>& reference_mentions,
                      const SynonymPredicate& predicate);

/// Union of source groups matched by any of the mentions.
std::set<std::string> aligned_esgs(const std::vector<EntityMention>& mentions, const EsgIndex& index,
                                   const SynonymPredicate& predicate);

// ---------------------------------------------------------------------------
// Support and overlap metrics
// ---------------------------------------------------------------------------

struct SupportVerdict {
    int sentence_index = 0;
    std::vector<std::string> unsupported_mentions;
    double soft_precision = 0.0;
    bool supported = false;
};

/// Mentions of `all` lying inside [begin, end) of document `doc`.
std::vector<EntityMention> mentions_within(const std::vector<EntityMention>& all, const DocRef& doc,
                                           std::size_t begin, std::size_t end);

SupportVerdict support_verdict(const Sentence& reference_sentence, const std::vector<SourceSentence>& aligned,
                               const std::vector<EntityMention>& mentions, const SimilarityBackend& backend,
                               const SynonymPredicate& predicate, double precision_threshold = 0.75);

/// |ref ∩ model| / |ref|; nullopt when the reference set is empty.
std::optional<double> sgr(const std::set<std::string>& reference_aligned, const std::set<std::string>& model_aligned);

struct RateResult {
    double value = 0.0;
    bool empty = false;  // denominator was zero; value reported as 0
};

RateResult hallucination_rate(const std::vector<EntityMention>& model_mentions, const EsgIndex& source_index,
                              const SynonymPredicate& predicate);

/// Among reference mentions with a source synonym, the fraction that also have
/// a synonym among the model mentions.
RateResult faithful_adjusted_recall(const std::vector<EntityMention>& reference_mentions,
                                    const std::vector<EntityMention>& model_mentions, const EsgIndex& source_index,
                                    const SynonymPredicate& predicate);

/// (|ref| - supported) / |ref|.
double entity_novelty(std::size_t reference_mentions, std::size_t supported);

// ---------------------------------------------------------------------------
// Entity grid and transitions
// ---------------------------------------------------------------------------

struct EntityGrid {
    std::vector<std::string> esg_ids;                            // columns
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> grid;    // sentence x esg
    double singleton_fraction = 0.0;  // entities present in exactly one sentence
    double adjacent_fraction = 0.0;   // multi-sentence entities with an adjacent pair
    bool empty = false;
};

/// `assignments[i]` lists the ESG ids mentioned in sentence i.
EntityGrid entity_grid(const std::vector<std::vector<std::string>>& assignments);

struct TransitionMatrix {
    Eigen::Matrix3d probabilities = Eigen::Matrix3d::Zero();  // rows/cols: PROBLEM, TREATMENT, TEST
    Eigen::Matrix3d counts = Eigen::Matrix3d::Zero();
    bool empty = false;
};

/// Row-normalised counts of consecutive mention types, OTHER mentions skipped.
TransitionMatrix transition_matrix(const std::vector<SemanticType>& types_in_order);

// ---------------------------------------------------------------------------
// Gazetteer tagging for generated text
// ---------------------------------------------------------------------------

struct GazetteerEntry {
    std::string text;
    SemanticType semantic_type = SemanticType::Other;
    std::vector<std::string> codes;
};

/// Builds an entry list from the unique normalized mention texts of an admission.
std::vector<GazetteerEntry> gazetteer_from(const std::vector<EntityMention>& mentions);

/// Case-insensitive whole-word matches, longest entry first, non-overlapping,
/// returned in text order. Stands in for NER on generated summaries.
std::vector<EntityMention> gazetteer_mentions(const std::string& text, const DocRef& doc,
                                              const std::vector<GazetteerEntry>& entries,
                                              const std::string& id_prefix = "g");

// ---------------------------------------------------------------------------
// ESG sidecar JSONL
// ---------------------------------------------------------------------------

nlohmann::json esg_to_json(const std::string& admission_id, const EntitySynonymGroup& group, const EsgIndex& index);
/// admission_id -> groups, validated for duplicate ids.
std::map<std::string, std::vector<EntitySynonymGroup>> parse_esg_file(std::string_view jsonl);

}  // namespace coursekit
