#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coursekit/corpus.hpp"
#include "coursekit/entity.hpp"
#include "coursekit/similarity.hpp"

namespace coursekit {

enum class AlignKind { RougeGain, BsGain, RougeTopK, BsTopK, TopSection, EntityChain, Full };

struct AlignmentMethod {
    AlignKind kind = AlignKind::RougeGain;
    int k = 5;                // TopK methods
    int token_budget = 1024;  // Full

    /// "rouge-gain", "bs-gain", "rouge-topk[:k]", "bs-topk[:k]", "top-section",
    /// "entity-chain", "full[:budget]".
    static AlignmentMethod parse(const std::string& text);
    std::string name() const;
};

struct AlignedSentence {
    std::string note_id;
    int sentence_index = 0;
    std::size_t position = 0;  // global source position
    double score = 0.0;        // method-specific selection score
};

struct AlignmentResult {
    int summary_sentence_index = 0;
    AlignmentMethod method;
    std::vector<AlignedSentence> aligned;
    std::vector<Eigen::VectorXd> weights;       // w_0 .. w_T (weighted methods only)
    std::vector<std::string> skipped_mentions;  // concepts with no source ESG member

    bool contains(std::size_t position) const;
};

/// Token-by-sentence matrix: entry (k, s) is the best token_sim between
/// reference token k and any token of source sentence s.
Eigen::MatrixXd align_matrix(const TokenList& reference, const std::vector<SourceSentence>& source,
                             const SimilarityBackend& backend);

/// Greedy importance-weighted extraction. At each step picks the sentence
/// maximising sum_k w_k a_k(s) / sum_k w_k (ties: lowest position), then sets
/// w <- min(w, 1 - a(s*)). Extractions whose coverage improvement w_t - w_{t+1}
/// has mean below avg_thresh and max below max_thresh are dropped afterwards.
AlignmentResult greedy_weighted_align(const Sentence& reference_sentence, const std::vector<SourceSentence>& source,
                                      const SimilarityBackend& backend, int max_steps = 5,
                                      double avg_thresh = 0.01, double max_thresh = 0.05);

/// For every reference mention whose matching source ESGs are not represented
/// in the aligned set, appends the source sentence holding the closest member.
AlignmentResult augment_for_entities(AlignmentResult result, const std::vector<EntityMention>& reference_mentions,
                                     const std::vector<SourceSentence>& source, const EsgIndex& index,
                                     const SynonymPredicate& predicate, const SimilarityBackend& backend);

struct AlignInputs {
    const AdmissionRecord* admission = nullptr;
    const std::vector<SourceSentence>* source = nullptr;
    const SimilarityBackend* backend = nullptr;
    const EsgIndex* esg = nullptr;                 // required for ENTITY_CHAIN
    const SynonymPredicate* predicate = nullptr;   // required for ENTITY_CHAIN
};

AlignmentResult align(const AlignmentMethod& method, const Sentence& summary_sentence, const AlignInputs& inputs);

nlohmann::json to_json(const AlignmentResult& result);

}  // namespace coursekit
