#pragma once

#include <string>
#include <vector>

#include "coursekit/corpus.hpp"
#include "coursekit/entity.hpp"
#include "coursekit/similarity.hpp"

namespace coursekit {

enum class SwapMode { Intrinsic, Extrinsic };

struct CorruptionSpec {
    double swap_rate = 0.5;
    SwapMode swap_mode = SwapMode::Intrinsic;
    double mask_rate = 0.25;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PoolEntity {
    std::string text;
    SemanticType semantic_type = SemanticType::Other;
};

struct SwapRecord {
    std::string mention_id;
    std::string original;
    std::string replacement;
    std::size_t start = 0;  // offsets of the replacement in the output text
    std::size_t end = 0;
};

struct SwapResult {
    std::string text;
    std::vector<SwapRecord> swaps;
    std::vector<std::string> skipped;     // mention ids with no same-type pool entry
    std::vector<EntityMention> mentions;  // all mentions, offsets rebuilt for `text`
};

/// round-half-up of s * n.
std::size_t swap_count(double swap_rate, std::size_t mentions);
/// Uniform over {0, ..., mentions}.
std::size_t sample_swap_count(std::size_t mentions, Rng& rng);

/// Replaces `k` distinct mentions (uniformly chosen) with same-type pool
/// entries whose normalized text differs from the original. Mention offsets
/// are relative to `text` and must not overlap.
SwapResult swap_k_entities(const std::string& text, const std::vector<EntityMention>& mentions,
                           const std::vector<PoolEntity>& pool, std::size_t k, Rng& rng);
SwapResult swap_entities(const std::string& text, const std::vector<EntityMention>& mentions,
                         const std::vector<PoolEntity>& pool, double swap_rate, Rng& rng);

inline constexpr const char* kMaskToken = "<mask>";

struct TokenSpan {
    std::size_t begin = 0;  // token indices, half-open
    std::size_t end = 0;
    auto operator<=>(const TokenSpan&) const = default;
};

struct MaskResult {
    TokenList tokens;              // each chosen span replaced by one kMaskToken
    std::vector<TokenSpan> spans;  // chosen spans, sorted
    std::size_t masked_tokens = 0;
};

/// Shuffles the candidate spans and keeps non-overlapping ones until at least
/// m * |tokens| tokens are masked.
MaskResult delete_spans(const TokenList& tokens, const std::vector<TokenSpan>& candidates, double mask_rate,
                        Rng& rng);

/// Token spans covered by character ranges of `text`.
std::vector<TokenSpan> char_to_token_spans(std::string_view text,
                                           const std::vector<std::pair<std::size_t, std::size_t>>& char_spans);

/// First `limit` unique concepts across ranked neighbour mention lists.
/// Concepts are keyed by ESG when `index` knows the mention, else by
/// normalized text.
std::vector<std::string> build_distractor_set(const std::vector<std::vector<EntityMention>>& neighbor_mentions,
                                              const EsgIndex* index = nullptr, std::size_t limit = 25);

struct RedressInput {
    int swap_code = 0;
    std::vector<std::string> distractors;
    std::string text;
    bool operator==(const RedressInput&) const = default;
};

inline constexpr const char* kRedressSeparator = "<sep>";

/// Training encodes k, inference k + 1. Distractors listed in `removed`
/// (entities taken out by the swap) are dropped.
RedressInput encode_redress_input(int k, const std::vector<std::string>& distractors,
                                  const std::vector<std::string>& removed, const std::string& corrupted,
                                  bool inference = false);
/// "<code> <sep> d1 ; d2 <sep> text". Distractors may not contain ';' or the separator.
std::string serialize_redress(const RedressInput& input);
RedressInput parse_redress(const std::string& encoded);

enum class Polarity { Positive, Negative };
enum class Provenance { RedressCorruption, RandomOtherAlignment, SelfNegative };
std::string to_string(Polarity p);
std::string to_string(Provenance p);

struct RevisionTuple {
    std::string input;
    std::vector<std::string> context;
    std::string target;
    Polarity polarity = Polarity::Positive;
    Provenance provenance = Provenance::RedressCorruption;
    int sentence_index = 0;
};

struct SupportedExample {
    int sentence_index = 0;
    std::string sentence;
    std::vector<std::string> context;      // aligned source sentences
    std::vector<std::string> corruptions;  // ReDRESS outputs for this sentence
};

/// The four tuple forms per supported sentence. r̂_u is the corruption with
/// the lowest greedy precision against the context; r̂_n a random other
/// corruption (r̂_u itself when it is the only one). Forms needing another
/// supported sentence are skipped when there is none.
std::vector<RevisionTuple> build_revision_tuples(const std::vector<SupportedExample>& examples,
                                                 const SimilarityBackend& backend, Rng& rng);

struct RevisionCodes {
    double input_frac = 0.0;
    double source_frac = 0.0;
    int input_decile = 0;
    int source_decile = 0;
};

int decile(double frac);
/// Multiset-intersection copy fractions of r_out against r_in and S.
RevisionCodes revision_codes(const TokenList& r_out, const TokenList& r_in, const TokenList& context);
/// Inference proxy: input_frac = |r_in ∩ S| / |r_in|, source_frac supplied.
RevisionCodes inference_codes(const TokenList& r_in, const TokenList& context, double source_frac);

/// -[mean log p(Z+) + mean log(1 - p(Z-))]; probabilities must lie in (0, 1).
double contrastive_loss_value(const std::vector<double>& positive_probs, const std::vector<double>& negative_probs);

nlohmann::json to_json(const RevisionTuple& tuple);

}  // namespace coursekit
