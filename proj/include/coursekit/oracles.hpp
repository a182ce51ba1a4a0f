#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coursekit/corpus.hpp"

namespace coursekit {

enum class OracleStrategy { Random, LexRank, TopK, Gain, SentAlign, Retrieval, Ensemble };

OracleStrategy parse_oracle_strategy(const std::string& text);
std::string to_string(OracleStrategy strategy);

struct ExtractedSentence {
    bool from_train = false;  // true: a training-set reference sentence
    std::string doc_id;       // note id, or the training admission id
    int index = 0;            // sentence index within doc_id
    std::size_t position = 0; // source position (source sentences only)
    std::string text;
    TokenList tokens;
};

struct ExtractiveSummary {
    OracleStrategy strategy = OracleStrategy::TopK;
    std::size_t budget = 0;  // 0 for unbudgeted strategies
    std::vector<ExtractedSentence> selected;
    std::vector<double> step_scores;  // strategy-specific per-selection score
    double retrieval_share = 0.0;     // ensemble only

    TokenList tokens() const;
    std::size_t token_count() const;
};

/// Source sentences ranked by r12 against the reference, taken until the next
/// one would exceed the budget. Exact token-sequence duplicates are skipped.
ExtractiveSummary oracle_top_k(const std::vector<SourceSentence>& source, const TokenList& reference,
                               std::size_t budget);

/// Greedy marginal r12 gain against the reference; stops when the best gain
/// is <= 0. Reference and summary n-grams are counted per sentence.
ExtractiveSummary oracle_gain(const std::vector<SourceSentence>& source, const std::vector<TokenList>& reference);

/// Best r12 source sentence per reference sentence, duplicates collapsed.
ExtractiveSummary oracle_sent_align(const std::vector<SourceSentence>& source,
                                    const std::vector<Sentence>& reference);

/// Okapi BM25 over keyed token lists; idf floored at 0.
class Bm25Index {
  public:
    struct Document {
        std::string key;
        TokenList tokens;
        std::string text;
        std::string owner;  // e.g. admission id
        int index = 0;
    };

    explicit Bm25Index(std::vector<Document> documents, double k1 = 1.2, double b = 0.75);

    double idf(const std::string& token) const;
    double score(const TokenList& query, std::size_t doc) const;
    /// Highest-scoring document; ties go to the lowest key. Throws on empty index.
    std::size_t best(const TokenList& query) const;

    const std::vector<Document>& documents() const { return docs_; }
    double avgdl() const { return avgdl_; }
    double k1() const { return k1_; }
    double b() const { return b_; }

  private:
    std::vector<Document> docs_;
    double k1_, b_;
    double avgdl_ = 0.0;
    std::map<std::string, std::size_t> df_;
    std::vector<std::map<std::string, std::size_t>> tf_;
    std::vector<std::size_t> key_order_;
};

/// Index over the reference sentences of every admission except `exclude`.
Bm25Index reference_index(const Corpus& train, const std::string& exclude = {});

ExtractiveSummary oracle_retrieval(const std::vector<Sentence>& reference, const Bm25Index& index);

/// Per reference sentence, the better (r12) of the sent-align and retrieval
/// picks; ties keep the source sentence.
ExtractiveSummary oracle_sa_plus_retrieval(const std::vector<SourceSentence>& source,
                                           const std::vector<Sentence>& reference, const Bm25Index& index);

/// Stationary distribution of the TF-IDF cosine graph (edges below threshold
/// removed, weights kept), by power iteration.
Eigen::VectorXd lexrank_scores(const std::vector<TokenList>& sentences, double damping = 0.85,
                               double threshold = 0.1, double tol = 1e-10, int max_iter = 200);
/// Row-stochastic transition matrix used by lexrank_scores.
Eigen::MatrixXd lexrank_transition(const std::vector<TokenList>& sentences, double threshold = 0.1);

ExtractiveSummary lexrank(const std::vector<SourceSentence>& source, std::size_t budget, double damping = 0.85,
                          double threshold = 0.1);

ExtractiveSummary random_baseline(const std::vector<SourceSentence>& source, std::size_t budget,
                                  std::uint64_t seed);

/// Mean reference token count across the corpus (rounded), the default budget.
std::size_t mean_reference_length(const Corpus& corpus);

nlohmann::json to_json(const ExtractiveSummary& summary);

}  // namespace coursekit
