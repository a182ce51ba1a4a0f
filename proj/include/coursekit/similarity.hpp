#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

#include <Eigen/Dense>

#include "coursekit/common.hpp"

namespace coursekit {

/// Precomputed vectors keyed by surface string. Immutable after loading.
class VectorStore {
  public:
    explicit VectorStore(int dim);

    int dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }

    /// Throws ValidationError on length mismatch or duplicate key.
    void add(const std::string& key, Eigen::VectorXd vector);
    const Eigen::VectorXd* find(const std::string& key) const;

    /// Sidecar text format: "dim N", then "key<TAB>v1 ... vN" per line.
    static VectorStore parse(std::string_view text);
    static VectorStore load(const std::string& path);

  private:
    int dim_;
    std::unordered_map<std::string, Eigen::VectorXd> entries_;
};

/// Cosine clamped to [0, 1]; zero vectors give 0.
double clamped_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Similarity backend used wherever a neural encoder would score tokens or
/// mentions. EXACT compares strings; VECTOR uses the store and falls back to
/// string equality when a key is missing.
class SimilarityBackend {
  public:
    enum class Kind { Exact, Vector };

    static SimilarityBackend exact();
    static SimilarityBackend vectors(std::shared_ptr<const VectorStore> store, double default_score = 0.0);
    /// "exact" or "vectors:<path>".
    static SimilarityBackend from_spec(const std::string& spec);

    Kind kind() const { return kind_; }
    const VectorStore* store() const { return store_.get(); }
    std::string describe() const;

    double token_sim(const std::string& a, const std::string& b) const;
    double mention_sim(const std::string& a, const std::string& b) const;

  private:
    Kind kind_ = Kind::Exact;
    std::shared_ptr<const VectorStore> store_;
    double default_score_ = 0.0;
    std::string source_;

    std::optional<Eigen::VectorXd> mention_vector(const std::string& normalized) const;
};

/// Mean over hypothesis tokens of the best token_sim against the references.
/// Empty hypothesis is a ValidationError; empty references score 0.
double greedy_precision(const SimilarityBackend& backend, const TokenList& hyp, const TokenList& refs);

/// Lowercase, collapse whitespace, strip trailing punctuation.
std::string normalize_mention(std::string_view text);

/// Shared stopword list used by TF-IDF overlap and mention pooling.
const std::vector<std::string>& default_stopwords();
bool is_stopword(const std::string& token);

}  // namespace coursekit
