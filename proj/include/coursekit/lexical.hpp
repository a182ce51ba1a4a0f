#pragma once

#include <map>
#include <string>
#include <vector>

#include "coursekit/common.hpp"

namespace coursekit {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// f1 = 2PR/(P+R), 0 when P+R = 0.
RougeScore make_rouge(double precision, double recall);

using NgramCounts = std::map<TokenList, long>;

NgramCounts ngram_counts(const TokenList& tokens, int n);

/// A multiset of n-grams built sentence by sentence, so that a set of
/// sentences never contributes n-grams spanning a sentence boundary.
class NgramBag {
  public:
    explicit NgramBag(int max_n = 2) : counts_(max_n) {}

    void add(const TokenList& tokens);
    const NgramCounts& counts(int n) const { return counts_.at(n - 1); }
    long total(int n) const;

  private:
    std::vector<NgramCounts> counts_;
};

RougeScore rouge_from_counts(const NgramCounts& candidate, const NgramCounts& reference);

/// Clipped n-gram overlap. Empty side gives zero scores.
RougeScore rouge_n(const TokenList& candidate, const TokenList& reference, int n);

/// Sentence-level LCS.
RougeScore rouge_l(const TokenList& candidate, const TokenList& reference);
std::size_t lcs_length(const TokenList& a, const TokenList& b);

/// Mean of ROUGE-1 and ROUGE-2 F1.
double r12(const TokenList& candidate, const TokenList& reference);
double r12(const NgramBag& candidate, const NgramBag& reference);

/// Mean of ROUGE-1, ROUGE-2 and ROUGE-L F1.
double rouge_12l(const TokenList& candidate, const TokenList& reference);

struct Fragment {
    std::size_t source_start = 0;
    std::size_t summary_start = 0;
    std::size_t length = 0;
    bool operator==(const Fragment&) const = default;
};

struct FragmentStats {
    double coverage = 0.0;
    double density = 0.0;
    std::vector<Fragment> fragments;
};

/// Greedy left-to-right decomposition of the summary into maximal fragments
/// shared with the source. Equal-length matches keep the earliest source start.
FragmentStats extractive_fragments(const TokenList& summary, const TokenList& source);

/// Corpus BLEU of one hypothesis against one reference, up to 4-grams with
/// uniform weights and brevity penalty. Zero precisions are floored at 1e-9.
double bleu(const TokenList& hypothesis, const TokenList& reference, int max_n = 4);

/// Mean BLEU over ordered pairs (i != j). Requires at least two candidates.
double self_bleu(const std::vector<TokenList>& candidates);

/// Mean ROUGE-1 / ROUGE-2 recall of the reference against the section.
double section_salience_target(const TokenList& section, const TokenList& reference);

/// source / summary token counts; ValidationError when summary is zero.
double compression_ratio(std::size_t source_tokens, std::size_t summary_tokens);

}  // namespace coursekit
