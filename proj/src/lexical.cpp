#include "coursekit/lexical.hpp"

#include <algorithm>
#include <cmath>

namespace coursekit {

RougeScore make_rouge(double precision, double recall) {
    RougeScore s{precision, recall, 0.0};
    if (precision + recall > 0.0) s.f1 = 2.0 * precision * recall / (precision + recall);
    return s;
}

NgramCounts ngram_counts(const TokenList& tokens, int n) {
    NgramCounts counts;
    if (n < 1) throw ValidationError("ngram order must be >= 1");
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
        ++counts[TokenList(tokens.begin() + static_cast<long>(i), tokens.begin() + static_cast<long>(i + un))];
    }
    return counts;
}

void NgramBag::add(const TokenList& tokens) {
    for (std::size_t n = 1; n <= counts_.size(); ++n) {
        for (auto& [gram, c] : ngram_counts(tokens, static_cast<int>(n))) counts_[n - 1][gram] += c;
    }
}

long NgramBag::total(int n) const {
    long t = 0;
    for (const auto& [gram, c] : counts(n)) t += c;
    return t;
}

RougeScore rouge_from_counts(const NgramCounts& candidate, const NgramCounts& reference) {
    long cand_total = 0, ref_total = 0, overlap = 0;
    for (const auto& [g, c] : candidate) cand_total += c;
    for (const auto& [g, c] : reference) {
        ref_total += c;
        auto it = candidate.find(g);
        if (it != candidate.end()) overlap += std::min(c, it->second);
    }
    if (cand_total == 0 || ref_total == 0) return {};
    return make_rouge(static_cast<double>(overlap) / static_cast<double>(cand_total),
                      static_cast<double>(overlap) / static_cast<double>(ref_total));
}

RougeScore rouge_n(const TokenList& candidate, const TokenList& reference, int n) {
    return rouge_from_counts(ngram_counts(candidate, n), ngram_counts(reference, n));
}

std::size_t lcs_length(const TokenList& a, const TokenList& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScore rouge_l(const TokenList& candidate, const TokenList& reference) {
    if (candidate.empty() || reference.empty()) return {};
    const double lcs = static_cast<double>(lcs_length(candidate, reference));
    return make_rouge(lcs / static_cast<double>(candidate.size()), lcs / static_cast<double>(reference.size()));
}

double r12(const TokenList& candidate, const TokenList& reference) {
    return 0.5 * (rouge_n(candidate, reference, 1).f1 + rouge_n(candidate, reference, 2).f1);
}

double r12(const NgramBag& candidate, const NgramBag& reference) {
    return 0.5 * (rouge_from_counts(candidate.counts(1), reference.counts(1)).f1 +
                  rouge_from_counts(candidate.counts(2), reference.counts(2)).f1);
}

double rouge_12l(const TokenList& candidate, const TokenList& reference) {
    return (rouge_n(candidate, reference, 1).f1 + rouge_n(candidate, reference, 2).f1 +
            rouge_l(candidate, reference).f1) /
           3.0;
}

FragmentStats extractive_fragments(const TokenList& summary, const TokenList& source) {
    FragmentStats stats;
    std::size_t i = 0;
    while (i < summary.size()) {
        Fragment best;
        std::size_t j = 0;
        while (j < source.size()) {
            if (summary[i] == source[j]) {
                std::size_t ii = i, jj = j;
                while (ii < summary.size() && jj < source.size() && summary[ii] == source[jj]) {
                    ++ii;
                    ++jj;
                }
                if (best.length < ii - i) best = Fragment{j, i, ii - i};
                j = jj;
            } else {
                ++j;
            }
        }
        if (best.length > 0) stats.fragments.push_back(best);
        i += std::max<std::size_t>(best.length, 1);
    }
    if (summary.empty()) return stats;
    double covered = 0.0, squared = 0.0;
    for (const auto& f : stats.fragments) {
        covered += static_cast<double>(f.length);
        squared += static_cast<double>(f.length * f.length);
    }
    stats.coverage = covered / static_cast<double>(summary.size());
    stats.density = squared / static_cast<double>(summary.size());
    return stats;
}

double bleu(const TokenList& hypothesis, const TokenList& reference, int max_n) {
    if (hypothesis.empty() || reference.empty()) return 0.0;
    constexpr double kFloor = 1e-9;
    double log_sum = 0.0;
    int orders = 0;
    for (int n = 1; n <= max_n; ++n) {
        auto hyp = ngram_counts(hypothesis, n);
        if (hyp.empty()) break;  // hypothesis shorter than n
        auto ref = ngram_counts(reference, n);
        long total = 0, matched = 0;
        for (const auto& [g, c] : hyp) {
            total += c;
            auto it = ref.find(g);
            if (it != ref.end()) matched += std::min(c, it->second);
        }
        double p = static_cast<double>(matched) / static_cast<double>(total);
        log_sum += std::log(std::max(p, kFloor));
        ++orders;
    }
    const double c = static_cast<double>(hypothesis.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / orders);
}

double self_bleu(const std::vector<TokenList>& candidates) {
    if (candidates.size() < 2) throw ValidationError("self_bleu: need at least 2 candidates");
    double sum = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            if (i != j) sum += bleu(candidates[i], candidates[j]);
        }
    }
    const double pairs = static_cast<double>(candidates.size() * (candidates.size() - 1));
    return sum / pairs;
}

double section_salience_target(const TokenList& section, const TokenList& reference) {
    double sum = 0.0;
    int orders = 0;
    for (int n = 1; n <= 2; ++n) {
        if (reference.size() < static_cast<std::size_t>(n)) continue;
        sum += rouge_n(section, reference, n).recall;
        ++orders;
    }
    return orders ? sum / orders : 0.0;
}

double compression_ratio(std::size_t source_tokens, std::size_t summary_tokens) {
    if (summary_tokens == 0) throw ValidationError("compression_ratio: summary has zero tokens");
    return static_cast<double>(source_tokens) / static_cast<double>(summary_tokens);
}

}  // namespace coursekit
