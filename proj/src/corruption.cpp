#include "coursekit/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace coursekit {

using nlohmann::json;

void CorruptionSpec::validate() const {
    if (!(swap_rate >= 0.0 && swap_rate <= 1.0)) throw ValidationError("swap rate s must be in [0, 1]");
    if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw ValidationError("mask rate m must be in [0, 1]");
}

std::size_t swap_count(double swap_rate, std::size_t mentions) {
    if (!(swap_rate >= 0.0 && swap_rate <= 1.0)) throw ValidationError("swap rate s must be in [0, 1]");
    return static_cast<std::size_t>(std::floor(swap_rate * static_cast<double>(mentions) + 0.5));
}

std::size_t sample_swap_count(std::size_t mentions, Rng& rng) {
    return static_cast<std::size_t>(rng.below(mentions + 1));
}

SwapResult swap_k_entities(const std::string& text, const std::vector<EntityMention>& mentions,
                           const std::vector<PoolEntity>& pool, std::size_t k, Rng& rng) {
    std::vector<std::size_t> by_start(mentions.size());
    std::iota(by_start.begin(), by_start.end(), 0);
    std::sort(by_start.begin(), by_start.end(),
              [&](std::size_t a, std::size_t b) { return mentions[a].start < mentions[b].start; });
    for (std::size_t i = 0; i < by_start.size(); ++i) {
        const auto& m = mentions[by_start[i]];
        if (m.end > text.size() || m.start >= m.end) throw ValidationError("swap: mention span out of range");
        if (i && mentions[by_start[i - 1]].end > m.start) throw ValidationError("swap: overlapping mentions");
    }
    k = std::min(k, mentions.size());

    std::vector<std::size_t> chosen(mentions.size());
    std::iota(chosen.begin(), chosen.end(), 0);
    rng.shuffle(chosen);
    chosen.resize(k);
    std::sort(chosen.begin(), chosen.end());

    SwapResult result;
    std::map<std::size_t, std::string> replacement;
    for (auto i : chosen) {
        const auto& m = mentions[i];
        const auto original = normalize_mention(m.text);
        std::vector<const PoolEntity*> options;
        for (const auto& p : pool) {
            if (p.semantic_type == m.semantic_type && normalize_mention(p.text) != original) options.push_back(&p);
        }
        if (options.empty()) {
            result.skipped.push_back(m.mention_id);
            continue;
        }
        replacement[i] = options[static_cast<std::size_t>(rng.below(options.size()))]->text;
    }

    std::size_t cursor = 0;
    for (auto i : by_start) {
        EntityMention m = mentions[i];
        result.text += text.substr(cursor, m.start - cursor);
        cursor = m.end;
        const std::size_t start = result.text.size();
        auto it = replacement.find(i);
        if (it != replacement.end()) {
            result.text += it->second;
            result.swaps.push_back({m.mention_id, m.text, it->second, start, result.text.size()});
            m.text = it->second;
        } else {
            result.text += m.text;
        }
        m.start = start;
        m.end = result.text.size();
        result.mentions.push_back(std::move(m));
    }
    result.text += text.substr(cursor);
    return result;
}

SwapResult swap_entities(const std::string& text, const std::vector<EntityMention>& mentions,
                         const std::vector<PoolEntity>& pool, double swap_rate, Rng& rng) {
    return swap_k_entities(text, mentions, pool, swap_count(swap_rate, mentions.size()), rng);
}

MaskResult delete_spans(const TokenList& tokens, const std::vector<TokenSpan>& candidates, double mask_rate,
                        Rng& rng) {
    if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw ValidationError("mask rate m must be in [0, 1]");
    for (const auto& s : candidates) {
        if (s.begin >= s.end || s.end > tokens.size()) throw ValidationError("delete_spans: invalid span");
    }
    std::vector<TokenSpan> order = candidates;
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    rng.shuffle(order);

    const double target = mask_rate * static_cast<double>(tokens.size());
    MaskResult result;
    for (const auto& s : order) {
        if (static_cast<double>(result.masked_tokens) >= target) break;
        bool overlaps = std::any_of(result.spans.begin(), result.spans.end(),
                                    [&](const TokenSpan& c) { return s.begin < c.end && c.begin < s.end; });
        if (overlaps) continue;
        result.spans.push_back(s);
        result.masked_tokens += s.end - s.begin;
    }
    std::sort(result.spans.begin(), result.spans.end());
    std::size_t cursor = 0;
    for (const auto& s : result.spans) {
        result.tokens.insert(result.tokens.end(), tokens.begin() + static_cast<long>(cursor),
                             tokens.begin() + static_cast<long>(s.begin));
        result.tokens.emplace_back(kMaskToken);
        cursor = s.end;
    }
    result.tokens.insert(result.tokens.end(), tokens.begin() + static_cast<long>(cursor), tokens.end());
    return result;
}

std::vector<TokenSpan> char_to_token_spans(std::string_view text,
                                           const std::vector<std::pair<std::size_t, std::size_t>>& char_spans) {
    const auto offsets = token_offsets(text);
    std::vector<TokenSpan> out;
    for (const auto& [cb, ce] : char_spans) {
        std::size_t first = offsets.size(), last = 0;
        for (std::size_t t = 0; t < offsets.size(); ++t) {
            if (offsets[t].first < ce && cb < offsets[t].second) {
                first = std::min(first, t);
                last = t + 1;
            }
        }
        if (first < last) out.push_back({first, last});
    }
    return out;
}

std::vector<std::string> build_distractor_set(const std::vector<std::vector<EntityMention>>& neighbor_mentions,
                                              const EsgIndex* index, std::size_t limit) {
    std::vector<std::string> out;
    std::set<std::string> keys;
    for (const auto& mentions : neighbor_mentions) {
        for (const auto& m : mentions) {
            if (out.size() >= limit) return out;
            std::string key;
            if (index) {
                if (const auto* g = index->group_of(m.mention_id)) key = "esg:" + g->esg_id;
            }
            if (key.empty()) key = "text:" + normalize_mention(m.text);
            if (keys.insert(key).second) out.push_back(m.text);
        }
    }
    return out;
}

RedressInput encode_redress_input(int k, const std::vector<std::string>& distractors,
                                  const std::vector<std::string>& removed, const std::string& corrupted,
                                  bool inference) {
    if (k < 0) throw ValidationError("redress: swap count must be >= 0");
    std::set<std::string> gone;
    for (const auto& r : removed) gone.insert(normalize_mention(r));
    RedressInput in;
    in.swap_code = inference ? k + 1 : k;
    for (const auto& d : distractors) {
        if (!gone.contains(normalize_mention(d))) in.distractors.push_back(d);
    }
    in.text = corrupted;
    return in;
}

std::string serialize_redress(const RedressInput& input) {
    std::string out = std::to_string(input.swap_code) + " " + kRedressSeparator + " ";
    for (std::size_t i = 0; i < input.distractors.size(); ++i) {
        const auto& d = input.distractors[i];
        if (d.find(';') != std::string::npos || d.find(kRedressSeparator) != std::string::npos || trim(d) != d ||
            d.empty())
            throw ValidationError("redress: distractor '" + d + "' cannot be serialized");
        if (i) out += " ; ";
        out += d;
    }
    out += std::string(" ") + kRedressSeparator + " " + input.text;
    return out;
}

RedressInput parse_redress(const std::string& encoded) {
    const std::string sep = std::string(" ") + kRedressSeparator + " ";
    auto first = encoded.find(sep);
    if (first == std::string::npos) throw ParseError("redress: missing separator");
    auto second = encoded.find(sep, first + sep.size());
    if (second == std::string::npos) throw ParseError("redress: missing second separator");
    RedressInput in;
    try {
        std::size_t used = 0;
        in.swap_code = std::stoi(encoded.substr(0, first), &used);
        if (used != first) throw std::invalid_argument("code");
    } catch (const std::exception&) {
        throw ParseError("redress: bad swap code");
    }
    const std::string middle = encoded.substr(first + sep.size(), second - first - sep.size());
    if (!middle.empty()) {
        std::size_t pos = 0;
        while (true) {
            auto next = middle.find(" ; ", pos);
            in.distractors.push_back(middle.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
            if (next == std::string::npos) break;
            pos = next + 3;
        }
    }
    in.text = encoded.substr(second + sep.size());
    return in;
}

std::string to_string(Polarity p) { return p == Polarity::Positive ? "POSITIVE" : "NEGATIVE"; }

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::RedressCorruption: return "REDRESS_CORRUPTION";
        case Provenance::RandomOtherAlignment: return "RANDOM_OTHER_ALIGNMENT";
        case Provenance::SelfNegative: return "SELF_NEGATIVE";
    }
    return {};
}

std::vector<RevisionTuple> build_revision_tuples(const std::vector<SupportedExample>& examples,
                                                 const SimilarityBackend& backend, Rng& rng) {
    std::vector<const SupportedExample*> usable;
    for (const auto& e : examples) {
        if (!e.context.empty()) usable.push_back(&e);
    }
    std::vector<RevisionTuple> out;
    for (std::size_t i = 0; i < usable.size(); ++i) {
        const auto& ex = *usable[i];
        TokenList context_tokens;
        for (const auto& c : ex.context) {
            auto t = tokenize(c);
            context_tokens.insert(context_tokens.end(), t.begin(), t.end());
        }
        std::optional<std::size_t> other;
        if (usable.size() >= 2) {
            auto pick = static_cast<std::size_t>(rng.below(usable.size() - 1));
            other = pick >= i ? pick + 1 : pick;
        }
        std::optional<std::size_t> most_unsupported;
        double lowest = 2.0;
        for (std::size_t c = 0; c < ex.corruptions.size(); ++c) {
            auto toks = tokenize(ex.corruptions[c]);
            if (toks.empty()) continue;
            const double p = greedy_precision(backend, toks, context_tokens);
            if (p < lowest) {
                lowest = p;
                most_unsupported = c;
            }
        }
        auto tuple = [&](std::string input, std::vector<std::string> context, std::string target, Polarity pol,
                         Provenance prov) {
            out.push_back({std::move(input), std::move(context), std::move(target), pol, prov, ex.sentence_index});
        };
        if (most_unsupported) {
            tuple(ex.corruptions[*most_unsupported], ex.context, ex.sentence, Polarity::Positive,
                  Provenance::RedressCorruption);
        }
        if (other) {
            tuple(usable[*other]->sentence, ex.context, ex.sentence, Polarity::Positive,
                  Provenance::RandomOtherAlignment);
        }
        if (most_unsupported) {
            std::vector<std::size_t> rest;
            for (std::size_t c = 0; c < ex.corruptions.size(); ++c) {
                if (c != *most_unsupported && !trim(ex.corruptions[c]).empty()) rest.push_back(c);
            }
            const std::size_t n =
                rest.empty() ? *most_unsupported : rest[static_cast<std::size_t>(rng.below(rest.size()))];
            tuple(ex.corruptions[*most_unsupported], ex.context, ex.corruptions[n], Polarity::Negative,
                  Provenance::RedressCorruption);
        }
        if (other) {
            tuple(ex.sentence, usable[*other]->context, ex.sentence, Polarity::Negative, Provenance::SelfNegative);
        }
    }
    return out;
}

int decile(double frac) {
    auto d = static_cast<int>(std::floor(frac * 10.0 + 1e-9));
    return std::clamp(d, 0, 9);
}

namespace {

double copied_fraction(const TokenList& of, const TokenList& from) {
    if (of.empty()) return 0.0;
    std::map<std::string, long> avail;
    for (const auto& t : from) ++avail[t];
    long shared = 0;
    for (const auto& t : of) {
        auto it = avail.find(t);
        if (it != avail.end() && it->second > 0) {
            --it->second;
            ++shared;
        }
    }
    return static_cast<double>(shared) / static_cast<double>(of.size());
}

}  // namespace

RevisionCodes revision_codes(const TokenList& r_out, const TokenList& r_in, const TokenList& context) {
    RevisionCodes c;
    c.input_frac = copied_fraction(r_out, r_in);
    c.source_frac = copied_fraction(r_out, context);
    c.input_decile = decile(c.input_frac);
    c.source_decile = decile(c.source_frac);
    return c;
}

RevisionCodes inference_codes(const TokenList& r_in, const TokenList& context, double source_frac) {
    if (!(source_frac >= 0.0 && source_frac <= 1.0)) throw ValidationError("source_frac must be in [0, 1]");
    RevisionCodes c;
    c.input_frac = copied_fraction(r_in, context);
    c.source_frac = source_frac;
    c.input_decile = decile(c.input_frac);
    c.source_decile = decile(c.source_frac);
    return c;
}

double contrastive_loss_value(const std::vector<double>& positive_probs, const std::vector<double>& negative_probs) {
    if (positive_probs.empty() && negative_probs.empty())
        throw ValidationError("contrastive loss: no positives or negatives");
    auto check = [](double p) {
        if (!(p > 0.0 && p < 1.0)) throw ValidationError("contrastive loss: probabilities must lie in (0, 1)");
    };
    double pos = 0.0, neg = 0.0;
    for (double p : positive_probs) check(p), pos += std::log(p);
    for (double p : negative_probs) check(p), neg += std::log1p(-p);
    double loss = 0.0;
    if (!positive_probs.empty()) loss -= pos / static_cast<double>(positive_probs.size());
    if (!negative_probs.empty()) loss -= neg / static_cast<double>(negative_probs.size());
    return loss;
}

json to_json(const RevisionTuple& t) {
    return json{{"sentence_index", t.sentence_index}, {"input", t.input},
                {"context", t.context},               {"target", t.target},
                {"polarity", to_string(t.polarity)},  {"provenance", to_string(t.provenance)}};
}

}  // namespace coursekit
