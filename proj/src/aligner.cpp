#include "coursekit/aligner.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "coursekit/lexical.hpp"

namespace coursekit {

using nlohmann::json;

AlignmentMethod AlignmentMethod::parse(const std::string& text) {
    AlignmentMethod m;
    std::string name = text;
    std::string arg;
    if (auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        arg = text.substr(colon + 1);
    }
    auto parse_arg = [&](int& slot, const char* what) {
        if (arg.empty()) return;
        try {
            std::size_t used = 0;
            slot = std::stoi(arg, &used);
            if (used != arg.size()) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
            throw ValidationError(std::string("alignment method: bad ") + what + " '" + arg + "'");
        }
        if (slot < 1) throw ValidationError(std::string("alignment method: ") + what + " must be >= 1");
    };
    if (name == "rouge-gain") m.kind = AlignKind::RougeGain;
    else if (name == "bs-gain") m.kind = AlignKind::BsGain;
    else if (name == "rouge-topk") m.kind = AlignKind::RougeTopK, parse_arg(m.k, "k");
    else if (name == "bs-topk") m.kind = AlignKind::BsTopK, parse_arg(m.k, "k");
    else if (name == "top-section") m.kind = AlignKind::TopSection;
    else if (name == "entity-chain") m.kind = AlignKind::EntityChain;
    else if (name == "full") m.kind = AlignKind::Full, parse_arg(m.token_budget, "token budget");
    else throw ValidationError("alignment method: unknown '" + text + "'");
    if (!arg.empty() && m.kind != AlignKind::RougeTopK && m.kind != AlignKind::BsTopK && m.kind != AlignKind::Full)
        throw ValidationError("alignment method: '" + name + "' takes no argument");
    return m;
}

std::string AlignmentMethod::name() const {
    switch (kind) {
        case AlignKind::RougeGain: return "rouge-gain";
        case AlignKind::BsGain: return "bs-gain";
        case AlignKind::RougeTopK: return "rouge-topk:" + std::to_string(k);
        case AlignKind::BsTopK: return "bs-topk:" + std::to_string(k);
        case AlignKind::TopSection: return "top-section";
        case AlignKind::EntityChain: return "entity-chain";
        case AlignKind::Full: return "full:" + std::to_string(token_budget);
    }
    return {};
}

bool AlignmentResult::contains(std::size_t position) const {
    return std::any_of(aligned.begin(), aligned.end(),
                       [&](const AlignedSentence& a) { return a.position == position; });
}

namespace {

AlignedSentence aligned_entry(const SourceSentence& s, double score) {
    return {s.sentence.doc.id, s.sentence.index, s.position, score};
}

}  // namespace

Eigen::MatrixXd align_matrix(const TokenList& reference, const std::vector<SourceSentence>& source,
                             const SimilarityBackend& backend) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(reference.size()),
                                              static_cast<Eigen::Index>(source.size()));
    for (std::size_t s = 0; s < source.size(); ++s) {
        std::set<std::string> vocab(source[s].sentence.tokens.begin(), source[s].sentence.tokens.end());
        for (std::size_t k = 0; k < reference.size(); ++k) {
            double best = 0.0;
            for (const auto& tok : vocab) {
                best = std::max(best, backend.token_sim(reference[k], tok));
                if (best >= 1.0) break;
            }
            a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) = best;
        }
    }
    return a;
}

AlignmentResult greedy_weighted_align(const Sentence& reference_sentence, const std::vector<SourceSentence>& source,
                                      const SimilarityBackend& backend, int max_steps, double avg_thresh,
                                      double max_thresh) {
    if (reference_sentence.tokens.empty()) throw ValidationError("greedy_weighted_align: empty reference sentence");
    if (source.empty()) throw ValidationError("greedy_weighted_align: empty source");
    if (max_steps < 1) throw ValidationError("greedy_weighted_align: max_steps must be >= 1");

    AlignmentResult result;
    result.summary_sentence_index = reference_sentence.index;
    result.method.kind = AlignKind::BsGain;

    const Eigen::MatrixXd a = align_matrix(reference_sentence.tokens, source, backend);
    const auto K = a.rows();
    Eigen::VectorXd w = Eigen::VectorXd::Ones(K);
    result.weights.push_back(w);

    // Visit candidates in position order so strict '>' keeps the lowest position.
    std::vector<std::size_t> order(source.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return source[x].position < source[y].position; });

    std::vector<bool> used(source.size(), false);
    struct Step {
        std::size_t index;
        double score;
        Eigen::VectorXd improvement;
    };
    std::vector<Step> steps;
    for (int t = 0; t < max_steps; ++t) {
        const double total = w.sum();
        if (total <= 0.0) break;
        std::size_t best = source.size();
        double best_score = -1.0;
        for (std::size_t s : order) {
            if (used[s]) continue;
            const double score = w.dot(a.col(static_cast<Eigen::Index>(s))) / total;
            if (score > best_score) {
                best_score = score;
                best = s;
            }
        }
        if (best == source.size()) break;
        used[best] = true;
        Eigen::VectorXd next = w.cwiseMin(Eigen::VectorXd::Ones(K) - a.col(static_cast<Eigen::Index>(best)));
        next = next.cwiseMax(0.0);
        steps.push_back({best, best_score, w - next});
        w = next;
        result.weights.push_back(w);
    }
    for (const auto& step : steps) {
        const double mean = step.improvement.mean();
        const double max = step.improvement.maxCoeff();
        if (mean >= avg_thresh || max >= max_thresh) result.aligned.push_back(aligned_entry(source[step.index], step.score));
    }
    return result;
}

AlignmentResult augment_for_entities(AlignmentResult result, const std::vector<EntityMention>& reference_mentions,
                                     const std::vector<SourceSentence>& source, const EsgIndex& index,
                                     const SynonymPredicate& predicate, const SimilarityBackend& backend) {
    // Source sentence holding each indexed mention.
    std::map<std::string, std::size_t> sentence_of;
    for (std::size_t s = 0; s < source.size(); ++s) {
        const auto& sent = source[s].sentence;
        for (const auto& m : mentions_within(index.mentions(), sent.doc, sent.begin, sent.end))
            sentence_of[m.mention_id] = s;
    }
    auto covered_groups = [&] {
        std::set<std::string> covered;
        for (const auto& [mention_id, s] : sentence_of) {
            if (!result.contains(source[s].position)) continue;
            if (const auto* g = index.group_of(mention_id)) covered.insert(g->esg_id);
        }
        return covered;
    };
    for (const auto& ref : reference_mentions) {
        auto groups = index.matching_groups(ref, predicate);
        if (groups.empty()) {
            result.skipped_mentions.push_back(ref.mention_id);
            continue;
        }
        const auto covered = covered_groups();
        if (std::any_of(groups.begin(), groups.end(), [&](const std::string& g) { return covered.contains(g); }))
            continue;
        std::size_t best_sentence = source.size();
        double best_sim = -1.0;
        for (const auto& gid : groups) {
            for (const auto* m : index.members(*index.group(gid))) {
                auto it = sentence_of.find(m->mention_id);
                if (it == sentence_of.end()) continue;
                const double sim = backend.mention_sim(ref.text, m->text);
                const bool better = sim > best_sim ||
                                    (sim == best_sim && source[it->second].position < source[best_sentence].position);
                if (better) {
                    best_sim = sim;
                    best_sentence = it->second;
                }
            }
        }
        if (best_sentence == source.size()) {
            result.skipped_mentions.push_back(ref.mention_id);
            continue;
        }
        result.aligned.push_back(aligned_entry(source[best_sentence], best_sim));
    }
    return result;
}

namespace {

double soft_f1(const SimilarityBackend& backend, const TokenList& a, const TokenList& b) {
    if (a.empty() || b.empty()) return 0.0;
    const double p = greedy_precision(backend, a, b);
    const double r = greedy_precision(backend, b, a);
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

std::vector<AlignedSentence> top_k(const std::vector<SourceSentence>& source, const std::vector<double>& scores,
                                   int k) {
    std::vector<std::size_t> order(source.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (scores[x] != scores[y]) return scores[x] > scores[y];
        return source[x].position < source[y].position;
    });
    order.resize(std::min(order.size(), static_cast<std::size_t>(k)));
    std::vector<AlignedSentence> out;
    for (auto i : order) out.push_back(aligned_entry(source[i], scores[i]));
    return out;
}

}  // namespace

AlignmentResult align(const AlignmentMethod& method, const Sentence& summary_sentence, const AlignInputs& in) {
    if (!in.source || !in.backend) throw ValidationError("align: source and backend are required");
    const auto& source = *in.source;
    const TokenList& target = summary_sentence.tokens;

    AlignmentResult result;
    result.summary_sentence_index = summary_sentence.index;
    result.method = method;
    if (source.empty() || target.empty()) return result;

    switch (method.kind) {
        case AlignKind::RougeTopK:
        case AlignKind::BsTopK: {
            if (method.k < 1) throw ValidationError("align: k must be >= 1");
            std::vector<double> scores;
            for (const auto& s : source) {
                scores.push_back(method.kind == AlignKind::RougeTopK ? rouge_12l(s.sentence.tokens, target)
                                                                     : soft_f1(*in.backend, target, s.sentence.tokens));
            }
            result.aligned = top_k(source, scores, method.k);
            break;
        }
        case AlignKind::RougeGain: {
            NgramBag target_bag(2);
            target_bag.add(target);
            NgramBag chosen(2);
            std::vector<bool> used(source.size(), false);
            double current = 0.0;
            while (true) {
                std::size_t best = source.size();
                double best_gain = 0.0;
                for (std::size_t s = 0; s < source.size(); ++s) {
                    if (used[s]) continue;
                    NgramBag trial = chosen;
                    trial.add(source[s].sentence.tokens);
                    const double gain = r12(trial, target_bag) - current;
                    if (gain > best_gain ||
                        (best != source.size() && gain == best_gain && source[s].position < source[best].position)) {
                        best_gain = gain;
                        best = s;
                    }
                }
                if (best == source.size() || best_gain <= 0.0) break;
                used[best] = true;
                chosen.add(source[best].sentence.tokens);
                current = r12(chosen, target_bag);
                result.aligned.push_back(aligned_entry(source[best], best_gain));
            }
            break;
        }
        case AlignKind::BsGain: {
            auto weighted = greedy_weighted_align(summary_sentence, source, *in.backend);
            result.aligned = std::move(weighted.aligned);
            result.weights = std::move(weighted.weights);
            break;
        }
        case AlignKind::EntityChain: {
            if (!in.esg || !in.predicate || !in.admission)
                throw ValidationError("align: entity-chain needs an admission, ESG index and predicate");
            std::set<std::string> wanted;
            for (const auto& m : mentions_within(in.admission->mentions, summary_sentence.doc, summary_sentence.begin,
                                                 summary_sentence.end)) {
                for (auto& g : in.esg->matching_groups(m, *in.predicate)) wanted.insert(std::move(g));
            }
            if (wanted.empty()) break;
            for (const auto& s : source) {
                for (const auto& m :
                     mentions_within(in.esg->mentions(), s.sentence.doc, s.sentence.begin, s.sentence.end)) {
                    const auto* g = in.esg->group_of(m.mention_id);
                    if (g && wanted.contains(g->esg_id)) {
                        result.aligned.push_back(aligned_entry(s, 1.0));
                        break;
                    }
                }
            }
            break;
        }
        case AlignKind::TopSection: {
            std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> sections;
            for (std::size_t s = 0; s < source.size(); ++s)
                sections[{source[s].note_ordinal, source[s].section}].push_back(s);
            double best_score = -1.0;
            const std::vector<std::size_t>* best = nullptr;
            for (const auto& [key, members] : sections) {
                TokenList tokens;
                for (auto s : members)
                    tokens.insert(tokens.end(), source[s].sentence.tokens.begin(), source[s].sentence.tokens.end());
                const double score = rouge_12l(tokens, target);
                if (score > best_score) {
                    best_score = score;
                    best = &members;
                }
            }
            for (auto s : *best) result.aligned.push_back(aligned_entry(source[s], best_score));
            break;
        }
        case AlignKind::Full: {
            if (method.token_budget < 1) throw ValidationError("align: token budget must be >= 1");
            std::vector<double> scores;
            for (const auto& s : source) scores.push_back(r12(s.sentence.tokens, target));
            auto ranked = top_k(source, scores, static_cast<int>(source.size()));
            std::size_t used = 0;
            std::map<std::size_t, std::size_t> length_of;
            for (const auto& s : source) length_of[s.position] = s.sentence.tokens.size();
            for (const auto& a : ranked) {
                const auto len = length_of[a.position];
                if (used + len > static_cast<std::size_t>(method.token_budget)) break;
                used += len;
                result.aligned.push_back(a);
            }
            break;
        }
    }
    return result;
}

json to_json(const AlignmentResult& result) {
    json aligned = json::array();
    for (const auto& a : result.aligned)
        aligned.push_back({{"note_id", a.note_id}, {"sentence_index", a.sentence_index}, {"position", a.position},
                           {"score", a.score}});
    json j{{"summary_sentence_index", result.summary_sentence_index},
           {"method", result.method.name()},
           {"aligned", aligned}};
    if (!result.weights.empty()) {
        json weights = json::array();
        for (const auto& w : result.weights) weights.push_back(std::vector<double>(w.data(), w.data() + w.size()));
        j["weights"] = weights;
    }
    if (!result.skipped_mentions.empty()) j["skipped_mentions"] = result.skipped_mentions;
    return j;
}

}  // namespace coursekit
