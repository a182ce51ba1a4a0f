#include "coursekit/entity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace coursekit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Synonym classification
// ---------------------------------------------------------------------------

double code_overlap(const EntityMention& x, const EntityMention& y) {
    if (x.codes.empty() || y.codes.empty()) return 0.0;
    std::set<std::string> cx(x.codes.begin(), x.codes.end()), cy(y.codes.begin(), y.codes.end());
    std::size_t shared = 0;
    for (const auto& c : cx) shared += cy.count(c);
    return static_cast<double>(shared) / static_cast<double>(cx.size() + cy.size());
}

namespace {

TokenList content_tokens(const std::string& text) {
    TokenList out;
    for (auto& t : tokenize(normalize_mention(text))) {
        if (t.size() == 1 && std::ispunct(static_cast<unsigned char>(t[0]))) continue;
        if (!is_stopword(t)) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TfidfIndex::TfidfIndex(const std::vector<std::string>& texts) : docs_(texts.size()) {
    for (const auto& text : texts) {
        auto toks = content_tokens(text);
        std::set<std::string> unique(toks.begin(), toks.end());
        for (const auto& t : unique) ++df_[t];
    }
}

double TfidfIndex::idf(const std::string& token) const {
    auto it = df_.find(token);
    const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(docs_)) / (1.0 + df)) + 1.0;
}

std::map<std::string, double> TfidfIndex::vector(const std::string& text) const {
    std::map<std::string, double> v;
    for (const auto& t : content_tokens(text)) v[t] += 1.0;
    for (auto& [t, w] : v) w *= idf(t);
    return v;
}

double TfidfIndex::cosine(const std::string& a, const std::string& b) const {
    auto va = vector(a), vb = vector(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [t, w] : va) {
        na += w * w;
        auto it = vb.find(t);
        if (it != vb.end()) dot += w * it->second;
    }
    for (const auto& [t, w] : vb) nb += w * w;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

SynonymScores synonym_scores(const EntityMention& x, const EntityMention& y, const SimilarityBackend& backend,
                             const TfidfIndex& tfidf) {
    SynonymScores s;
    s.coded = !x.codes.empty() && !y.codes.empty();
    s.code = code_overlap(x, y);
    s.embed = backend.mention_sim(x.text, y.text);
    s.tfidf = tfidf.cosine(x.text, y.text);
    s.agg = s.coded ? (s.code + s.embed + s.tfidf) / 3.0 : (s.embed + s.tfidf) / 2.0;
    return s;
}

bool classify_synonyms(const EntityMention& x, const EntityMention& y, const SimilarityBackend& backend,
                       const TfidfIndex& tfidf) {
    const auto s = synonym_scores(x, y, backend, tfidf);
    return (s.coded && s.code >= 0.4) || s.embed >= 0.75 || s.agg >= 0.4;
}

bool classify_synonyms_embedding_only(const EntityMention& x, const EntityMention& y,
                                      const SimilarityBackend& backend, double threshold) {
    if (normalize_mention(x.text) == normalize_mention(y.text)) return true;
    return backend.mention_sim(x.text, y.text) >= threshold;
}

SynonymPredicate feature_predicate(const SimilarityBackend& backend, const TfidfIndex& tfidf) {
    return [&backend, &tfidf](const EntityMention& x, const EntityMention& y) {
        return classify_synonyms(x, y, backend, tfidf);
    };
}

SynonymPredicate embedding_predicate(const SimilarityBackend& backend, double threshold) {
    return [&backend, threshold](const EntityMention& x, const EntityMention& y) {
        return classify_synonyms_embedding_only(x, y, backend, threshold);
    };
}

// ---------------------------------------------------------------------------
// ESGs
// ---------------------------------------------------------------------------

namespace {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

SemanticType majority_type(const std::vector<const EntityMention*>& members) {
    int counts[4] = {0, 0, 0, 0};
    for (const auto* m : members) ++counts[static_cast<int>(m->semantic_type)];
    int best = 0;
    for (int t = 1; t < 4; ++t) {
        if (counts[t] > counts[best]) best = t;
    }
    return static_cast<SemanticType>(best);
}

}  // namespace

std::vector<EntitySynonymGroup> build_esgs(const std::vector<EntityMention>& mentions,
                                           const SynonymPredicate& predicate) {
    std::vector<const EntityMention*> sorted;
    for (const auto& m : mentions) sorted.push_back(&m);
    std::sort(sorted.begin(), sorted.end(),
              [](const EntityMention* a, const EntityMention* b) { return a->mention_id < b->mention_id; });

    const std::size_t n = sorted.size();
    std::vector<std::string> normalized(n);
    for (std::size_t i = 0; i < n; ++i) normalized[i] = normalize_mention(sorted[i]->text);

    DisjointSets sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (sets.find(i) == sets.find(j)) continue;
            if (normalized[i] == normalized[j] || predicate(*sorted[i], *sorted[j])) sets.unite(i, j);
        }
    }

    std::vector<EntitySynonymGroup> groups;
    std::map<std::size_t, std::size_t> group_of_root;
    std::vector<std::vector<const EntityMention*>> members;
    for (std::size_t i = 0; i < n; ++i) {
        auto root = sets.find(i);
        auto [it, inserted] = group_of_root.emplace(root, groups.size());
        if (inserted) {
            groups.push_back({"esg-" + std::to_string(groups.size() + 1), {}, false, SemanticType::Other});
            members.emplace_back();
        }
        groups[it->second].members.push_back(sorted[i]->mention_id);
        members[it->second].push_back(sorted[i]);
    }
    for (std::size_t g = 0; g < groups.size(); ++g) groups[g].semantic_type = majority_type(members[g]);
    return groups;
}

EsgIndex::EsgIndex(std::vector<EntityMention> mentions, std::vector<EntitySynonymGroup> groups)
    : mentions_(std::move(mentions)), groups_(std::move(groups)) {
    for (std::size_t i = 0; i < mentions_.size(); ++i) mention_by_id_[mentions_[i].mention_id] = i;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (!group_by_id_.emplace(groups_[g].esg_id, g).second)
            throw ValidationError("esg_id: duplicate '" + groups_[g].esg_id + "'");
        for (const auto& m : groups_[g].members) {
            if (!mention_by_id_.contains(m))
                throw ValidationError("esg " + groups_[g].esg_id + ": unknown mention '" + m + "'");
            if (!group_by_mention_.emplace(m, g).second)
                throw ValidationError("esg " + groups_[g].esg_id + ": mention '" + m + "' in two groups");
        }
    }
}

const EntitySynonymGroup* EsgIndex::group(const std::string& esg_id) const {
    auto it = group_by_id_.find(esg_id);
    return it == group_by_id_.end() ? nullptr : &groups_[it->second];
}

const EntitySynonymGroup* EsgIndex::group_of(const std::string& mention_id) const {
    auto it = group_by_mention_.find(mention_id);
    return it == group_by_mention_.end() ? nullptr : &groups_[it->second];
}

const EntityMention* EsgIndex::mention(const std::string& mention_id) const {
    auto it = mention_by_id_.find(mention_id);
    return it == mention_by_id_.end() ? nullptr : &mentions_[it->second];
}

std::vector<const EntityMention*> EsgIndex::members(const EntitySynonymGroup& group) const {
    std::vector<const EntityMention*> out;
    for (const auto& id : group.members) out.push_back(mention(id));
    return out;
}

std::vector<std::string> EsgIndex::matching_groups(const EntityMention& m, const SynonymPredicate& predicate) const {
    std::vector<std::string> out;
    for (const auto& g : groups_) {
        for (const auto& id : g.members) {
            if (predicate(m, *mention(id))) {
                out.push_back(g.esg_id);
                break;
            }
        }
    }
    return out;
}

bool EsgIndex::has_synonym(const EntityMention& m, const SynonymPredicate& predicate) const {
    for (const auto& other : mentions_) {
        if (group_of(other.mention_id) && predicate(m, other)) return true;
    }
    return false;
}

std::vector<EntityMention> source_mentions(const AdmissionRecord& admission) {
    std::vector<EntityMention> out;
    for (const auto& m : admission.mentions) {
        if (m.doc.kind == DocKind::Note) out.push_back(m);
    }
    return out;
}

std::vector<EntityMention> mentions_in(const AdmissionRecord& admission, const DocRef& doc) {
    std::vector<EntityMention> out;
    for (const auto& m : admission.mentions) {
        if (m.doc == doc) out.push_back(m);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const EntityMention& a, const EntityMention& b) { return a.start < b.start; });
    return out;
}

EsgIndex build_source_index(const AdmissionRecord& admission, const SynonymPredicate& predicate) {
    auto mentions = source_mentions(admission);
    auto groups = build_esgs(mentions, predicate);
    return EsgIndex(std::move(mentions), std::move(groups));
}

double label_salience(std::vector<EntitySynonymGroup>& groups, const EsgIndex& index,
                      const std::vector<EntityMention>& reference_mentions, const SynonymPredicate& predicate) {
    if (groups.empty()) return 0.0;
    std::size_t salient = 0;
    for (auto& g : groups) {
        g.source_salient = false;
        for (const auto& id : g.members) {
            const EntityMention* m = index.mention(id);
            if (!m) throw NotFoundError("label_salience: unknown mention '" + id + "'");
            for (const auto& r : reference_mentions) {
                if (predicate(*m, r)) {
                    g.source_salient = true;
                    break;
                }
            }
            if (g.source_salient) break;
        }
        salient += g.source_salient;
    }
    return static_cast<double>(salient) / static_cast<double>(groups.size());
}

double label_salience(EsgIndex& index, const std::vector<EntityMention>& reference_mentions,
                      const SynonymPredicate& predicate) {
    return label_salience(index.mutable_groups(), index, reference_mentions, predicate);
}

std::set<std::string> aligned_esgs(const std::vector<EntityMention>& mentions, const EsgIndex& index,
                                   const SynonymPredicate& predicate) {
    std::set<std::string> out;
    for (const auto& m : mentions) {
        for (auto& id : index.matching_groups(m, predicate)) out.insert(std::move(id));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Support and overlap metrics
// ---------------------------------------------------------------------------

std::vector<EntityMention> mentions_within(const std::vector<EntityMention>& all, const DocRef& doc,
                                           std::size_t begin, std::size_t end) {
    std::vector<EntityMention> out;
    for (const auto& m : all) {
        if (m.doc == doc && m.start >= begin && m.end <= end) out.push_back(m);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const EntityMention& a, const EntityMention& b) { return a.start < b.start; });
    return out;
}

SupportVerdict support_verdict(const Sentence& reference_sentence, const std::vector<SourceSentence>& aligned,
                               const std::vector<EntityMention>& mentions, const SimilarityBackend& backend,
                               const SynonymPredicate& predicate, double precision_threshold) {
    SupportVerdict v;
    v.sentence_index = reference_sentence.index;
    std::vector<EntityMention> source;
    TokenList source_tokens;
    for (const auto& ss : aligned) {
        auto within = mentions_within(mentions, ss.sentence.doc, ss.sentence.begin, ss.sentence.end);
        source.insert(source.end(), within.begin(), within.end());
        source_tokens.insert(source_tokens.end(), ss.sentence.tokens.begin(), ss.sentence.tokens.end());
    }
    for (const auto& r :
         mentions_within(mentions, reference_sentence.doc, reference_sentence.begin, reference_sentence.end)) {
        bool found = std::any_of(source.begin(), source.end(),
                                 [&](const EntityMention& s) { return predicate(r, s); });
        if (!found) v.unsupported_mentions.push_back(r.mention_id);
    }
    v.soft_precision = reference_sentence.tokens.empty()
                           ? 0.0
                           : greedy_precision(backend, reference_sentence.tokens, source_tokens);
    v.supported = v.unsupported_mentions.empty() && v.soft_precision >= precision_threshold;
    return v;
}

std::optional<double> sgr(const std::set<std::string>& reference_aligned, const std::set<std::string>& model_aligned) {
    if (reference_aligned.empty()) return std::nullopt;
    std::size_t shared = 0;
    for (const auto& e : reference_aligned) shared += model_aligned.count(e);
    return static_cast<double>(shared) / static_cast<double>(reference_aligned.size());
}

RateResult hallucination_rate(const std::vector<EntityMention>& model_mentions, const EsgIndex& source_index,
                              const SynonymPredicate& predicate) {
    if (model_mentions.empty()) return {0.0, true};
    std::size_t unmatched = 0;
    for (const auto& m : model_mentions) unmatched += !source_index.has_synonym(m, predicate);
    return {static_cast<double>(unmatched) / static_cast<double>(model_mentions.size()), false};
}

RateResult faithful_adjusted_recall(const std::vector<EntityMention>& reference_mentions,
                                    const std::vector<EntityMention>& model_mentions, const EsgIndex& source_index,
                                    const SynonymPredicate& predicate) {
    std::size_t eligible = 0, recalled = 0;
    for (const auto& r : reference_mentions) {
        if (!source_index.has_synonym(r, predicate)) continue;
        ++eligible;
        recalled += std::any_of(model_mentions.begin(), model_mentions.end(),
                                [&](const EntityMention& m) { return predicate(r, m); });
    }
    if (eligible == 0) return {0.0, true};
    return {static_cast<double>(recalled) / static_cast<double>(eligible), false};
}

double entity_novelty(std::size_t reference_mentions, std::size_t supported) {
    if (reference_mentions == 0) throw ValidationError("entity_novelty: no reference mentions");
    if (supported > reference_mentions) throw ValidationError("entity_novelty: supported exceeds mention count");
    return static_cast<double>(reference_mentions - supported) / static_cast<double>(reference_mentions);
}

// ---------------------------------------------------------------------------
// Grid and transitions
// ---------------------------------------------------------------------------

EntityGrid entity_grid(const std::vector<std::vector<std::string>>& assignments) {
    EntityGrid out;
    std::set<std::string> ids;
    for (const auto& row : assignments) ids.insert(row.begin(), row.end());
    out.esg_ids.assign(ids.begin(), ids.end());
    std::map<std::string, Eigen::Index> col;
    for (std::size_t i = 0; i < out.esg_ids.size(); ++i) col[out.esg_ids[i]] = static_cast<Eigen::Index>(i);

    const auto rows = static_cast<Eigen::Index>(assignments.size());
    const auto cols = static_cast<Eigen::Index>(out.esg_ids.size());
    out.grid = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (const auto& id : assignments[static_cast<std::size_t>(r)]) out.grid(r, col[id]) = true;
    }
    if (cols == 0) {
        out.empty = true;
        return out;
    }
    std::size_t singletons = 0, multi = 0, adjacent = 0;
    for (Eigen::Index c = 0; c < cols; ++c) {
        const auto present = out.grid.col(c).count();
        if (present == 1) {
            ++singletons;
            continue;
        }
        ++multi;
        for (Eigen::Index r = 0; r + 1 < rows; ++r) {
            if (out.grid(r, c) && out.grid(r + 1, c)) {
                ++adjacent;
                break;
            }
        }
    }
    out.singleton_fraction = static_cast<double>(singletons) / static_cast<double>(cols);
    out.adjacent_fraction = multi ? static_cast<double>(adjacent) / static_cast<double>(multi) : 0.0;
    return out;
}

TransitionMatrix transition_matrix(const std::vector<SemanticType>& types_in_order) {
    auto slot = [](SemanticType t) -> int {
        switch (t) {
            case SemanticType::Problem: return 0;
            case SemanticType::Treatment: return 1;
            case SemanticType::Test: return 2;
            default: return -1;
        }
    };
    std::vector<int> seq;
    for (auto t : types_in_order) {
        if (int s = slot(t); s >= 0) seq.push_back(s);
    }
    TransitionMatrix out;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) out.counts(seq[i], seq[i + 1]) += 1.0;
    if (out.counts.sum() == 0.0) {
        out.empty = true;
        return out;
    }
    for (int r = 0; r < 3; ++r) {
        const double total = out.counts.row(r).sum();
        if (total > 0.0) out.probabilities.row(r) = out.counts.row(r) / total;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gazetteer
// ---------------------------------------------------------------------------

std::vector<GazetteerEntry> gazetteer_from(const std::vector<EntityMention>& mentions) {
    std::map<std::string, GazetteerEntry> unique;
    for (const auto& m : mentions) {
        auto key = normalize_mention(m.text);
        if (key.empty()) continue;
        unique.emplace(key, GazetteerEntry{key, m.semantic_type, m.codes});
    }
    std::vector<GazetteerEntry> out;
    for (auto& [k, e] : unique) out.push_back(std::move(e));
    return out;
}

std::vector<EntityMention> gazetteer_mentions(const std::string& text, const DocRef& doc,
                                              const std::vector<GazetteerEntry>& entries,
                                              const std::string& id_prefix) {
    const std::string lower = to_lower_ascii(text);
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    struct Hit {
        std::size_t start, length, entry;
    };
    std::vector<Hit> hits;
    for (std::size_t e = 0; e < entries.size(); ++e) {
        const std::string needle = to_lower_ascii(entries[e].text);
        if (needle.empty()) continue;
        for (auto pos = lower.find(needle); pos != std::string::npos; pos = lower.find(needle, pos + 1)) {
            const std::size_t end = pos + needle.size();
            if (pos > 0 && is_word(lower[pos - 1]) && is_word(needle.front())) continue;
            if (end < lower.size() && is_word(lower[end]) && is_word(needle.back())) continue;
            hits.push_back({pos, needle.size(), e});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.length != b.length) return a.length > b.length;
        if (a.start != b.start) return a.start < b.start;
        return a.entry < b.entry;
    });
    std::vector<Hit> kept;
    for (const auto& h : hits) {
        bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const Hit& k) {
            return h.start < k.start + k.length && k.start < h.start + h.length;
        });
        if (!overlaps) kept.push_back(h);
    }
    std::sort(kept.begin(), kept.end(), [](const Hit& a, const Hit& b) { return a.start < b.start; });
    std::vector<EntityMention> out;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& h = kept[i];
        EntityMention m;
        m.mention_id = id_prefix + std::to_string(i + 1);
        m.doc = doc;
        m.start = h.start;
        m.end = h.start + h.length;
        m.text = text.substr(h.start, h.length);
        m.semantic_type = entries[h.entry].semantic_type;
        m.codes = entries[h.entry].codes;
        out.push_back(std::move(m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sidecar
// ---------------------------------------------------------------------------

json esg_to_json(const std::string& admission_id, const EntitySynonymGroup& group, const EsgIndex& index) {
    json texts = json::array();
    std::set<std::string> seen;
    for (const auto* m : index.members(group)) {
        if (m && seen.insert(m->text).second) texts.push_back(m->text);
    }
    return json{{"admission_id", admission_id},
                {"esg_id", group.esg_id},
                {"members", group.members},
                {"source_salient", group.source_salient},
                {"semantic_type", std::string(to_string(group.semantic_type))},
                {"texts", texts}};
}

std::map<std::string, std::vector<EntitySynonymGroup>> parse_esg_file(std::string_view jsonl) {
    std::map<std::string, std::vector<EntitySynonymGroup>> out;
    std::size_t line_no = 0, pos = 0;
    while (pos < jsonl.size()) {
        std::size_t nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        auto line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        try {
            EntitySynonymGroup g;
            auto admission = j.at("admission_id").get<std::string>();
            g.esg_id = j.at("esg_id").get<std::string>();
            g.members = j.at("members").get<std::vector<std::string>>();
            if (g.members.empty()) throw ValidationError("members: must be non-empty");
            g.source_salient = j.value("source_salient", false);
            g.semantic_type = parse_semantic_type(j.value("semantic_type", std::string("OTHER")));
            out[admission].push_back(std::move(g));
        } catch (const json::exception& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": esg record: " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace coursekit
