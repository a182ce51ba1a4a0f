#include "coursekit/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "coursekit/corpus.hpp"

namespace coursekit {

VectorStore::VectorStore(int dim) : dim_(dim) {
    if (dim < 1) throw ValidationError("vector store: dim must be >= 1");
}

void VectorStore::add(const std::string& key, Eigen::VectorXd vector) {
    if (vector.size() != dim_)
        throw ValidationError("vector store: key '" + key + "' has length " + std::to_string(vector.size()) +
                              ", expected " + std::to_string(dim_));
    if (!entries_.emplace(key, std::move(vector)).second)
        throw ValidationError("vector store: duplicate key '" + key + "'");
}

const Eigen::VectorXd* VectorStore::find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

VectorStore VectorStore::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::optional<VectorStore> store;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!store) {
            std::istringstream hs(line);
            std::string word;
            int dim = 0;
            if (!(hs >> word >> dim) || word != "dim" || dim < 1)
                throw ParseError("vector sidecar: expected 'dim <N>' header", line_no);
            store.emplace(dim);
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("vector sidecar: expected key<TAB>values", line_no);
        std::string key = line.substr(0, tab);
        std::istringstream vs(line.substr(tab + 1));
        std::vector<double> values;
        double v;
        while (vs >> v) values.push_back(v);
        if (!vs.eof()) throw ParseError("vector sidecar: non-numeric value", line_no);
        if (static_cast<int>(values.size()) != store->dim())
            throw ParseError("vector sidecar: key '" + key + "' has " + std::to_string(values.size()) +
                                 " values, expected " + std::to_string(store->dim()),
                             line_no);
        try {
            store->add(key, Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!store) throw ParseError("vector sidecar: missing 'dim <N>' header", line_no ? line_no : 1);
    return std::move(*store);
}

VectorStore VectorStore::load(const std::string& path) { return parse(read_file(path)); }

double clamped_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(a.dot(b) / (na * nb), 0.0, 1.0);
}

SimilarityBackend SimilarityBackend::exact() { return SimilarityBackend{}; }

SimilarityBackend SimilarityBackend::vectors(std::shared_ptr<const VectorStore> store, double default_score) {
    if (!store) throw ValidationError("vector backend: store is null");
    SimilarityBackend b;
    b.kind_ = Kind::Vector;
    b.store_ = std::move(store);
    b.default_score_ = default_score;
    return b;
}

SimilarityBackend SimilarityBackend::from_spec(const std::string& spec) {
    if (spec == "exact") return exact();
    if (spec.starts_with("vectors:")) {
        auto path = spec.substr(8);
        auto b = vectors(std::make_shared<VectorStore>(VectorStore::load(path)));
        b.source_ = path;
        return b;
    }
    throw ValidationError("--backend: expected 'exact' or 'vectors:<path>', got '" + spec + "'");
}

std::string SimilarityBackend::describe() const {
    return kind_ == Kind::Exact ? "exact" : "vectors:" + source_;
}

double SimilarityBackend::token_sim(const std::string& a, const std::string& b) const {
    if (kind_ == Kind::Exact) return a == b ? 1.0 : 0.0;
    const auto* va = store_->find(a);
    const auto* vb = store_->find(b);
    if (va && vb) return clamped_cosine(*va, *vb);
    // Missing keys: identical strings still match, anything else gets the default.
    return a == b ? 1.0 : default_score_;
}

std::optional<Eigen::VectorXd> SimilarityBackend::mention_vector(const std::string& normalized) const {
    if (const auto* v = store_->find(normalized)) return *v;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(store_->dim());
    int found = 0;
    for (const auto& tok : tokenize(normalized)) {
        if (is_stopword(tok)) continue;
        if (const auto* v = store_->find(tok)) {
            sum += *v;
            ++found;
        }
    }
    if (!found) return std::nullopt;
    return sum / found;
}

double SimilarityBackend::mention_sim(const std::string& a, const std::string& b) const {
    const std::string na = normalize_mention(a), nb = normalize_mention(b);
    if (na == nb) return 1.0;
    if (kind_ == Kind::Exact) return 0.0;
    auto va = mention_vector(na);
    auto vb = mention_vector(nb);
    if (va && vb) return clamped_cosine(*va, *vb);
    return default_score_;
}

double greedy_precision(const SimilarityBackend& backend, const TokenList& hyp, const TokenList& refs) {
    if (hyp.empty()) throw ValidationError("greedy_precision: empty hypothesis");
    if (refs.empty()) return 0.0;
    // Deduplicate references: the max is unaffected and lookups drop.
    std::set<std::string> unique_refs(refs.begin(), refs.end());
    double sum = 0.0;
    for (const auto& h : hyp) {
        double best = 0.0;
        for (const auto& r : unique_refs) {
            best = std::max(best, backend.token_sim(h, r));
            if (best >= 1.0) break;
        }
        sum += best;
    }
    return sum / static_cast<double>(hyp.size());
}

std::string normalize_mention(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    }
    while (!out.empty() && (std::ispunct(static_cast<unsigned char>(out.back())) || out.back() == ' '))
        out.pop_back();
    return out;
}

const std::vector<std::string>& default_stopwords() {
    static const std::vector<std::string> words = {
        "a",    "an",    "and",  "are",  "as",   "at",   "be",    "been", "but",   "by",   "for",
        "from", "had",   "has",  "have", "he",   "her",  "his",   "in",   "is",    "it",   "its",
        "of",   "on",    "or",   "she",  "that", "the",  "their", "then", "there", "they", "this",
        "to",   "was",   "were", "which", "while", "with", "without", "w", "pt",   "patient"};
    return words;
}

bool is_stopword(const std::string& token) {
    static const std::set<std::string> words(default_stopwords().begin(), default_stopwords().end());
    return words.contains(token);
}

}  // namespace coursekit
