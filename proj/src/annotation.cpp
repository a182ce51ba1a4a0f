#include "coursekit/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>

#include "coursekit/calibration.hpp"
#include "httplib.h"

namespace coursekit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Summary elements and labels
// ---------------------------------------------------------------------------

std::vector<SummaryElement> parse_se_inventory(std::string_view jsonl) {
    std::vector<SummaryElement> out;
    std::size_t pos = 0, line_no = 0;
    while (pos < jsonl.size()) {
        auto nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        auto line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            SummaryElement se;
            se.admission_id = j.at("admission_id").get<std::string>();
            se.se_id = j.at("se_id").get<std::string>();
            se.sentence_index = j.at("sentence_index").get<int>();
            se.start = j.at("start").get<std::size_t>();
            se.end = j.at("end").get<std::size_t>();
            se.text = j.at("text").get<std::string>();
            if (se.start >= se.end) throw ValidationError("empty span for " + se.se_id);
            out.push_back(std::move(se));
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        } catch (const json::exception& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

ErrorCategory parse_error_category(const std::string& text) {
    if (text == "NO_ERROR") return ErrorCategory::NoError;
    if (text == "NOT_IN_NOTES") return ErrorCategory::NotInNotes;
    if (text == "INCORRECT") return ErrorCategory::Incorrect;
    if (text == "MISSING") return ErrorCategory::Missing;
    throw ValidationError("category: expected NO_ERROR, NOT_IN_NOTES, INCORRECT or MISSING, got '" + text + "'");
}

Severity parse_severity(const std::string& text) {
    if (text == "NONE") return Severity::None;
    if (text == "MINOR") return Severity::Minor;
    if (text == "CRITICAL") return Severity::Critical;
    throw ValidationError("severity: expected NONE, MINOR or CRITICAL, got '" + text + "'");
}

std::string to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::NoError: return "NO_ERROR";
        case ErrorCategory::NotInNotes: return "NOT_IN_NOTES";
        case ErrorCategory::Incorrect: return "INCORRECT";
        case ErrorCategory::Missing: return "MISSING";
    }
    return {};
}

std::string to_string(Severity s) {
    switch (s) {
        case Severity::None: return "NONE";
        case Severity::Minor: return "MINOR";
        case Severity::Critical: return "CRITICAL";
    }
    return {};
}

void validate_label(ErrorCategory category, Severity severity) {
    const bool graded = category == ErrorCategory::Incorrect || category == ErrorCategory::Missing;
    if (graded && severity == Severity::None)
        throw ValidationError("label rule: " + to_string(category) + " requires severity MINOR or CRITICAL");
    if (!graded && severity != Severity::None)
        throw ValidationError("label rule: severity must be NONE for " + to_string(category));
}

json to_json(const SeLabel& l) {
    return {{"admission_id", l.admission_id},   {"se_id", l.se_id},         {"category", to_string(l.category)},
            {"severity", to_string(l.severity)}, {"annotator_id", l.annotator_id}, {"timestamp", l.timestamp},
            {"seq", l.seq}};
}

SeLabel label_from_json(const json& j) {
    SeLabel l;
    try {
        l.admission_id = j.at("admission_id").get<std::string>();
        l.se_id = j.at("se_id").get<std::string>();
        l.category = parse_error_category(j.at("category").get<std::string>());
        l.severity = parse_severity(j.value("severity", std::string("NONE")));
        l.annotator_id = j.at("annotator_id").get<std::string>();
        l.timestamp = j.value("timestamp", std::string());
        l.seq = j.value("seq", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("label: ") + e.what());
    }
    validate_label(l.category, l.severity);
    return l;
}

LabelStore::LabelStore(std::string path) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    const std::string log = read_file(path_);
    std::size_t pos = 0, line_no = 0;
    while (pos < log.size()) {
        auto nl = log.find('\n', pos);
        if (nl == std::string::npos) nl = log.size();
        const std::string line = log.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            apply(label_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw ParseError(path_ + ": " + e.what(), line_no);
        }
    }
}

void LabelStore::apply(SeLabel label) {
    if (label.seq == 0) label.seq = next_seq_;
    next_seq_ = std::max(next_seq_, label.seq + 1);
    auto key = std::make_tuple(label.admission_id, label.se_id, label.annotator_id);
    auto it = live_.find(key);
    if (it == live_.end() || it->second.seq < label.seq) live_[key] = std::move(label);
}

SeLabel LabelStore::append(SeLabel label) {
    validate_label(label.category, label.severity);
    label.seq = next_seq_;
    if (!path_.empty()) {
        std::filesystem::path p(path_);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        if (!out) throw IoError("cannot append to label log " + path_);
        out << to_json(label).dump() << '\n';
        out.flush();
        if (!out) throw IoError("write failed for label log " + path_);
    }
    apply(label);
    return label;
}

std::vector<SeLabel> LabelStore::resolved(const std::string& admission_id) const {
    std::vector<SeLabel> out;
    for (const auto& [key, label] : live_) {
        if (std::get<0>(key) == admission_id) out.push_back(label);
    }
    return out;
}

std::vector<SeLabel> LabelStore::resolved_all() const {
    std::vector<SeLabel> out;
    for (const auto& [key, label] : live_) out.push_back(label);
    return out;
}

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        auto slash = path.find('/', pos);
        if (slash == std::string::npos) slash = path.size();
        if (slash > pos) parts.push_back(path.substr(pos, slash - pos));
        pos = slash + 1;
    }
    return parts;
}

json error_body(const std::string& kind, const std::string& message) {
    return {{"error", kind}, {"message", message}};
}

}  // namespace

std::string annotated_summary(const AdmissionRecord& admission) {
    if (!admission.generated.empty()) return admission.generated.begin()->second;
    return admission.reference;
}

AnnotationService::AnnotationService(Corpus corpus, std::vector<SummaryElement> inventory, ServiceConfig config)
    : corpus_(std::move(corpus)),
      inventory_(std::move(inventory)),
      clock_(config.clock ? std::move(config.clock) : utc_now),
      store_(config.labels_path) {
    for (std::size_t i = 0; i < corpus_.size(); ++i) by_id_[corpus_[i].admission_id] = i;

    std::set<std::pair<std::string, std::string>> ids;
    std::map<std::pair<std::string, int>, std::vector<const SummaryElement*>> per_sentence;
    for (const auto& se : inventory_) {
        const auto& a = admission(se.admission_id);
        if (!ids.insert({se.admission_id, se.se_id}).second)
            throw ValidationError("SE inventory: duplicate se_id '" + se.se_id + "'");
        const auto sentences = summary_sentences(a);
        if (se.sentence_index < 0 || static_cast<std::size_t>(se.sentence_index) >= sentences.size())
            throw ValidationError("SE inventory: " + se.se_id + " sentence index out of range");
        const auto& text = sentences[static_cast<std::size_t>(se.sentence_index)].text;
        if (se.end > text.size() || text.compare(se.start, se.end - se.start, se.text) != 0)
            throw ValidationError("SE inventory: " + se.se_id + " span does not match sentence text");
        per_sentence[{se.admission_id, se.sentence_index}].push_back(&se);
    }
    for (auto& [key, ses] : per_sentence) {
        std::sort(ses.begin(), ses.end(), [](auto* a, auto* b) { return a->start < b->start; });
        for (std::size_t i = 1; i < ses.size(); ++i) {
            if (ses[i]->start < ses[i - 1]->end)
                throw ValidationError("SE inventory: " + ses[i - 1]->se_id + " overlaps " + ses[i]->se_id);
        }
    }

    const auto backend = SimilarityBackend::exact();
    for (const auto& a : corpus_) {
        if (auto it = config.esgs.find(a.admission_id); it != config.esgs.end()) {
            esg_.emplace(a.admission_id, EsgIndex(source_mentions(a), it->second));
        } else {
            esg_.emplace(a.admission_id, build_source_index(a, embedding_predicate(backend)));
        }
    }
}

const AdmissionRecord& AnnotationService::admission(const std::string& admission_id) const {
    auto it = by_id_.find(admission_id);
    if (it == by_id_.end()) throw NotFoundError("unknown admission '" + admission_id + "'");
    return corpus_[it->second];
}

const EsgIndex& AnnotationService::esg_index(const std::string& admission_id) const {
    admission(admission_id);
    return esg_.at(admission_id);
}

std::vector<Sentence> AnnotationService::summary_sentences(const AdmissionRecord& a) const {
    return split_sentences(annotated_summary(a), a.generated.empty() ? DocRef::reference()
                                                                     : DocRef::generated(a.generated.begin()->first));
}

json AnnotationService::admissions() const {
    json out = json::array();
    for (const auto& a : corpus_) {
        out.push_back({{"admission_id", a.admission_id}, {"notes", a.notes.size()}});
    }
    return out;
}

json AnnotationService::notes(const std::string& admission_id) const {
    const auto& a = admission(admission_id);
    json out = json::array();
    for (const auto& note : a.notes) {
        const auto ranges = note.section_body_ranges();
        json sections = json::array();
        for (std::size_t s = 0; s < note.sections.size(); ++s) {
            sections.push_back({{"header", note.sections[s].header},
                                {"start", ranges[s].first},
                                {"end", ranges[s].second}});
        }
        out.push_back({{"note_id", note.note_id},
                       {"title", note.title},
                       {"timestamp", note.timestamp.iso()},
                       {"header", format_note_header(note)},
                       {"sections", sections},
                       {"text", note.text()}});
    }
    return out;
}

json AnnotationService::summary(const std::string& admission_id) const {
    const auto& a = admission(admission_id);
    const auto sentences = summary_sentences(a);
    json lines = json::array();
    for (const auto& s : sentences) {
        json elements = json::array();
        for (const auto& se : inventory_) {
            if (se.admission_id == admission_id && se.sentence_index == s.index) {
                elements.push_back({{"se_id", se.se_id}, {"start", se.start}, {"end", se.end}, {"text", se.text}});
            }
        }
        std::sort(elements.begin(), elements.end(),
                  [](const json& x, const json& y) { return x["start"].get<std::size_t>() < y["start"].get<std::size_t>(); });
        lines.push_back({{"index", s.index}, {"text", s.text}, {"elements", elements}});
    }
    return {{"admission_id", admission_id},
            {"system", a.generated.empty() ? "REFERENCE" : a.generated.begin()->first},
            {"sentences", lines}};
}

json AnnotationService::search(const std::string& admission_id, const std::string& query) const {
    const auto& a = admission(admission_id);
    if (trim(query).empty()) throw ValidationError("search: query must not be empty");
    const std::string needle = to_lower_ascii(query);
    json hits = json::array();
    for (const auto& note : a.notes) {
        const std::string text = note.text();
        const std::string hay = to_lower_ascii(text);
        const auto ranges = note.section_body_ranges();
        for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) {
            std::size_t section = 0;
            for (std::size_t s = 0; s < ranges.size(); ++s) {
                const std::size_t header_begin = ranges[s].first - note.sections[s].header.size() - 1;
                if (pos >= header_begin) section = s;
            }
            const std::size_t ctx_begin = pos > 40 ? pos - 40 : 0;
            hits.push_back({{"note_id", note.note_id},
                            {"timestamp", note.timestamp.iso()},
                            {"section", note.sections.empty() ? "" : note.sections[section].header},
                            {"start", pos},
                            {"end", pos + needle.size()},
                            {"snippet", text.substr(pos, needle.size())},
                            {"context", text.substr(ctx_begin, pos + needle.size() + 40 - ctx_begin)}});
        }
    }
    return hits;
}

json AnnotationService::concept_mentions(const std::string& admission_id, const std::string& esg_id) const {
    const auto& a = admission(admission_id);
    const auto& index = esg_index(admission_id);
    const auto* group = index.group(esg_id);
    if (!group) throw NotFoundError("unknown ESG '" + esg_id + "' in admission " + admission_id);
    std::map<std::string, std::size_t> ordinal;
    for (std::size_t i = 0; i < a.notes.size(); ++i) ordinal[a.notes[i].note_id] = i;
    auto members = index.members(*group);
    std::erase_if(members, [](const EntityMention* m) { return m->doc.kind != DocKind::Note; });
    std::sort(members.begin(), members.end(), [&](const EntityMention* x, const EntityMention* y) {
        const auto ox = ordinal.at(x->doc.id), oy = ordinal.at(y->doc.id);
        return ox != oy ? ox < oy : x->start < y->start;
    });
    json out = json::array();
    for (const auto* m : members) {
        const auto& note = a.notes[ordinal.at(m->doc.id)];
        out.push_back({{"mention_id", m->mention_id},
                       {"note_id", note.note_id},
                       {"timestamp", note.timestamp.iso()},
                       {"start", m->start},
                       {"end", m->end},
                       {"text", m->text}});
    }
    return out;
}

json AnnotationService::post_label(const std::string& admission_id, const std::string& annotator_id,
                                   const json& body) {
    admission(admission_id);
    if (trim(annotator_id).empty()) throw ValidationError("labels: X-Annotator-Id header is required");
    if (!body.is_object()) throw ValidationError("labels: body must be a JSON object");
    SeLabel label;
    label.admission_id = admission_id;
    label.annotator_id = annotator_id;
    try {
        label.se_id = body.at("se_id").get<std::string>();
        label.category = parse_error_category(body.at("category").get<std::string>());
        label.severity = parse_severity(body.value("severity", std::string("NONE")));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("labels: ") + e.what());
    }
    validate_label(label.category, label.severity);
    const bool known = std::any_of(inventory_.begin(), inventory_.end(), [&](const SummaryElement& se) {
        return se.admission_id == admission_id && se.se_id == label.se_id;
    });
    if (!known) throw NotFoundError("unknown summary element '" + label.se_id + "'");
    std::unique_lock lock(mutex_);
    label.timestamp = clock_();
    return to_json(store_.append(std::move(label)));
}

json AnnotationService::labels(const std::string& admission_id) const {
    admission(admission_id);
    std::shared_lock lock(mutex_);
    json out = json::array();
    for (const auto& l : store_.resolved(admission_id)) out.push_back(to_json(l));
    return out;
}

json AnnotationService::herr_report() const {
    std::shared_lock lock(mutex_);
    // Most recent live label per SE across annotators.
    std::map<std::pair<std::string, std::string>, SeLabel> latest;
    for (const auto& l : store_.resolved_all()) {
        auto key = std::make_pair(l.admission_id, l.se_id);
        auto it = latest.find(key);
        if (it == latest.end() || it->second.seq < l.seq) latest[key] = l;
    }
    std::map<std::string, std::size_t> categories{
        {"NO_ERROR", 0}, {"NOT_IN_NOTES", 0}, {"INCORRECT", 0}, {"MISSING", 0}, {"UNLABELED", 0}};
    std::map<std::string, std::size_t> severity{{"MINOR", 0}, {"CRITICAL", 0}};
    std::size_t total = 0, total_errored = 0;
    json admissions = json::array();
    for (const auto& a : corpus_) {
        const auto sentences = summary_sentences(a);
        std::vector<std::size_t> se_count(sentences.size(), 0), errored(sentences.size(), 0);
        bool any = false;
        for (const auto& se : inventory_) {
            if (se.admission_id != a.admission_id) continue;
            any = true;
            const auto s = static_cast<std::size_t>(se.sentence_index);
            ++se_count[s];
            ++total;
            auto it = latest.find({a.admission_id, se.se_id});
            if (it == latest.end()) {
                ++categories["UNLABELED"];
                continue;
            }
            ++categories[to_string(it->second.category)];
            if (it->second.category != ErrorCategory::NoError) {
                ++errored[s];
                ++total_errored;
            }
            if (it->second.severity != Severity::None) ++severity[to_string(it->second.severity)];
        }
        if (!any) continue;
        json per_sentence = json::array();
        std::size_t a_se = 0, a_err = 0;
        for (std::size_t s = 0; s < sentences.size(); ++s) {
            auto h = herr(se_count[s], errored[s]);
            per_sentence.push_back(h ? json(*h) : json(nullptr));
            a_se += se_count[s];
            a_err += errored[s];
        }
        admissions.push_back({{"admission_id", a.admission_id},
                              {"sentence_herr", per_sentence},
                              {"herr", *herr(a_se, a_err)},
                              {"se_count", a_se},
                              {"errored", a_err}});
    }
    json rates = json::object();
    for (const auto& [c, n] : categories) rates[c] = total ? static_cast<double>(n) / static_cast<double>(total) : 0.0;
    return {{"admissions", admissions},
            {"se_count", total},
            {"errored", total_errored},
            {"herr", total ? static_cast<double>(total_errored) / static_cast<double>(total) : 0.0},
            {"category_counts", categories},
            {"category_rates", rates},
            {"severity_counts", severity}};
}

ServiceResponse AnnotationService::handle(const std::string& method, const std::string& path,
                                          const std::map<std::string, std::string>& query,
                                          const std::map<std::string, std::string>& headers,
                                          const std::string& body) {
    const auto parts = split_path(path);
    auto method_not_allowed = [&] {
        return ServiceResponse{405, error_body("method_not_allowed", method + " " + path)};
    };
    try {
        if (parts.size() == 2 && parts[0] == "reports" && parts[1] == "herr") {
            if (method != "GET") return method_not_allowed();
            return {200, herr_report()};
        }
        if (!parts.empty() && parts[0] == "admissions") {
            if (parts.size() == 1) {
                if (method != "GET") return method_not_allowed();
                return {200, admissions()};
            }
            const std::string& id = parts[1];
            if (parts.size() == 3 && parts[2] == "labels") {
                if (method == "GET") return {200, labels(id)};
                if (method != "POST") return method_not_allowed();
                json j;
                try {
                    j = json::parse(body);
                } catch (const json::parse_error& e) {
                    throw ValidationError(std::string("labels: malformed JSON body: ") + e.what());
                }
                auto h = headers.find("x-annotator-id");
                return {201, post_label(id, h == headers.end() ? std::string() : h->second, j)};
            }
            if (method != "GET") return method_not_allowed();
            if (parts.size() == 3 && parts[2] == "notes") return {200, notes(id)};
            if (parts.size() == 3 && parts[2] == "summary") return {200, summary(id)};
            if (parts.size() == 3 && parts[2] == "search") {
                auto q = query.find("q");
                return {200, search(id, q == query.end() ? std::string() : q->second)};
            }
            if (parts.size() == 5 && parts[2] == "concepts" && parts[4] == "mentions")
                return {200, concept_mentions(id, parts[3])};
        }
        return {404, error_body("not_found", "no route for " + path)};
    } catch (const NotFoundError& e) {
        return {404, error_body("not_found", e.what())};
    } catch (const ValidationError& e) {
        return {400, error_body("validation", e.what())};
    } catch (const ParseError& e) {
        return {400, error_body("parse", e.what())};
    } catch (const IoError& e) {
        return {500, error_body("io", e.what())};
    }
}

// ---------------------------------------------------------------------------
// HTTP transport
// ---------------------------------------------------------------------------

struct AnnotationServer::Impl {
    AnnotationService& service;
    httplib::Server server;
    std::thread thread;
};

AnnotationServer::AnnotationServer(AnnotationService& service) : impl_(new Impl{service, {}, {}}) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query, headers;
        for (const auto& [k, v] : req.params) query.emplace(k, v);
        for (const auto& [k, v] : req.headers) headers.emplace(to_lower_ascii(k), v);
        auto out = impl_->service.handle(req.method, req.path, query, headers, req.body);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json; charset=utf-8");
    };
    impl_->server.Get(".*", handler);
    impl_->server.Post(".*", handler);
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    return bound;
}

void AnnotationServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void AnnotationServer::wait() {
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace coursekit
