#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "coursekit/corpus.hpp"
#include "coursekit/entity.hpp"
#include "json.hpp"

namespace coursekit {

// ---------------------------------------------------------------------------
// Summary elements and labels
// ---------------------------------------------------------------------------

/// A manually extracted span of one summary sentence. Offsets are bytes within
/// the sentence text.
struct SummaryElement {
    std::string admission_id;
    std::string se_id;
    int sentence_index = 0;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string text;
};

std::vector<SummaryElement> parse_se_inventory(std::string_view jsonl);

enum class ErrorCategory { NoError, NotInNotes, Incorrect, Missing };
enum class Severity { None, Minor, Critical };

ErrorCategory parse_error_category(const std::string& text);
Severity parse_severity(const std::string& text);
std::string to_string(ErrorCategory c);
std::string to_string(Severity s);

struct SeLabel {
    std::string admission_id;
    std::string se_id;
    ErrorCategory category = ErrorCategory::NoError;
    Severity severity = Severity::None;
    std::string annotator_id;
    std::string timestamp;
    std::uint64_t seq = 0;  // log position, decides latest-wins
};

/// Severity is set exactly for INCORRECT and MISSING. Throws ValidationError
/// naming the rule otherwise.
void validate_label(ErrorCategory category, Severity severity);

nlohmann::json to_json(const SeLabel& label);
SeLabel label_from_json(const nlohmann::json& j);

/// Append-only label log resolved in memory, one live label per
/// (admission, se_id, annotator). An empty path keeps labels in memory only.
class LabelStore {
  public:
    explicit LabelStore(std::string path = {});

    SeLabel append(SeLabel label);
    std::vector<SeLabel> resolved(const std::string& admission_id) const;
    std::vector<SeLabel> resolved_all() const;

  private:
    void apply(SeLabel label);

    std::string path_;
    std::uint64_t next_seq_ = 1;
    std::map<std::tuple<std::string, std::string, std::string>, SeLabel> live_;
};

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

struct ServiceResponse {
    int status = 200;
    nlohmann::json body;
};

struct ServiceConfig {
    std::string labels_path;  // empty: in-memory labels
    std::map<std::string, std::vector<EntitySynonymGroup>> esgs;  // by admission; built when absent
    std::function<std::string()> clock;  // ISO timestamp for label events
};

/// Request handling without a transport. Reads run concurrently; label writes
/// are serialized.
class AnnotationService {
  public:
    AnnotationService(Corpus corpus, std::vector<SummaryElement> inventory, ServiceConfig config = {});

    ServiceResponse handle(const std::string& method, const std::string& path,
                           const std::map<std::string, std::string>& query,
                           const std::map<std::string, std::string>& headers, const std::string& body);

    nlohmann::json admissions() const;
    nlohmann::json notes(const std::string& admission_id) const;
    nlohmann::json summary(const std::string& admission_id) const;
    nlohmann::json search(const std::string& admission_id, const std::string& query) const;
    nlohmann::json concept_mentions(const std::string& admission_id, const std::string& esg_id) const;
    nlohmann::json post_label(const std::string& admission_id, const std::string& annotator_id,
                              const nlohmann::json& body);
    nlohmann::json labels(const std::string& admission_id) const;
    nlohmann::json herr_report() const;

  private:
    const AdmissionRecord& admission(const std::string& admission_id) const;
    const EsgIndex& esg_index(const std::string& admission_id) const;
    std::vector<Sentence> summary_sentences(const AdmissionRecord& a) const;

    Corpus corpus_;
    std::vector<SummaryElement> inventory_;
    std::map<std::string, std::size_t> by_id_;
    std::map<std::string, EsgIndex> esg_;
    std::function<std::string()> clock_;
    mutable std::shared_mutex mutex_;
    LabelStore store_;
};

/// The annotated summary: the first generated system when present, else the
/// reference.
std::string annotated_summary(const AdmissionRecord& admission);

/// HTTP transport over AnnotationService on a background thread.
class AnnotationServer {
  public:
    explicit AnnotationServer(AnnotationService& service);
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Binds and starts listening; port 0 picks a free port. Returns the port.
    int start(const std::string& host, int port);
    void stop();
    /// Blocks until stop() is called from elsewhere.
    void wait();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace coursekit
