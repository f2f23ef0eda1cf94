#pragma once
// Fielding a study: sessions walk their design version screen by screen and
// every acknowledged choice is appended durably to the study's log.
//
// On-disk layout per study under the data directory:
//   <study_id>/study.json         configuration (items, design, mode, ...)
//   <study_id>/sessions.json      opened sessions (rewritten atomically)
//   <study_id>/observations.jsonl one complete JSON record per line
// Session cursors are rebuilt from the log on startup.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "maxdiff/domain.hpp"
#include "maxdiff/estimator.hpp"

namespace maxdiff::service {

inline constexpr const char* kDefaultPrompt =
    "Select the feature that is most important to you from the following options:";

enum class StudyMode { best_only, best_worst };

std::string_view to_string(StudyMode mode);
StudyMode parse_study_mode(std::string_view name);

struct StudyRequest {
    std::optional<std::string> study_id;  // derived from the payload when absent
    std::vector<Item> items;
    // A design, or a spec to generate one from (n_items is taken from items).
    std::variant<Design, DesignSpec> design;
    StudyMode mode = StudyMode::best_only;
    std::vector<std::string> attribute_schema;
    std::string prompt = kDefaultPrompt;
};

struct StudyInfo {
    std::string study_id;
    std::vector<Item> items;
    Design design;
    StudyMode mode = StudyMode::best_only;
    std::vector<std::string> attribute_schema;
    std::string prompt;
    std::string created_at;  // ISO-8601 UTC
};

struct CreateOutcome {
    std::string study_id;
    bool created = false;  // false when an identical study already existed
};

struct Session {
    std::string session_id;
    std::string study_id;
    std::size_t version_index = 0;
    Attributes attributes;
    std::size_t cursor = 0;
    bool completed = false;
    std::size_t total_screens = 0;
};

struct ScreenView {
    bool completed = false;
    std::size_t screen_index = 0;
    std::size_t total_screens = 0;
    std::string prompt;
    std::vector<Item> options;  // display order
};

struct SubmitRequest {
    std::size_t screen_index = 0;
    std::string best;
    std::optional<std::string> worst;
};

struct StudyResults {
    CohortAnalysis analysis;  // cohorts empty when none requested
    std::size_t n_sessions = 0;
    std::size_t n_completed_sessions = 0;
    std::size_t n_partial_sessions = 0;
};

class SurveyService {
public:
    // Loads every study found under data_dir (created if missing).
    explicit SurveyService(std::filesystem::path data_dir);
    ~SurveyService();

    SurveyService(const SurveyService&) = delete;
    SurveyService& operator=(const SurveyService&) = delete;

    CreateOutcome create_study(const StudyRequest& request);
    StudyInfo study(const std::string& study_id) const;

    Session open_session(const std::string& study_id, const Attributes& attributes);
    Session session(const std::string& session_id) const;
    ScreenView next_screen(const std::string& session_id) const;
    // Throws conflict on duplicate or out-of-order screen_index; the
    // message says whether a duplicate matches the recorded answer.
    void submit_choice(const std::string& session_id, const SubmitRequest& request);

    Dataset export_dataset(const std::string& study_id) const;
    StudyResults results(const std::string& study_id, const FitOptions& options,
                         const std::vector<CohortSpec>& cohorts = {}) const;

    // Sessions opened per design version.
    std::vector<std::size_t> version_counts(const std::string& study_id) const;

private:
    struct Study;

    Study& find_study(const std::string& study_id) const;
    std::pair<Study*, std::size_t> find_session(const std::string& session_id) const;
    void load_study(const std::filesystem::path& dir);

    std::filesystem::path data_dir_;
    mutable std::shared_mutex registry_mutex_;
    std::map<std::string, std::unique_ptr<Study>> studies_;
    std::map<std::string, std::string> session_to_study_;
};

}  // namespace maxdiff::service
