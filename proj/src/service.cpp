#include "maxdiff/service.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <iomanip>
#include <random>
#include <sstream>

#include "maxdiff/csv.hpp"
#include "maxdiff/design.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/json_io.hpp"

namespace maxdiff::service {

namespace fs = std::filesystem;
using json::Json;

namespace {

// Owns an O_APPEND descriptor; every append is one write() followed by fsync.
class AppendLog {
public:
    AppendLog() = default;
    explicit AppendLog(const fs::path& path)
        : fd_(::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644)) {
        if (fd_ < 0)
            throw Error(ErrorKind::io, "cannot open log '" + path.string() +
                                           "': " + std::strerror(errno));
    }
    AppendLog(AppendLog&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    AppendLog& operator=(AppendLog&& other) noexcept {
        if (this != &other) {
            close();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    AppendLog(const AppendLog&) = delete;
    AppendLog& operator=(const AppendLog&) = delete;
    ~AppendLog() { close(); }

    void append(std::string_view line) {
        std::size_t written = 0;
        while (written < line.size()) {
            const auto n = ::write(fd_, line.data() + written, line.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorKind::io, std::string("log append failed: ") +
                                               std::strerror(errno));
            }
            written += static_cast<std::size_t>(n);
        }
        if (::fsync(fd_) != 0)
            throw Error(ErrorKind::io, std::string("log fsync failed: ") +
                                           std::strerror(errno));
    }

private:
    void close() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
};

void write_atomic(const fs::path& path, std::string_view content) {
    const fs::path tmp = path.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0)
        throw Error(ErrorKind::io, "cannot write '" + tmp.string() + "'");
    std::size_t written = 0;
    bool ok = true;
    while (ok && written < content.size()) {
        const auto n = ::write(fd, content.data() + written, content.size() - written);
        if (n < 0 && errno == EINTR) continue;
        ok = n > 0;
        if (ok) written += static_cast<std::size_t>(n);
    }
    ok = ok && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw Error(ErrorKind::io, "write failed for '" + tmp.string() + "'");
    fs::rename(tmp, path);
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string new_token() {
    static thread_local std::mt19937_64 gen{[] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
        return std::mt19937_64(seq);
    }()};
    return hex64(gen()) + hex64(gen());
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

bool valid_slug(std::string_view id) {
    if (id.empty() || id.size() > 64) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_';
    });
}

Json canonical_payload(const StudyInfo& info) {
    Json j;
    Json items = Json::array();
    for (const auto& item : info.items) items.push_back(json::to_json(item));
    j["items"] = std::move(items);
    j["design"] = json::to_json(info.design, info.items);
    j["mode"] = std::string(to_string(info.mode));
    j["attribute_schema"] = info.attribute_schema;
    j["prompt"] = info.prompt;
    return j;
}

StudyInfo info_from_payload(const Json& payload) {
    StudyInfo info;
    for (const auto& item : payload.at("items"))
        info.items.push_back({item.at("id").get<std::string>(),
                              item.at("label").get<std::string>(),
                              item.at("description").get<std::string>()});
    info.design = json::design_from_json(payload.at("design"), info.items);
    info.mode = parse_study_mode(payload.at("mode").get<std::string>());
    info.attribute_schema = payload.at("attribute_schema").get<std::vector<std::string>>();
    info.prompt = payload.at("prompt").get<std::string>();
    return info;
}

}  // namespace

std::string_view to_string(StudyMode mode) {
    return mode == StudyMode::best_only ? "best_only" : "best_worst";
}

StudyMode parse_study_mode(std::string_view name) {
    if (name == "best_only") return StudyMode::best_only;
    if (name == "best_worst") return StudyMode::best_worst;
    throw Error(ErrorKind::invalid_input,
                "unknown study mode '" + std::string(name) + "'");
}

struct SurveyService::Study {
    struct SessionState {
        std::string session_id;
        std::size_t version_index = 0;
        Attributes attributes;
        std::vector<SubmitRequest> answers;  // answers[i] is screen i
    };

    StudyInfo info;
    std::string canonical;  // dumped payload, for idempotent re-creation
    fs::path dir;
    mutable std::mutex mutex;
    std::vector<SessionState> sessions;
    std::map<std::string, std::size_t> session_index;
    std::vector<ChoiceObservation> observations;
    AppendLog log;

    std::size_t total_screens() const {
        return info.design.spec.screens_per_respondent;
    }

    Session snapshot(const SessionState& s) const {
        Session out;
        out.session_id = s.session_id;
        out.study_id = info.study_id;
        out.version_index = s.version_index;
        out.attributes = s.attributes;
        out.cursor = s.answers.size();
        out.total_screens = total_screens();
        out.completed = out.cursor == out.total_screens;
        return out;
    }

    void persist_sessions() const {
        Json list = Json::array();
        for (const auto& s : sessions) {
            Json j;
            j["session_id"] = s.session_id;
            j["version"] = s.version_index;
            Json attributes = Json::object();
            for (const auto& [k, v] : s.attributes) attributes[k] = v;
            j["attributes"] = std::move(attributes);
            list.push_back(std::move(j));
        }
        write_atomic(dir / "sessions.json", list.dump(2) + "\n");
    }
};

SurveyService::SurveyService(fs::path data_dir) : data_dir_(std::move(data_dir)) {
    fs::create_directories(data_dir_);
    for (const auto& entry : fs::directory_iterator(data_dir_))
        if (entry.is_directory() && fs::exists(entry.path() / "study.json"))
            load_study(entry.path());
}

SurveyService::~SurveyService() = default;

void SurveyService::load_study(const fs::path& dir) {
    auto study = std::make_unique<Study>();
    study->dir = dir;
    const auto doc = json::parse(csv::read_file(dir / "study.json"));
    const auto& payload = doc.at("payload");
    study->info = info_from_payload(payload);
    study->info.study_id = doc.at("study_id").get<std::string>();
    study->info.created_at = doc.at("created_at").get<std::string>();
    study->canonical = payload.dump();

    if (fs::exists(dir / "sessions.json")) {
        for (const auto& j : json::parse(csv::read_file(dir / "sessions.json"))) {
            Study::SessionState s;
            s.session_id = j.at("session_id").get<std::string>();
            s.version_index = j.at("version").get<std::size_t>();
            for (const auto& [k, v] : j.at("attributes").items())
                s.attributes[k] = v.get<std::string>();
            study->session_index[s.session_id] = study->sessions.size();
            study->sessions.push_back(std::move(s));
        }
    }

    const auto log_path = dir / "observations.jsonl";
    if (fs::exists(log_path)) {
        const auto text = csv::read_file(log_path);
        std::size_t committed = 0;
        std::size_t start = 0;
        while (true) {
            const auto nl = text.find('\n', start);
            if (nl == std::string::npos) break;
            const auto line = std::string_view(text).substr(start, nl - start);
            Json record;
            try {
                record = Json::parse(line);
            } catch (const nlohmann::json::exception&) {
                break;
            }
            const auto sid = record.at("session_id").get<std::string>();
            auto obs = json::observation_from_json(record.at("observation"));
            auto it = study->session_index.find(sid);
            if (it != study->session_index.end())
                study->sessions[it->second].answers.push_back(
                    {obs.screen_index, obs.best, obs.worst});
            study->observations.push_back(std::move(obs));
            start = nl + 1;
            committed = start;
        }
        // Drop a torn tail so the next append starts on a fresh line.
        if (committed < text.size()) fs::resize_file(log_path, committed);
    }
    study->log = AppendLog(log_path);

    std::unique_lock lock(registry_mutex_);
    for (const auto& s : study->sessions)
        session_to_study_[s.session_id] = study->info.study_id;
    studies_[study->info.study_id] = std::move(study);
}

CreateOutcome SurveyService::create_study(const StudyRequest& request) {
    if (request.items.empty())
        throw Error(ErrorKind::invalid_input, "study needs at least one item");
    validate_items(request.items);
    for (const auto& item : request.items)
        if (item.id.find_first_of("|;=") != std::string::npos)
            throw Error(ErrorKind::invalid_input,
                        "item id '" + item.id + "' contains a reserved character");
    for (const auto& key : request.attribute_schema)
        if (key.empty() || key.find_first_of(";=") != std::string::npos)
            throw Error(ErrorKind::invalid_input, "invalid attribute key '" + key + "'");

    StudyInfo info;
    info.items = request.items;
    info.mode = request.mode;
    info.attribute_schema = request.attribute_schema;
    info.prompt = request.prompt;
    if (const auto* spec = std::get_if<DesignSpec>(&request.design)) {
        DesignSpec full = *spec;
        full.n_items = request.items.size();
        info.design = generate_design(full);
    } else {
        info.design = std::get<Design>(request.design);
        if (info.design.spec.n_items != request.items.size())
            throw Error(ErrorKind::invalid_input,
                        "design n_items does not match the item count");
        info.design.spec.validate();
    }
    const auto diagnostics = design_diagnostics(info.design);
    if (!diagnostics.violations.empty())
        throw Error(ErrorKind::invalid_input,
                    "design is invalid: " + diagnostics.violations.front());

    const auto payload = canonical_payload(info);
    const auto canonical = payload.dump();
    info.study_id = request.study_id.value_or("study-" + hex64(fnv1a(canonical)));
    if (!valid_slug(info.study_id))
        throw Error(ErrorKind::invalid_input,
                    "study id '" + info.study_id + "' is not a slug");

    std::unique_lock lock(registry_mutex_);
    if (auto it = studies_.find(info.study_id); it != studies_.end()) {
        if (it->second->canonical == canonical) return {info.study_id, false};
        throw Error(ErrorKind::conflict,
                    "study '" + info.study_id + "' exists with a different payload");
    }
    info.created_at = utc_now();
    auto study = std::make_unique<Study>();
    study->dir = data_dir_ / info.study_id;
    fs::create_directories(study->dir);
    Json doc;
    doc["study_id"] = info.study_id;
    doc["created_at"] = info.created_at;
    doc["payload"] = payload;
    study->persist_sessions();
    study->log = AppendLog(study->dir / "observations.jsonl");
    write_atomic(study->dir / "study.json", doc.dump(2) + "\n");
    study->info = std::move(info);
    study->canonical = canonical;
    const auto id = study->info.study_id;
    studies_[id] = std::move(study);
    return {id, true};
}

SurveyService::Study& SurveyService::find_study(const std::string& study_id) const {
    std::shared_lock lock(registry_mutex_);
    auto it = studies_.find(study_id);
    if (it == studies_.end())
        throw Error(ErrorKind::not_found, "unknown study '" + study_id + "'");
    return *it->second;
}

std::pair<SurveyService::Study*, std::size_t> SurveyService::find_session(
    const std::string& session_id) const {
    Study* study = nullptr;
    {
        std::shared_lock lock(registry_mutex_);
        auto it = session_to_study_.find(session_id);
        if (it == session_to_study_.end())
            throw Error(ErrorKind::not_found, "unknown session");
        study = studies_.at(it->second).get();
    }
    std::lock_guard guard(study->mutex);
    return {study, study->session_index.at(session_id)};
}

StudyInfo SurveyService::study(const std::string& study_id) const {
    auto& study = find_study(study_id);
    std::lock_guard guard(study.mutex);
    return study.info;
}

Session SurveyService::open_session(const std::string& study_id,
                                    const Attributes& attributes) {
    auto& study = find_study(study_id);
    for (const auto& key : study.info.attribute_schema)
        if (!attributes.contains(key))
            throw Error(ErrorKind::invalid_input, "missing attribute '" + key + "'");
    csv::encode_attributes(attributes);  // rejects reserved characters

    Session out;
    {
        std::lock_guard guard(study.mutex);
        std::vector<std::size_t> counts(study.info.design.versions.size(), 0);
        for (const auto& s : study.sessions) ++counts[s.version_index];
        const auto version = static_cast<std::size_t>(
            std::min_element(counts.begin(), counts.end()) - counts.begin());
        Study::SessionState state{new_token(), version, attributes, {}};
        study.session_index[state.session_id] = study.sessions.size();
        study.sessions.push_back(state);
        try {
            study.persist_sessions();
        } catch (...) {
            study.session_index.erase(state.session_id);
            study.sessions.pop_back();
            throw;
        }
        out = study.snapshot(study.sessions.back());
    }
    std::unique_lock lock(registry_mutex_);
    session_to_study_[out.session_id] = study_id;
    return out;
}

Session SurveyService::session(const std::string& session_id) const {
    auto [study, index] = find_session(session_id);
    std::lock_guard guard(study->mutex);
    return study->snapshot(study->sessions[index]);
}

ScreenView SurveyService::next_screen(const std::string& session_id) const {
    auto [study, index] = find_session(session_id);
    std::lock_guard guard(study->mutex);
    const auto& s = study->sessions[index];
    ScreenView view;
    view.total_screens = study->total_screens();
    view.screen_index = s.answers.size();
    view.prompt = study->info.prompt;
    if (view.screen_index >= view.total_screens) {
        view.completed = true;
        return view;
    }
    const auto& screen = study->info.design.versions[s.version_index][view.screen_index];
    for (auto idx : screen.item_indices) view.options.push_back(study->info.items[idx]);
    return view;
}

void SurveyService::submit_choice(const std::string& session_id,
                                  const SubmitRequest& request) {
    auto [study, index] = find_session(session_id);
    std::lock_guard guard(study->mutex);
    auto& s = study->sessions[index];
    const std::size_t cursor = s.answers.size();
    const std::size_t T = study->total_screens();

    if (request.screen_index < cursor) {
        const auto& recorded = s.answers[request.screen_index];
        const bool same = recorded.best == request.best && recorded.worst == request.worst;
        throw Error(ErrorKind::conflict,
                    "screen " + std::to_string(request.screen_index) +
                        " already recorded" +
                        (same ? " (identical answer)" : " (different answer)"));
    }
    if (cursor >= T)
        throw Error(ErrorKind::conflict, "session already completed");
    if (request.screen_index != cursor)
        throw Error(ErrorKind::conflict,
                    "out-of-order submission: expected screen " +
                        std::to_string(cursor) + ", got " +
                        std::to_string(request.screen_index));

    const auto& info = study->info;
    const auto& screen = info.design.versions[s.version_index][cursor];
    std::vector<std::string> shown;
    for (auto idx : screen.item_indices) shown.push_back(info.items[idx].id);
    auto on_screen = [&](const std::string& id) {
        return std::find(shown.begin(), shown.end(), id) != shown.end();
    };
    if (!on_screen(request.best))
        throw Error(ErrorKind::invalid_input,
                    "best '" + request.best + "' is not on screen " +
                        std::to_string(cursor));
    if (info.mode == StudyMode::best_only && request.worst)
        throw Error(ErrorKind::invalid_input,
                    "this study collects the most important pick only");
    if (info.mode == StudyMode::best_worst) {
        if (!request.worst)
            throw Error(ErrorKind::invalid_input, "a worst pick is required");
        if (!on_screen(*request.worst))
            throw Error(ErrorKind::invalid_input,
                        "worst '" + *request.worst + "' is not on the screen");
        if (*request.worst == request.best)
            throw Error(ErrorKind::invalid_input, "worst must differ from best");
    }

    ChoiceObservation obs;
    obs.respondent_id = s.session_id;
    obs.version_index = s.version_index;
    obs.screen_index = cursor;
    obs.shown = std::move(shown);
    obs.best = request.best;
    obs.worst = request.worst;
    obs.attributes = s.attributes;

    Json record;
    record["session_id"] = s.session_id;
    record["observation"] = json::to_json(obs);
    study->log.append(record.dump() + "\n");
    study->observations.push_back(std::move(obs));
    s.answers.push_back(request);
}

Dataset SurveyService::export_dataset(const std::string& study_id) const {
    auto& study = find_study(study_id);
    std::lock_guard guard(study.mutex);
    return Dataset{study.info.items, study.observations};
}

StudyResults SurveyService::results(const std::string& study_id,
                                    const FitOptions& options,
                                    const std::vector<CohortSpec>& cohorts) const {
    StudyResults out;
    Dataset dataset;
    {
        auto& study = find_study(study_id);
        std::lock_guard guard(study.mutex);
        dataset = Dataset{study.info.items, study.observations};
        out.n_sessions = study.sessions.size();
        for (const auto& s : study.sessions) {
            if (s.answers.size() == study.total_screens()) ++out.n_completed_sessions;
            else if (!s.answers.empty()) ++out.n_partial_sessions;
        }
    }
    if (dataset.observations.empty())
        throw Error(ErrorKind::insufficient_data,
                    "study '" + study_id + "' has no observations yet");
    if (cohorts.empty()) out.analysis.pooled = fit(dataset, options);
    else out.analysis = fit_by_cohort(dataset, cohorts, options);
    return out;
}

std::vector<std::size_t> SurveyService::version_counts(const std::string& study_id) const {
    auto& study = find_study(study_id);
    std::lock_guard guard(study.mutex);
    std::vector<std::size_t> counts(study.info.design.versions.size(), 0);
    for (const auto& s : study.sessions) ++counts[s.version_index];
    return counts;
}

}  // namespace maxdiff::service
