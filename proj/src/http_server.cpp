#include "maxdiff/http_server.hpp"

#include <httplib.h>

#include "maxdiff/csv.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/json_io.hpp"
#include "maxdiff/rng.hpp"

namespace maxdiff::service {

using json::Json;

namespace {

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::not_found: return 404;
        case ErrorKind::conflict: return 409;
        case ErrorKind::invalid_input:
        case ErrorKind::invalid_spec:
        case ErrorKind::undefined_item:
        case ErrorKind::insufficient_data: return 422;
        case ErrorKind::io: return 500;
    }
    return 500;
}

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, std::string_view kind,
                const std::string& message) {
    Json body;
    body["error"] = kind;
    body["message"] = message;
    send_json(res, status, body);
}

// Runs a handler, mapping library errors onto HTTP statuses.
template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, "bad-request", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

Json body_json(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    return Json::parse(req.body);
}

Attributes attributes_from(const Json& j) {
    Attributes out;
    if (!j.contains("attributes")) return out;
    for (const auto& [k, v] : j.at("attributes").items()) out[k] = v.get<std::string>();
    return out;
}

StudyRequest study_request_from(const Json& j) {
    StudyRequest request;
    if (j.contains("study_id")) request.study_id = j.at("study_id").get<std::string>();
    for (const auto& item : j.at("items"))
        request.items.push_back({item.at("id").get<std::string>(),
                                 item.at("label").get<std::string>(),
                                 item.value("description", std::string())});
    if (j.contains("design")) {
        request.design = json::design_from_json(j.at("design"), request.items);
    } else {
        DesignSpec spec;
        spec.rng_seed = kDefaultSeed;
        if (j.contains("design_spec")) {
            const auto& s = j.at("design_spec");
            spec.items_per_screen = s.value("items_per_screen", spec.items_per_screen);
            spec.screens_per_respondent =
                s.value("screens_per_respondent", spec.screens_per_respondent);
            spec.n_versions = s.value("n_versions", spec.n_versions);
            spec.rng_seed = s.value("rng_seed", spec.rng_seed);
            spec.swap_attempts = s.value("swap_attempts", spec.swap_attempts);
        }
        request.design = spec;
    }
    request.mode = parse_study_mode(j.value("mode", std::string("best_only")));
    if (j.contains("attribute_schema"))
        request.attribute_schema = j.at("attribute_schema").get<std::vector<std::string>>();
    request.prompt = j.value("prompt", std::string(kDefaultPrompt));
    return request;
}

}  // namespace

CohortSpec parse_cohort(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0)
        throw Error(ErrorKind::invalid_input,
                    "cohort must look like name:key=value;key2=value2");
    CohortSpec cohort;
    cohort.name = std::string(text.substr(0, colon));
    cohort.required_attributes = csv::decode_attributes(text.substr(colon + 1));
    return cohort;
}

struct HttpServer::Impl {
    explicit Impl(SurveyService& s) : service(s) {}
    SurveyService& service;
    httplib::Server server;
};

HttpServer::HttpServer(SurveyService& service)
    : impl_(std::make_unique<Impl>(service)) {
    auto& svc = impl_->service;
    auto& server = impl_->server;

    server.Post("/studies", guarded([&svc](const httplib::Request& req,
                                           httplib::Response& res) {
        const auto outcome = svc.create_study(study_request_from(body_json(req)));
        const auto info = svc.study(outcome.study_id);
        Json body;
        body["study_id"] = outcome.study_id;
        body["created"] = outcome.created;
        body["n_versions"] = info.design.versions.size();
        body["total_screens"] = info.design.spec.screens_per_respondent;
        send_json(res, outcome.created ? 201 : 200, body);
    }));

    server.Get(R"(/studies/([A-Za-z0-9_-]+)/results)",
               guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                   FitOptions options;
                   if (req.has_param("lambda")) {
                       try {
                           options.l2_penalty = std::stod(req.get_param_value("lambda"));
                       } catch (const std::logic_error&) {
                           throw Error(ErrorKind::invalid_input, "lambda must be a number");
                       }
                   }
                   std::vector<CohortSpec> cohorts;
                   for (std::size_t i = 0; i < req.get_param_value_count("cohort"); ++i)
                       cohorts.push_back(parse_cohort(req.get_param_value("cohort", i)));
                   const auto results = svc.results(req.matches[1], options, cohorts);
                   Json body;
                   body["fit"] = json::to_json(results.analysis.pooled);
                   body["cohorts"] = json::to_json(results.analysis)["cohorts"];
                   Json sessions;
                   sessions["total"] = results.n_sessions;
                   sessions["completed"] = results.n_completed_sessions;
                   sessions["partial"] = results.n_partial_sessions;
                   body["sessions"] = std::move(sessions);
                   send_json(res, 200, body);
               }));

    server.Post(R"(/studies/([A-Za-z0-9_-]+)/sessions)",
                guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                    const auto session =
                        svc.open_session(req.matches[1], attributes_from(body_json(req)));
                    Json body;
                    body["session_id"] = session.session_id;
                    body["total_screens"] = session.total_screens;
                    body["version"] = session.version_index;
                    send_json(res, 201, body);
                }));

    server.Get(R"(/sessions/([0-9a-f]+)/screen)",
               guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                   const auto view = svc.next_screen(req.matches[1]);
                   Json body;
                   if (view.completed) {
                       body["completed"] = true;
                       body["total_screens"] = view.total_screens;
                   } else {
                       body["screen_index"] = view.screen_index;
                       body["total_screens"] = view.total_screens;
                       body["prompt"] = view.prompt;
                       Json options = Json::array();
                       for (const auto& item : view.options) options.push_back(json::to_json(item));
                       body["options"] = std::move(options);
                   }
                   send_json(res, 200, body);
               }));

    server.Post(R"(/sessions/([0-9a-f]+)/choices)",
                guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                    const auto j = body_json(req);
                    SubmitRequest submit;
                    submit.screen_index = j.at("screen_index").get<std::size_t>();
                    submit.best = j.at("best").get<std::string>();
                    if (j.contains("worst") && !j.at("worst").is_null())
                        submit.worst = j.at("worst").get<std::string>();
                    svc.submit_choice(req.matches[1], submit);
                    res.status = 204;
                }));

    server.Get(R"(/studies/([A-Za-z0-9_-]+)/export.csv)",
               guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                   const auto dataset = svc.export_dataset(req.matches[1]);
                   res.status = 200;
                   res.set_content(csv::format_responses(dataset), "text/csv; charset=utf-8");
               }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound <= 0) throw Error(ErrorKind::io, "cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port))
        throw Error(ErrorKind::io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace maxdiff::service
