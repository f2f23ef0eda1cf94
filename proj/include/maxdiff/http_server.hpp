#pragma once
// HTTP/JSON front end for SurveyService.
//
//   POST /studies                         create (or idempotently re-create) a study
//   GET  /studies/{id}/results            pooled fit (+ ?cohort=name:key=value;...)
//   POST /studies/{id}/sessions           {attributes} -> {session_id, total_screens}
//   GET  /sessions/{sid}/screen           next screen or {completed: true}
//   POST /sessions/{sid}/choices          {screen_index, best, worst?} -> 204
//   GET  /studies/{id}/export.csv         responses CSV

#include <memory>
#include <string>

#include "maxdiff/service.hpp"

namespace maxdiff::service {

class HttpServer {
public:
    explicit HttpServer(SurveyService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Returns the bound port (port 0 picks a free one); throws io on failure.
    int bind(const std::string& host, int port);
    // Blocks until stop() is called.
    void listen();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Parses "name:key=value;key2=value2".
CohortSpec parse_cohort(std::string_view text);

}  // namespace maxdiff::service
