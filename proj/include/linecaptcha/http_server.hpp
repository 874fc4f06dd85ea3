#pragma once

// cpp-httplib routes for ChallengeService:
//   POST /v1/challenge            -> challenge JSON (image inline as base64 PNG)
//   GET  /v1/challenge/{id}/image -> image/png
//   POST /v1/verify               -> verdict JSON
//   GET  /v1/health               -> {"status":"ok"}

#include <httplib.h>

#include "linecaptcha/service.hpp"

namespace linecaptcha {

inline void mount_routes(httplib::Server& server, ChallengeService& service) {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  server.Post("/v1/challenge", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.handle_create(req.body));
  });
  server.Get(R"(/v1/challenge/([A-Za-z0-9_-]+)/image)",
             [&service, send](const httplib::Request& req, httplib::Response& res) {
               send(res, service.handle_image(req.matches[1]));
             });
  server.Post("/v1/verify", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.handle_verify(req.body));
  });
  server.Get("/v1/health", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.handle_health());
  });
}

}  // namespace linecaptcha
