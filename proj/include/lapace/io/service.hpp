#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"
#include "lapace/classifiers/classifier.hpp"
#include "lapace/lgmvae/model.hpp"

namespace httplib {
class Server;
}

namespace lapace::io {

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

using QueryParams = std::multimap<std::string, std::string>;

inline constexpr std::size_t kMaxGridSteps = 1001;

// Read-only JSON API over one model and one classifier. Every request is
// answered from the immutable artifacts; nothing is mutated per request.
class RecourseService {
 public:
  // Throws unless the model is recourse-ready and both share a schema.
  void load(std::shared_ptr<const lgmvae::LgmvaeModel> model,
            std::shared_ptr<const classifiers::Classifier> classifier);
  bool ready() const;

  HttpResponse handle(const std::string& method, const std::string& path,
                      const QueryParams& params, const std::string& body) const;

  // Registers every endpoint on `server`.
  void mount(httplib::Server& server) const;

 private:
  struct Artifacts {
    std::shared_ptr<const lgmvae::LgmvaeModel> model;
    std::shared_ptr<const classifiers::Classifier> classifier;
  };
  std::shared_ptr<const Artifacts> snapshot() const;

  mutable std::mutex mutex_;
  std::shared_ptr<const Artifacts> artifacts_;
};

}  // namespace lapace::io
