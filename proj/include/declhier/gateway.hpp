#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "declhier/engine.hpp"

namespace httplib {
class Server;
}

namespace declhier {

using json = nlohmann::json;

// JSON views shared by the HTTP service and the CLI.
json event_json(const Event& e);
json scope_json(const ProcessInstance& inst, ScopeId id);
json instance_json(const ProcessInstance& inst, const std::string& id, const std::string& model_id);
json enabled_json(const ProcessInstance& inst);
json rejection_json(const rejection& r);

struct ApiResponse {
  int status = 200;
  json body;
};

// In-memory model and instance registry with optional log-based snapshot
// persistence. Writes to one instance are serialised; reads use the last
// committed instance and never wait for a writer.
class SessionStore {
 public:
  // Restores from `snapshot` when the file exists.
  explicit SessionStore(std::optional<std::filesystem::path> snapshot = std::nullopt);

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  ApiResponse add_model(const std::string& source);
  ApiResponse get_model(const std::string& id) const;
  ApiResponse create_instance(const std::string& model_id);
  ApiResponse get_instance(const std::string& id) const;
  ApiResponse get_enabled(const std::string& id) const;
  ApiResponse get_trace(const std::string& id) const;
  // `command` is {kind: start|complete|terminate, activity?, scope?, activity_instance?}.
  ApiResponse apply_command(const std::string& id, const json& command);

  ApiResponse analysis_equiv(const json& request) const;
  ApiResponse analysis_extract(const json& request) const;

  json snapshot() const;
  void save_snapshot() const;

 private:
  struct ModelEntry {
    std::string text;
    std::shared_ptr<const CompiledDocument> doc;
  };
  struct InstanceEntry {
    std::string model_id;
    std::mutex write;
    mutable std::mutex publish;
    std::shared_ptr<const ProcessInstance> committed;

    std::shared_ptr<const ProcessInstance> current() const {
      std::lock_guard lock(publish);
      return committed;
    }
  };

  std::shared_ptr<InstanceEntry> find_instance(const std::string& id) const;
  std::shared_ptr<const ModelEntry> find_model(const std::string& id) const;
  std::string register_model(std::string text, std::shared_ptr<const CompiledDocument> doc);
  void restore(const json& snap);

  std::optional<std::filesystem::path> snapshot_path_;
  mutable std::shared_mutex models_mutex_;
  std::vector<std::shared_ptr<const ModelEntry>> models_;
  mutable std::shared_mutex instances_mutex_;
  std::map<std::string, std::shared_ptr<InstanceEntry>> instances_;
  std::size_t next_instance_ = 1;
  mutable std::mutex snapshot_mutex_;
};

void register_routes(httplib::Server& server, SessionStore& store);

// Exit codes: 0 success / equivalent / accepted, 1 negative verdict,
// 2 usage or parse error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::istream& in);

}  // namespace declhier
