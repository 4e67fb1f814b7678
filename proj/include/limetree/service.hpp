#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/error.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/lime_baseline.hpp"
#include "limetree/surrogate_tree.hpp"

namespace httplib {
class Server;
}

namespace limetree {

/// Everything a session knows. Copyable snapshot; the live copy sits behind
/// the session's reader-writer lock.
struct SessionState {
  std::string id;
  std::string created;
  std::string updated;
  InterpretableDomain base;    // as uploaded
  InterpretableDomain domain;  // after merges
  nlohmann::json black_box_descriptor;
  BlackBoxPtr black_box;
  std::map<TreeVariant, SurrogateTree> trees;
  std::optional<LimeExplanation> lime;
  nlohmann::json reports = nlohmann::json::object();
  nlohmann::json fit_settings;  // null until fitted
};

class Session {
 public:
  explicit Session(SessionState state) : state_(std::move(state)) {}

  std::shared_mutex& mutex() const { return mutex_; }
  SessionState& state() { return state_; }
  const SessionState& state() const { return state_; }

  /// Marks a write (fit or merge) as in flight; false when one already is.
  bool try_begin_write() { return !busy_.exchange(true); }
  void end_write() { busy_ = false; }
  bool busy() const { return busy_; }

  std::optional<std::string> cached_render(const std::string& bits) const;
  void cache_render(const std::string& bits, std::string png);
  void clear_render_cache();

 private:
  mutable std::shared_mutex mutex_;
  std::atomic<bool> busy_{false};
  SessionState state_;
  mutable std::mutex render_mutex_;
  std::map<std::string, std::string> render_cache_;
};

/// Session-oriented explanation API. All requests and responses are JSON
/// documents; errors are thrown as limetree::Error and mapped to HTTP status
/// codes by mount().
///
/// On disk every session is a directory under `root`:
///   session.json  anchor.png | text.json  mask.png  trees/<variant>.json
///   reports.json  lime.json
class ExplanationService {
 public:
  explicit ExplanationService(std::filesystem::path root);

  nlohmann::json create_session(const nlohmann::json& request);
  nlohmann::json get_session(const std::string& id) const;
  nlohmann::json list_sessions() const;
  nlohmann::json update_segmentation(const std::string& id, const nlohmann::json& request);
  nlohmann::json fit(const std::string& id, const nlohmann::json& request);
  nlohmann::json query(const std::string& id, const nlohmann::json& request) const;
  nlohmann::json tree(const std::string& id, const std::optional<std::string>& variant = std::nullopt) const;
  /// PNG bytes of IR^-1(bits); cached per bitstring.
  std::string render_png(const std::string& id, const std::string& bits) const;

  /// Serialised tree documents of a session, as stored on disk.
  std::map<std::string, std::string> tree_files(const std::string& id) const;

  std::shared_ptr<Session> session(const std::string& id) const;
  const std::filesystem::path& root() const noexcept { return root_; }

  /// Registers the HTTP routes (with permissive CORS headers).
  void mount(httplib::Server& server);

 private:
  void load_all();
  std::shared_ptr<Session> load(const std::filesystem::path& dir);
  void persist(const SessionState& state) const;

  std::filesystem::path root_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// HTTP status for an error code (400, 404, 409, 413, 422, 502).
int http_status(ErrorCode code);

}  // namespace limetree
