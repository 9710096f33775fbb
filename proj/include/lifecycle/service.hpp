#pragma once

// Transport-independent session service. Every inbound and outbound message
// is appended to the session's event log before it is applied or sent; on
// start-up the logs are replayed to rebuild all sessions.

#include "lifecycle/error.hpp"
#include "lifecycle/event_log.hpp"
#include "lifecycle/export.hpp"
#include "lifecycle/session.hpp"
#include "lifecycle/wire.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lifecycle {

struct ServiceOptions {
  std::filesystem::path log_dir;  // empty: keep nothing on disk
  bool allow_ordering_override = false;  // HELLO may pick BF/SF (synthetic studies)
  std::function<std::string()> make_token;
  std::function<std::int64_t()> clock_ms;
};

inline bool valid_participant_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

inline std::string random_token() {
  std::random_device rd;
  static constexpr char hex[] = "0123456789abcdef";
  std::string t;
  for (int i = 0; i < 8; ++i) {
    auto v = rd();
    for (int j = 0; j < 4; ++j, v >>= 8) {
      t += hex[(v >> 4) & 0xf];
      t += hex[v & 0xf];
    }
  }
  return t;
}

class Service {
 public:
  struct Connection {
    std::string session_id;  // bound by HELLO
  };

  explicit Service(StudyConfig cfg, ServiceOptions opts = {}) : study_{std::move(cfg)}, opts_{std::move(opts)} {
    if (!opts_.make_token) opts_.make_token = random_token;
    if (!opts_.clock_ms) opts_.clock_ms = event_log::now_ms;
    if (!opts_.log_dir.empty()) {
      std::filesystem::create_directories(opts_.log_dir);
      recover();
    }
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const StudyConfig& config() const noexcept { return study_.config(); }
  std::size_t recovered_sessions() const noexcept { return recovered_; }

  // Processes one inbound line and returns the outbound lines in order.
  std::vector<std::string> handle(Connection& conn, const std::string& line) {
    std::vector<std::string> out;
    for (const auto& env : process(conn, line, nullptr)) out.push_back(wire::dump(env));
    return out;
  }

  ExportTables export_tables() const {
    std::lock_guard study_lock{study_mutex_};
    std::vector<const SessionRecord*> done;
    for (const auto& [id, slot] : slots_) {
      std::lock_guard lock{slot->mutex};
      if (slot->session->phase() == Phase::Complete) done.push_back(&slot->session->record());
    }
    return build_export(done, study_.config().params);
  }

  ExportResult export_dataset(const std::filesystem::path& dest) const {
    return write_export(export_tables(), dest);
  }

  // Read-only experimenter view.
  wire::json progress() const {
    std::lock_guard study_lock{study_mutex_};
    wire::json sessions = wire::json::array();
    for (const auto& [id, slot] : slots_) {
      std::lock_guard lock{slot->mutex};
      const auto& s = *slot->session;
      wire::json item{{"session_id", id},
                      {"participant_id", s.record().participant_id},
                      {"ordering", to_string(s.record().ordering)},
                      {"phase", to_string(s.phase())},
                      {"rounds_completed", s.record().rounds.size()}};
      if (s.phase() == Phase::Playing) {
        item["round"] = s.round();
        item["period"] = s.period();
      }
      if (s.record().payment_total) item["payment_total"] = *s.record().payment_total;
      sessions.push_back(item);
    }
    return {{"study_id", study_.config().study_id}, {"sessions", sessions}};
  }

 private:
  struct Slot {
    std::mutex mutex;
    Session* session = nullptr;
    std::string token;
    std::int64_t in_seq = 0;
    std::int64_t out_seq = 0;
    std::unique_ptr<event_log::Writer> log;
  };

  // Present while rebuilding a session from its log.
  struct Replay {
    std::string token;
    std::deque<wire::json> expected_out;
    std::string origin;
    std::size_t outbound_seen = 0;
  };

  wire::Envelope error_env(std::string_view code, std::string_view message, const std::string& session_id = {}) {
    return {wire::type::kError, session_id, 0, wire::error_payload(code, message)};
  }

  void log_in(Slot& slot, const std::string& line, const std::optional<wire::Envelope>& env, Replay* replay,
              const std::string& token = {}) {
    if (replay || !slot.log) return;
    wire::json record{{"ts", event_log::iso8601(opts_.clock_ms())},
                      {"session_id", slot.session->id()},
                      {"seq", env ? env->seq : 0},
                      {"direction", "in"}};
    if (env) {
      try {
        record["message"] = wire::json::parse(line);
      } catch (const wire::json::exception&) {
        record["raw"] = line;
      }
    } else {
      record["raw"] = line;
    }
    if (!token.empty()) record["token"] = token;
    slot.log->append(record);
  }

  // Stamps, logs (or checks against the log during replay) and collects.
  void emit(Slot& slot, wire::Envelope env, std::vector<wire::Envelope>& out, Replay* replay) {
    env.session_id = slot.session->id();
    env.seq = ++slot.out_seq;
    if (replay) {
      const auto message = wire::to_json(env);
      ++replay->outbound_seen;
      if (!replay->expected_out.empty()) {
        if (replay->expected_out.front() != message)
          throw Error(ErrorKind::Data, replay->origin + ": replay diverged at outbound message seq " +
                                           std::to_string(env.seq));
        replay->expected_out.pop_front();
      }
    } else if (slot.log) {
      slot.log->append({{"ts", event_log::iso8601(opts_.clock_ms())},
                        {"session_id", slot.session->id()},
                        {"seq", env.seq},
                        {"direction", "out"},
                        {"message", wire::to_json(env)}});
    }
    out.push_back(std::move(env));
  }

  void emit_events(Slot& slot, const std::vector<SessionEvent>& events, std::vector<wire::Envelope>& out,
                   Replay* replay) {
    for (const auto& e : events) {
      auto enc = wire::encode(e);
      emit(slot, {enc.type, {}, 0, std::move(enc.payload)}, out, replay);
    }
  }

  Slot* find_slot(const std::string& session_id) {
    std::lock_guard lock{study_mutex_};
    const auto it = slots_.find(session_id);
    return it == slots_.end() ? nullptr : it->second.get();
  }

  std::vector<wire::Envelope> process(Connection& conn, const std::string& line, Replay* replay) {
    std::optional<wire::Envelope> env;
    std::string bad_request;
    try {
      env = wire::parse_envelope(line);
    } catch (const wire::BadRequest& e) {
      bad_request = e.what();
    }

    if (env && env->type == wire::type::kHello) return hello(conn, line, *env, replay);

    Slot* slot = conn.session_id.empty() ? nullptr : find_slot(conn.session_id);
    if (!slot) {
      if (!bad_request.empty()) return {error_env("bad_request", bad_request)};
      return {error_env("unknown_session", "send HELLO before other messages")};
    }

    std::lock_guard lock{slot->mutex};
    log_in(*slot, line, env, replay);
    std::vector<wire::Envelope> out;
    if (!env) {
      emit(*slot, error_env("bad_request", bad_request), out, replay);
      return out;
    }
    if (!env->session_id.empty() && env->session_id != slot->session->id()) {
      emit(*slot, error_env("bad_request", "session_id does not match the connection"), out, replay);
      return out;
    }
    if (env->seq <= slot->in_seq) {
      emit(*slot,
           error_env("stale_seq", "seq " + std::to_string(env->seq) + " is not above the last accepted seq " +
                                      std::to_string(slot->in_seq)),
           out, replay);
      return out;
    }
    slot->in_seq = env->seq;

    try {
      if (env->type == wire::type::kSubmitConsumption) {
        const auto s = wire::parse_submit(env->payload);
        emit_events(*slot, slot->session->submit_consumption(s.round, s.period, s.consumption), out, replay);
      } else if (env->type == wire::type::kQuestionnaireSubmit) {
        emit_events(*slot, slot->session->submit_questionnaire(wire::parse_answers(env->payload)), out, replay);
      } else {
        emit(*slot, error_env("bad_request", "unsupported message type '" + env->type + "'"), out, replay);
      }
    } catch (const wire::BadRequest& e) {
      emit(*slot, error_env("bad_request", e.what()), out, replay);
    } catch (const Error& e) {
      emit(*slot, error_env(to_string(e.kind()), e.what()), out, replay);
    }
    return out;
  }

  wire::json hello_payload(const Slot& slot, bool include_token) const {
    const auto& s = *slot.session;
    wire::json p{{"session_id", s.id()},
                 {"participant_id", s.record().participant_id},
                 {"study_id", study_.config().study_id},
                 {"ordering", to_string(s.record().ordering)},
                 {"phase", to_string(s.phase())},
                 {"client_seq", slot.in_seq}};
    if (include_token) p["token"] = slot.token;
    return p;
  }

  std::vector<wire::Envelope> hello(Connection& conn, const std::string& line, const wire::Envelope& env,
                                    Replay* replay) {
    const auto& p = env.payload;
    if (p.contains("session_id")) {
      if (!p["session_id"].is_string() || !p.contains("token") || !p["token"].is_string())
        return {error_env("bad_request", "resuming needs string fields 'session_id' and 'token'")};
      Slot* slot = find_slot(p["session_id"].get<std::string>());
      if (!slot || slot->token != p["token"].get<std::string>())
        return {error_env("unauthorized", "unknown session or wrong token")};
      std::lock_guard lock{slot->mutex};
      conn.session_id = slot->session->id();
      log_in(*slot, line, env, replay);
      std::vector<wire::Envelope> out;
      emit(*slot, {wire::type::kHello, {}, 0, hello_payload(*slot, false)}, out, replay);
      emit_events(*slot, slot->session->current_events(), out, replay);
      return out;
    }

    if (!p.contains("participant_id") || !p["participant_id"].is_string())
      return {error_env("bad_request", "HELLO needs 'participant_id' or 'session_id' + 'token'")};
    const auto participant = p["participant_id"].get<std::string>();
    if (!valid_participant_id(participant))
      return {error_env("bad_request", "participant_id must be 1-64 characters of [A-Za-z0-9_-]")};
    std::optional<Ordering> ordering;
    if (p.contains("ordering")) {
      if (!opts_.allow_ordering_override && !replay)
        return {error_env("bad_request", "this study does not accept a client-chosen ordering")};
      try {
        ordering = parse_ordering(p["ordering"].is_string() ? p["ordering"].get<std::string>() : "");
      } catch (const Error& e) {
        return {error_env("bad_request", e.what())};
      }
    }

    std::lock_guard study_lock{study_mutex_};
    Session* session;
    try {
      session = &study_.create_session(participant, ordering);
    } catch (const Error& e) {
      return {error_env(to_string(e.kind()), e.what())};
    }
    auto& slot = *(slots_[session->id()] = std::make_unique<Slot>());
    slot.session = session;
    slot.token = replay ? replay->token : opts_.make_token();
    if (!replay && !opts_.log_dir.empty())
      slot.log = std::make_unique<event_log::Writer>(opts_.log_dir / (session->id() + ".log"));

    std::lock_guard lock{slot.mutex};
    conn.session_id = session->id();
    log_in(slot, line, env, replay, slot.token);
    std::vector<wire::Envelope> out;
    emit(slot, {wire::type::kHello, {}, 0, hello_payload(slot, true)}, out, replay);
    emit_events(slot, session->opening_events(), out, replay);
    return out;
  }

  void recover() {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(opts_.log_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".log") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
      event_log::drop_torn_tail(file);
      const auto records = event_log::read(file);
      if (records.empty()) continue;
      Replay replay;
      replay.origin = file.string();
      const auto& first = records.front();
      if (first.value("direction", "") != "in" || !first.contains("token"))
        throw Error(ErrorKind::Data, file.string() + ": log must start with the session-creating HELLO");
      replay.token = first["token"].get<std::string>();

      Connection conn;
      std::size_t i = 0;
      while (i < records.size()) {
        const auto& rec = records[i++];
        if (rec.value("direction", "") != "in")
          throw Error(ErrorKind::Data, file.string() + ": outbound record without a preceding inbound one");
        for (; i < records.size() && records[i].value("direction", "") == "out"; ++i)
          replay.expected_out.push_back(records[i].at("message"));
        const std::string line = rec.contains("message") ? rec["message"].dump() : rec.at("raw").get<std::string>();
        process(conn, line, &replay);
        // Fewer replies logged than rebuilt is a crash between writes (the
        // rest were never sent); more logged than rebuilt is divergence.
        if (!replay.expected_out.empty())
          throw Error(ErrorKind::Data, file.string() + ": log holds replies the engine no longer produces");
      }
      Slot* slot = find_slot(conn.session_id);
      if (!slot) throw Error(ErrorKind::Data, file.string() + ": log did not create a session");
      slot->log = std::make_unique<event_log::Writer>(file);
      ++recovered_;
    }
  }

  Study study_;
  ServiceOptions opts_;
  mutable std::mutex study_mutex_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  std::size_t recovered_ = 0;
};

}  // namespace lifecycle
