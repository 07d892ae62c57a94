#pragma once

// Trial-conduct sessions behind the HTTP API. Each session owns an
// append-only JSONL log under the data directory; every mutation is written
// (and fsync'd) before the caller sees the reply, and a restart replays the
// logs to rebuild state. Replies are remembered by request id so a repeated
// POST returns the original answer.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "seamless/analysis.hpp"
#include "seamless/dose_finding.hpp"
#include "seamless/error.hpp"
#include "seamless/io/json.hpp"

namespace seamless {

struct ServiceResponse {
  int status = 200;
  json body;

  bool operator==(const ServiceResponse& o) const { return status == o.status && body == o.body; }
};

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::PhaseViolation:
    case ErrorCode::InsufficientCandidates: return 409;
    case ErrorCode::IoError: return 500;
    default: return 422;
  }
}

inline ServiceResponse error_response(ErrorCode c, const std::string& msg) {
  return {http_status(c), json{{"error", {{"code", std::string(code_name(c))}, {"message", msg}}}}};
}

struct TrialSession {
  std::string id;
  DesignParams design;
  CovariateSchema schema;
  KernelConfig kernel;
  BetaPrior prior;
  double weight_alpha = 0.05;
  TrialState state;
  std::vector<PatientRecord> phase1_patients;  // group = dose level
  std::optional<Phase2Selection> selection;
  std::vector<PatientRecord> phase2_patients;  // group = dose level
  int backfills_since_cohort = 0;
  std::string created_at;
  std::string updated_at;
  std::map<std::string, ServiceResponse> replies;  // by request id
  std::uint64_t seq = 0;

  std::string stage() const { return selection ? "phase2" : "phase1"; }
};

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

inline bool flag(const json& v, const char* what) {
  if (v.is_boolean()) return v.get<bool>();
  require(v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1),
          ErrorCode::SchemaMismatch, std::string(what) + " must be 0/1 or a boolean");
  return v.get<int>() == 1;
}

// {"eff": .., "tox": ..} or [eff, tox]
inline Outcome outcome_from_any(const json& j) {
  if (j.is_array()) {
    require(j.size() == 2, ErrorCode::SchemaMismatch, "outcome pair must be [eff, tox]");
    return {flag(j[0], "eff"), flag(j[1], "tox")};
  }
  require(j.is_object() && j.contains("eff") && j.contains("tox"), ErrorCode::SchemaMismatch,
          "outcome must be {\"eff\", \"tox\"} or [eff, tox]");
  return {flag(j.at("eff"), "eff"), flag(j.at("tox"), "tox")};
}

inline int dose_from_any(const json& j) {
  if (j.is_number_integer()) return j.get<int>();
  require(j.is_string(), ErrorCode::SchemaMismatch, "arm must be a dose level");
  const auto s = j.get<std::string>();
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(), ErrorCode::SchemaMismatch, "arm '" + s + "' is not a dose level");
  return v;
}

inline std::vector<RawRecord> covariates_for(const TrialSession& s, const json& body,
                                             std::size_t count) {
  std::vector<RawRecord> out;
  if (!body.contains("covariates")) {
    require(s.schema.size() == 0, ErrorCode::SchemaMismatch, "covariates are required");
    out.resize(count);
    return out;
  }
  const auto& c = body.at("covariates");
  require(c.is_array() && c.size() == count, ErrorCode::SchemaMismatch,
          "covariates must list one record per patient");
  for (const auto& r : c) {
    auto rec = record_from_json(s.schema, r);
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(s.schema.encoded_dim()));
    encode_record(s.schema, rec, row);
    out.push_back(std::move(rec));
  }
  return out;
}

inline KernelConfig kernel_from_json(const json& j) {
  KernelConfig k;
  if (j.contains("bandwidth") && !(j.at("bandwidth").is_string() && j.at("bandwidth") == "median")) {
    k.bandwidth = BandwidthRule::Fixed;
    k.sigma = j.at("bandwidth").get<double>();
    require(k.sigma > 0, ErrorCode::InvalidParams, "bandwidth must be positive or \"median\"");
  }
  k.mmd_max = j.value("mmd_max", k.mmd_max);
  const auto scale = j.value("weight_scale", std::string("squared"));
  require(scale == "squared" || scale == "root", ErrorCode::InvalidParams,
          "weight_scale must be \"squared\" or \"root\"");
  k.scale = scale == "root" ? WeightScale::Root : WeightScale::Squared;
  return k;
}

inline json kernel_to_json(const KernelConfig& k) {
  return json{{"bandwidth", k.bandwidth == BandwidthRule::Fixed ? json(k.sigma) : json("median")},
              {"mmd_max", k.mmd_max},
              {"weight_scale", k.scale == WeightScale::Root ? "root" : "squared"}};
}

inline json arm_counts_json(const TrialSession& s) {
  json arms = json::array();
  if (!s.selection) return arms;
  for (int d : {s.selection->first, s.selection->second}) {
    int n = 0, e = 0;
    for (const auto& p : s.phase2_patients)
      if (p.group == std::to_string(d)) {
        ++n;
        e += p.response ? 1 : 0;
      }
    arms.push_back({{"dose", d}, {"n", n}, {"responses", e}});
  }
  return arms;
}

}  // namespace detail

/// Snapshot returned by GET /trials/{id}.
inline json session_json(const TrialSession& s) {
  json j{{"id", s.id},
         {"stage", s.stage()},
         {"created_at", s.created_at},
         {"updated_at", s.updated_at},
         {"design", s.design},
         {"schema", schema_to_json(s.schema)},
         {"kernel", detail::kernel_to_json(s.kernel)},
         {"prior", {{"a0", s.prior.a0}, {"b0", s.prior.b0}}},
         {"state", trial_state_json(s.state, s.design)},
         {"events", s.state.events}};
  j["selection"] = s.selection ? json{{"first", s.selection->first}, {"second", s.selection->second}}
                               : json(nullptr);
  j["phase2_arms"] = detail::arm_counts_json(s);
  return j;
}

class TrialService {
 public:
  explicit TrialService(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
    std::filesystem::create_directories(dir_);
    recover();
  }

  const std::filesystem::path& data_dir() const { return dir_; }

  std::size_t session_count() const {
    std::shared_lock lk(map_mu_);
    return sessions_.size();
  }

  ServiceResponse create(const json& body, const std::string& request_id = {}) {
    return guard([&] {
      std::unique_lock lk(map_mu_);
      if (!request_id.empty()) {
        if (auto it = create_ids_.find(request_id); it != create_ids_.end())
          return sessions_.at(it->second)->session.replies.at(request_id);
      }
      auto entry = std::make_shared<Entry>();
      entry->session.id = new_id();
      const auto at = detail::utc_now();
      auto reply = apply(entry->session, "create", body, at);
      append(entry->session, "create", body, request_id, at, reply);
      if (!request_id.empty()) {
        entry->session.replies[request_id] = reply;
        create_ids_[request_id] = entry->session.id;
      }
      sessions_[entry->session.id] = entry;
      return reply;
    });
  }

  ServiceResponse get(const std::string& id) const {
    return guard([&] {
      auto e = find(id);
      std::lock_guard lk(e->mu);
      return ServiceResponse{200, session_json(e->session)};
    });
  }

  ServiceResponse cohort(const std::string& id, const json& body, const std::string& rid = {}) {
    return mutate(id, "cohort", body, rid);
  }
  ServiceResponse add_backfill(const std::string& id, const json& body, const std::string& rid = {}) {
    return mutate(id, "backfill", body, rid);
  }
  ServiceResponse finalize(const std::string& id, const std::string& rid = {}) {
    return mutate(id, "finalize", json::object(), rid);
  }
  ServiceResponse phase2(const std::string& id, const json& body, const std::string& rid = {}) {
    return mutate(id, "phase2", body, rid);
  }

  ServiceResponse analysis(const std::string& id, double tau, double alpha,
                           std::optional<double> fixed_w = std::nullopt) const {
    return guard([&] {
      auto e = find(id);
      std::lock_guard lk(e->mu);
      const auto& s = e->session;
      require(s.selection.has_value(), ErrorCode::PhaseViolation, "Phase II doses not selected yet");
      require(!s.phase2_patients.empty(), ErrorCode::PhaseViolation, "no Phase II records yet");
      AnalysisOptions opt;
      opt.kernel = s.kernel;
      opt.prior = s.prior;
      opt.tau = tau;
      opt.alpha = alpha;
      opt.weight_alpha = s.weight_alpha;
      opt.fixed_w = fixed_w;
      std::vector<PatientRecord> p1;
      for (const auto& p : s.phase1_patients)
        if (p.group == std::to_string(s.selection->first) || p.group == std::to_string(s.selection->second))
          p1.push_back(p);
      const auto res = analyze(s.schema, p1, s.phase2_patients, opt);
      json arms = json::array();
      for (const auto& d : res) arms.push_back(d);
      return ServiceResponse{200, json{{"id", s.id},
                                       {"tau", tau},
                                       {"alpha", alpha},
                                       {"fixed_w", fixed_w ? json(*fixed_w) : json(nullptr)},
                                       {"arms", arms}}};
    });
  }

 private:
  struct Entry {
    std::mutex mu;
    TrialSession session;
  };

  template <class F>
  static ServiceResponse guard(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      return error_response(e.code(), e.what());
    } catch (const json::exception& e) {
      return error_response(ErrorCode::SchemaMismatch, e.what());
    }
  }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lk(map_mu_);
    auto it = sessions_.find(id);
    require(it != sessions_.end(), ErrorCode::NotFound, "no session '" + id + "'");
    return it->second;
  }

  ServiceResponse mutate(const std::string& id, const std::string& op, const json& body,
                         const std::string& rid) {
    return guard([&] {
      auto e = find(id);
      std::lock_guard lk(e->mu);
      auto& live = e->session;
      if (!rid.empty())
        if (auto it = live.replies.find(rid); it != live.replies.end()) return it->second;
      TrialSession next = live;
      const auto at = detail::utc_now();
      auto reply = apply(next, op, body, at);
      append(next, op, body, rid, at, reply);
      if (!rid.empty()) next.replies[rid] = reply;
      live = std::move(next);
      return reply;
    });
  }

  // Pure state transition shared by live requests and recovery. Throws on
  // rejected requests, which are never logged.
  static ServiceResponse apply(TrialSession& s, const std::string& op, const json& body,
                               const std::string& at) {
    require(body.is_object(), ErrorCode::SchemaMismatch, "request body must be a JSON object");
    if (op == "create") {
      const json& d = body.contains("design") ? body.at("design") : body;
      require(d.is_object(), ErrorCode::SchemaMismatch, "design must be an object");
      s.design = d.get<DesignParams>();
      s.design.validate();
      s.schema = body.contains("schema") ? schema_from_json(body.at("schema")) : oncology_baseline_schema();
      if (body.contains("kernel")) s.kernel = detail::kernel_from_json(body.at("kernel"));
      if (body.contains("prior")) {
        s.prior.a0 = body.at("prior").value("a0", s.prior.a0);
        s.prior.b0 = body.at("prior").value("b0", s.prior.b0);
        require(s.prior.a0 > 0 && s.prior.b0 > 0, ErrorCode::InvalidParams, "prior must be positive");
      }
      s.weight_alpha = body.value("weight_alpha", s.weight_alpha);
      require(s.weight_alpha > 0 && s.weight_alpha < 1, ErrorCode::InvalidAlpha,
              "weight_alpha must lie in (0,1)");
      s.state = start_trial(s.design);
      s.created_at = s.updated_at = at;
      return {201, session_json(s)};
    }
    if (op == "cohort") {
      require(!s.selection, ErrorCode::PhaseViolation, "Phase I is closed");
      require(body.contains("outcomes") && body.at("outcomes").is_array(), ErrorCode::SchemaMismatch,
              "outcomes must be a list");
      std::vector<Outcome> outcomes;
      for (const auto& o : body.at("outcomes")) outcomes.push_back(detail::outcome_from_any(o));
      const auto cov = detail::covariates_for(s, body, outcomes.size());
      const int dose = s.state.current_dose;
      s.state = step(std::move(s.state), outcomes, s.design);
      for (std::size_t i = 0; i < outcomes.size(); ++i)
        s.phase1_patients.push_back({cov[i], std::to_string(dose), outcomes[i].eff});
      s.backfills_since_cohort = 0;
      s.updated_at = at;
      json ev = std::get<CohortEvent>(s.state.events.back());
      return {200, json{{"decision", ev}, {"state", trial_state_json(s.state, s.design)}}};
    }
    if (op == "backfill") {
      require(!s.selection, ErrorCode::PhaseViolation, "Phase I is closed");
      require(s.backfills_since_cohort < s.design.backfill_per_step, ErrorCode::PhaseViolation,
              "backfill limit for this cohort step reached");
      require(body.contains("outcome"), ErrorCode::SchemaMismatch, "outcome is required");
      const auto o = detail::outcome_from_any(body.at("outcome"));
      std::vector<RawRecord> cov;
      if (body.contains("covariates")) {
        json one = body;
        one["covariates"] = json::array({body.at("covariates")});
        cov = detail::covariates_for(s, one, 1);
      } else {
        cov = detail::covariates_for(s, json::object(), 1);
      }
      s.state = backfill(std::move(s.state), o, s.design);
      const auto& ev = std::get<BackfillEvent>(s.state.events.back());
      s.phase1_patients.push_back({cov[0], std::to_string(ev.dose), o.eff});
      s.backfills_since_cohort++;
      s.updated_at = at;
      return {200, json{{"backfill", ev}, {"dose_state", s.state.dose(ev.dose)},
                        {"state", trial_state_json(s.state, s.design)}}};
    }
    if (op == "finalize") {
      require(!s.selection, ErrorCode::PhaseViolation, "Phase II doses already selected");
      const auto sel = select_phase2_doses(s.state.doses, s.design);
      s.selection = sel;
      s.updated_at = at;
      json util = json::object();
      for (int d : {sel.first, sel.second})
        util[std::to_string(d)] = utility_score(s.state.dose(d), s.design);
      return {200, json{{"selection", {{"first", sel.first}, {"second", sel.second}}},
                        {"utilities", util},
                        {"phase1_phase", to_string(s.state.phase)}}};
    }
    if (op == "phase2") {
      require(s.selection.has_value(), ErrorCode::PhaseViolation, "finalize Phase I before Phase II entry");
      require(body.contains("records") && body.at("records").is_array(), ErrorCode::SchemaMismatch,
              "records must be a list");
      std::vector<PatientRecord> add;
      for (const auto& r : body.at("records")) {
        require(r.is_object() && r.contains("arm") && r.contains("response"), ErrorCode::SchemaMismatch,
                "each record needs arm, covariates and response");
        const int arm = detail::dose_from_any(r.at("arm"));
        require(arm == s.selection->first || arm == s.selection->second, ErrorCode::SchemaMismatch,
                "arm " + std::to_string(arm) + " is not a selected Phase II dose");
        json one{{"covariates", json::array({r.value("covariates", json::object())})}};
        if (!r.contains("covariates")) one = json::object();
        const auto cov = detail::covariates_for(s, one, 1);
        add.push_back({cov[0], std::to_string(arm), detail::flag(r.at("response"), "response")});
      }
      s.phase2_patients.insert(s.phase2_patients.end(), add.begin(), add.end());
      s.updated_at = at;
      return {200, json{{"accepted", add.size()}, {"arms", detail::arm_counts_json(s)}}};
    }
    fail(ErrorCode::SchemaMismatch, "unknown operation '" + op + "'");
  }

  std::filesystem::path log_path(const std::string& id) const { return dir_ / (id + ".jsonl"); }

  void append(TrialSession& s, const std::string& op, const json& body, const std::string& rid,
              const std::string& at, const ServiceResponse& reply) {
    json line{{"seq", s.seq + 1}, {"op", op},    {"request_id", rid},
              {"at", at},         {"body", body}, {"reply", {{"status", reply.status}, {"body", reply.body}}}};
    const auto text = line.dump() + "\n";
    const auto path = log_path(s.id);
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    require(fd >= 0, ErrorCode::IoError, "cannot open log " + path.string());
    std::size_t off = 0;
    while (off < text.size()) {
      const auto n = ::write(fd, text.data() + off, text.size() - off);
      if (n <= 0) {
        ::close(fd);
        fail(ErrorCode::IoError, "write to " + path.string() + " failed");
      }
      off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    s.seq++;
  }

  void recover() {
    for (const auto& f : std::filesystem::directory_iterator(dir_)) {
      if (f.path().extension() != ".jsonl") continue;
      const auto id = f.path().stem().string();
      if (!detail::valid_session_id(id)) continue;
      auto entry = std::make_shared<Entry>();
      entry->session.id = id;
      std::ifstream in(f.path());
      std::string text;
      bool created = false;
      while (std::getline(in, text)) {
        if (text.empty()) continue;
        json line;
        try {
          line = json::parse(text);
        } catch (const json::exception&) {
          break;  // torn final write: the request was never acknowledged
        }
        const auto op = line.at("op").get<std::string>();
        const ServiceResponse logged{line.at("reply").at("status").get<int>(), line.at("reply").at("body")};
        const auto reply = apply(entry->session, op, line.at("body"), line.at("at").get<std::string>());
        require(reply == logged, ErrorCode::IoError,
                f.path().string() + ": entry " + std::to_string(entry->session.seq + 1) + " does not replay");
        entry->session.seq = line.at("seq").get<std::uint64_t>();
        const auto rid = line.at("request_id").get<std::string>();
        if (!rid.empty()) {
          entry->session.replies[rid] = reply;
          if (op == "create") create_ids_[rid] = id;
        }
        created = created || op == "create";
      }
      if (created) sessions_[id] = entry;
    }
  }

  std::string new_id() {
    std::uniform_int_distribution<std::uint64_t> dist;
    while (true) {
      std::ostringstream ss;
      ss << std::hex;
      ss.width(16);
      ss.fill('0');
      ss << dist(rng_);
      const auto id = ss.str();
      if (!sessions_.count(id) && !std::filesystem::exists(log_path(id))) return id;
    }
  }

  std::filesystem::path dir_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::map<std::string, std::string> create_ids_;
  std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace seamless
