#include "podstore/podstore.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "podstore/bench.hpp"
#include "podstore/error.hpp"

using namespace podstore;

struct ps_session {
  std::unique_ptr<Harness> harness;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
ps_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return PS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<ps_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PS_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PS_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return PS_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void hand_out(const Bytes& b, uint8_t** bytes, size_t* len) {
  auto* p = static_cast<uint8_t*>(std::malloc(b.empty() ? 1 : b.size()));
  if (!p) throw std::bad_alloc();
  if (!b.empty()) std::memcpy(p, b.data(), b.size());
  *bytes = p;
  *len = b.size();
}

RunOptions run_options(const ps_config* c) {
  ps_config d;
  ps_config_default(&d);
  if (!c) c = &d;
  RunOptions o;
  o.backend = c->backend ? c->backend : "mem";
  o.dir = c->dir ? c->dir : "";
  o.store.optimizer = c->optimizer ? c->optimizer : "lga";
  if (!is_strategy(o.store.optimizer)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown optimizer '" + o.store.optimizer + "'");
  }
  o.store.params.c_pod = c->c_pod;
  o.store.params.max_pod_depth = c->max_pod_depth;
  o.store.page_size = c->page_size;
  o.store.thesaurus_bytes = c->thesaurus_bytes;
  o.store.seed = c->seed;
  o.seed = c->seed;
  o.async = c->async_save != 0;
  o.pod_delay = std::chrono::microseconds(c->pod_delay_us);
  require(o.store.params.c_pod >= 0, "c_pod must be non-negative");
  require(o.store.params.max_pod_depth >= 0, "max_pod_depth must be non-negative");
  require(o.store.page_size > 0, "page_size must be positive");
  require(o.backend == "mem" || !o.dir.empty(), "dir backend needs a directory");
  return o;
}

NameSet parse_names(const char* text, const ObjectGraph& ns) {
  NameSet names;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) names.insert(word);
    word.clear();
  };
  for (const char* p = text ? text : ""; *p; ++p) {
    if (*p == ',' || *p == ' ') {
      flush();
    } else {
      word += *p;
    }
  }
  flush();
  if (names.empty()) {
    for (const auto& [name, id] : ns.variables()) names.insert(name);
  }
  return names;
}

std::string report(const RunMetrics& m, ps_format format) {
  return format == PS_FORMAT_JSON ? to_json(m) + "\n" : to_csv(m);
}

std::string report(const std::vector<RunMetrics>& runs, ps_format format) {
  if (format == PS_FORMAT_JSON) return to_json(runs) + "\n";
  std::string out = csv_header();
  for (const auto& m : runs) out += to_csv(m, false);
  return out;
}

std::vector<RunMetrics> replay(const std::vector<NamedScript>& scripts, const RunOptions& base) {
  std::vector<RunMetrics> runs;
  for (const auto& s : scripts) {
    RunOptions o = base;
    o.label = s.label;
    if (o.backend == "dir") o.dir = base.dir + "/" + s.label;
    runs.push_back(run_script(s.script, o));
  }
  return runs;
}

std::string bundle(const std::vector<NamedScript>& scripts) {
  std::string out;
  for (const auto& s : scripts) out += "# " + s.label + "\n" + render(s.script);
  return out;
}

}  // namespace

extern "C" {

const char* ps_last_error(void) { return g_last_error.c_str(); }

const char* ps_status_name(ps_status status) {
  if (status == PS_OK) return "Ok";
  if (status == PS_INTERNAL) return "Internal";
  if (status < PS_INVALID_ARGUMENT || status > PS_LOCALITY_VIOLATION) return "Unknown";
  return error_code_name(static_cast<ErrorCode>(status));
}

void ps_free(void* p) { std::free(p); }

void ps_config_default(ps_config* config) {
  if (!config) return;
  const StoreConfig s;
  config->backend = "mem";
  config->dir = "";
  config->optimizer = "lga";
  config->c_pod = s.params.c_pod;
  config->max_pod_depth = s.params.max_pod_depth;
  config->page_size = s.page_size;
  config->thesaurus_bytes = s.thesaurus_bytes;
  config->async_save = 0;
  config->seed = 0;
  config->pod_delay_us = 0;
}

ps_status ps_session_open(const ps_config* config, ps_session** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = nullptr;
    RunOptions o = run_options(config);
    o.keep_snapshots = false;
    auto s = std::make_unique<ps_session>();
    s->harness = std::make_unique<Harness>(o);
    *out = s.release();
  });
}

void ps_session_close(ps_session* session) { delete session; }

ps_status ps_session_exec(ps_session* session, const char* script) {
  return guarded([&] {
    require(session && script, "null argument");
    session->harness->run(parse_script(script));
  });
}

ps_status ps_session_last_time(ps_session* session, uint64_t* time_id) {
  return guarded([&] {
    require(session && time_id, "null argument");
    session->harness->settle();
    const auto times = session->harness->store().list_time_ids();
    if (times.empty()) throw Error(ErrorCode::kNotFound, "no checkpoint yet");
    *time_id = times.back();
  });
}

ps_status ps_session_join(ps_session* session) {
  return guarded([&] {
    require(session != nullptr, "null session");
    session->harness->settle();
  });
}

ps_status ps_session_serialize(ps_session* session, const char* names, uint8_t** bytes,
                               size_t* len) {
  return guarded([&] {
    require(session && bytes && len, "null argument");
    session->harness->settle();
    const ObjectGraph& ns = session->harness->ns();
    hand_out(canonical_serialize(ns, parse_names(names, ns)), bytes, len);
  });
}

ps_status ps_session_load(ps_session* session, const char* names, uint64_t time_id,
                          uint8_t** bytes, size_t* len) {
  return guarded([&] {
    require(session && bytes && len, "null argument");
    NameSet wanted = parse_names(names, ObjectGraph{});
    if (wanted.empty()) {
      for (const auto& [name, ref] : session->harness->store().manifest(time_id).variable_roots) {
        wanted.insert(name);
      }
      for (const auto& [name, ref] : session->harness->store().manifest(time_id).carried_forward) {
        wanted.insert(name);
      }
    }
    ObjectGraph g = session->harness->load(wanted, time_id);
    hand_out(canonical_serialize(g, wanted), bytes, len);
  });
}

ps_status ps_session_metrics(ps_session* session, ps_format format, char** out) {
  return guarded([&] {
    require(session && out, "null argument");
    *out = dup_string(report(session->harness->finish(), format));
  });
}

ps_status ps_run_script(const ps_config* config, const char* script, ps_format format,
                        char** out) {
  return guarded([&] {
    require(script && out, "null argument");
    *out = dup_string(report(run_script(parse_script(script), run_options(config)), format));
  });
}

ps_status ps_gen_mutation_sweep(double scale, uint64_t seed, char** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    require(scale > 0 && scale <= 1, "scale must be in (0, 1]");
    *out = dup_string(bundle(gen_mutation_sweep(scale, seed)));
  });
}

ps_status ps_gen_scale_sweep(int32_t include_large, char** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = dup_string(bundle(gen_scale_sweep(include_large != 0)));
  });
}

ps_status ps_sweep_mutation(const ps_config* config, double scale, ps_format format, char** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    require(scale > 0 && scale <= 1, "scale must be in (0, 1]");
    const RunOptions o = run_options(config);
    *out = dup_string(report(replay(gen_mutation_sweep(scale, o.seed == 0 ? 1 : o.seed), o), format));
  });
}

ps_status ps_sweep_scale(const ps_config* config, int32_t include_large, ps_format format,
                         char** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = dup_string(report(replay(gen_scale_sweep(include_large != 0), run_options(config)), format));
  });
}

ps_status ps_compare(const ps_config* config, const char* strategies, const char* workload,
                     double scale, char** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    std::vector<std::string> list;
    std::stringstream in(strategies ? strategies : "");
    for (std::string s; std::getline(in, s, ',');) {
      if (!s.empty()) list.push_back(s);
    }
    if (list.empty()) list = strategy_names();
    const std::string w = workload ? workload : "mutation";
    const RunOptions o = run_options(config);
    std::vector<NamedScript> scripts;
    if (w == "mutation") {
      require(scale > 0 && scale <= 1, "scale must be in (0, 1]");
      scripts = gen_mutation_sweep(scale, o.seed == 0 ? 1 : o.seed);
    } else if (w == "scale") {
      scripts = gen_scale_sweep(true);
    } else if (w == "small") {
      scripts = gen_scale_sweep(false);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown workload '" + w + "'");
    }
    *out = dup_string(compare_table_csv(compare_optimizers(scripts, list, o)));
  });
}

ps_status ps_verify(const ps_config* config, int32_t* all_passed, char** out) {
  return guarded([&] {
    require(all_passed && out, "null argument");
    const RunOptions o = run_options(config);
    VerifyOptions v;
    v.seed = o.seed == 0 ? v.seed : o.seed;
    v.params = o.store.params;
    bool ok = true;
    std::string text;
    for (const auto& c : verify(v)) {
      ok = ok && c.passed;
      text += std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail + "\n";
    }
    *all_passed = ok ? 1 : 0;
    *out = dup_string(text);
  });
}

}  // extern "C"
