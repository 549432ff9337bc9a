// Exercises the shared library through its C interface only.
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "podstore/podstore.h"

namespace {

int failures = 0;

void check(bool ok, const char* what) {
  if (!ok) {
    std::printf("FAIL %s (%s)\n", what, ps_last_error());
    ++failures;
  }
}

}  // namespace

int main() {
  ps_config c;
  ps_config_default(&c);
  check(c.c_pod == 1200.0 && c.max_pod_depth == 3 && c.page_size == 1024, "defaults");

  ps_session* s = nullptr;
  check(ps_session_open(&c, &s) == PS_OK && s != nullptr, "open");
  check(ps_session_exec(s, "make_lists d 5 5 10\nassign e d\ncheckpoint\n") == PS_OK, "exec");
  uint64_t t = 0;
  check(ps_session_last_time(s, &t) == PS_OK && t == 1, "time id");

  uint8_t* live = nullptr;
  size_t live_len = 0;
  check(ps_session_serialize(s, "", &live, &live_len) == PS_OK, "serialize");
  check(ps_session_exec(s, "mutate_fraction d 1 4\ncheckpoint\n") == PS_OK, "mutate");
  uint8_t* loaded = nullptr;
  size_t loaded_len = 0;
  check(ps_session_load(s, "d,e", 1, &loaded, &loaded_len) == PS_OK, "load");
  check(loaded_len == live_len && std::memcmp(loaded, live, live_len) == 0, "load matches");
  ps_free(live);
  ps_free(loaded);

  check(ps_session_load(s, "d", 99, &loaded, &loaded_len) == PS_UNKNOWN_TIME_ID, "unknown time");
  check(std::strlen(ps_last_error()) > 0, "error text");
  check(ps_session_exec(s, "mutate_fraction d 2 0") == PS_PARSE_ERROR, "parse error");
  check(ps_session_exec(s, "sum nope") == PS_UNKNOWN_VARIABLE, "unknown variable");
  check(std::strcmp(ps_status_name(PS_TOO_LARGE), "TooLarge") == 0, "status name");

  char* metrics = nullptr;
  check(ps_session_metrics(s, PS_FORMAT_CSV, &metrics) == PS_OK, "metrics");
  check(metrics && std::string(metrics).rfind("label,optimizer,", 0) == 0, "metrics header");
  ps_free(metrics);
  ps_session_close(s);

  c.optimizer = "bogus";
  check(ps_session_open(&c, &s) == PS_INVALID_ARGUMENT, "bad optimizer");
  ps_config_default(&c);
  c.optimizer = "exhaustive";
  char* out = nullptr;
  check(ps_run_script(&c, "make_lists d 40 2 2\ncheckpoint\n", PS_FORMAT_CSV, &out) == PS_TOO_LARGE,
        "too large");

  ps_config_default(&c);
  c.async_save = 1;
  check(ps_run_script(&c, "make_lists d 3 3 3\ncheckpoint\nsum d\ncheckpoint\nload 1 d\n",
                      PS_FORMAT_JSON, &out) == PS_OK,
        "async run");
  check(out && std::string(out).find("\"load_mismatches\": 0") != std::string::npos, "json");
  ps_free(out);

  check(ps_gen_mutation_sweep(0.01, 1, &out) == PS_OK, "gen sweep");
  check(out && std::string(out).find("make_lists data 100 1000 100") != std::string::npos,
        "sweep text");
  ps_free(out);
  check(ps_gen_mutation_sweep(0.0, 1, &out) == PS_INVALID_ARGUMENT, "bad scale");

  ps_config_default(&c);
  check(ps_compare(&c, "lga,bundle-all,exhaustive", "small", 0, &out) == PS_OK, "compare");
  check(out && std::string(out).find("exhaustive") != std::string::npos, "compare rows");
  ps_free(out);

  std::printf("%s (%d failures)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
