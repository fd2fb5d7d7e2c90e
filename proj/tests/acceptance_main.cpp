// Acceptance suite runner: executes every acceptance criterion at its pinned
// tolerance and prints one pass/fail line per criterion. Exit status is the
// number of failed criteria.
//
// Usage: acceptance [--seed S] [--threads N] [--criteria 1,2,5]

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "bbmlab/acceptance.hpp"

int main(int argc, char** argv) {
  using namespace bbm::experiments;
  RunContext ctx;
  std::vector<int> ids = all_criterion_ids();
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--seed" && i + 1 < argc) {
      ctx.seed = std::strtoull(argv[++i], nullptr, 10);
    } else if (arg == "--threads" && i + 1 < argc) {
      ctx.threads = std::atoi(argv[++i]);
    } else if (arg == "--criteria" && i + 1 < argc) {
      ids.clear();
      const char* p = argv[++i];
      while (*p) {
        ids.push_back(std::atoi(p));
        while (*p && *p != ',') ++p;
        if (*p == ',') ++p;
      }
    } else {
      std::fprintf(stderr, "unknown argument: %s\n", arg.c_str());
      return 2;
    }
  }
  const char* env_threads = std::getenv("BBMLAB_THREADS");
  if (env_threads) ctx.threads = std::atoi(env_threads);

  std::printf("acceptance suite: %zu criteria, seed %llu, %d threads\n",
              ids.size(), static_cast<unsigned long long>(ctx.seed),
              ctx.threads);
  const auto results = run_criteria(ids, ctx);
  int failed = 0;
  double total = 0.0;
  for (const auto& r : results) {
    failed += r.pass ? 0 : 1;
    total += r.seconds;
  }
  std::printf("%zu criteria, %d failed, %.0f s total\n", results.size(), failed,
              total);
  return failed;
}
