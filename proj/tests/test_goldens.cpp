// Seeded golden behaviors on the default toy benchmark (seed 0).
#include <cstdio>
#include <numeric>

#include "doctest.h"
#include "tagclip/harness.hpp"

using namespace tagclip;

TEST_CASE("default run halves its smoothed loss") {
  const RunConfig c;
  const Dataset d = make_dataset(c);
  const RunResult r = train(c, d).result;
  REQUIRE(r.trace.size() == c.steps);
  const double start = smoothed_total(r.trace, 0, 20);
  const double end = smoothed_total(r.trace, c.steps - 20, 20);
  std::printf("smoothed loss start %.4f end %.4f\n", start, end);
  CHECK(end < 0.5 * start);
}

TEST_CASE("pseudo labels appear within 50 post-warmup steps at threshold 0.8") {
  RunConfig c;
  c.protocol = Protocol::transductive;
  const Dataset d = make_dataset(c);
  const RunResult r = train(c, d).result;
  REQUIRE(r.pseudo_pixels.size() >= 50);
  const std::size_t early = std::accumulate(r.pseudo_pixels.begin(), r.pseudo_pixels.begin() + 50, std::size_t{0});
  const std::size_t total = std::accumulate(r.pseudo_pixels.begin(), r.pseudo_pixels.end(), std::size_t{0});
  std::printf("pseudo-labelled cells: first 50 steps %zu, all %zu\n", early, total);
  CHECK(early >= 1);
}

TEST_CASE("gamma = 0 has the lowest unseen mIoU of the sweep") {
  const RunConfig c;
  const Dataset d = make_dataset(c);
  const auto sweep = sweep_gamma(c, d, {0.0, 1.0, 10.0, 100.0});
  std::printf("%s", format_sweep_table(sweep).c_str());
  REQUIRE(sweep.size() == 4);
  for (std::size_t i = 1; i < sweep.size(); ++i)
    CHECK(sweep[0].result.report.miou_unseen < sweep[i].result.report.miou_unseen);
}
