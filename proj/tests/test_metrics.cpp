#include <grad/metrics.hpp>
#include <grad/tensor.hpp>

#include "doctest.h"

#include <vector>

using namespace grad::metrics;
using grad::Rng;

namespace {

// Brute-force Levenshtein over full DP table, kept independent of the
// implementation under test.
int64_t lev_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::vector<int64_t>> d(a.size() + 1, std::vector<int64_t>(b.size() + 1));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = int64_t(i);
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = int64_t(j);
  for (size_t i = 1; i <= a.size(); ++i)
    for (size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min(d[i - 1][j] + 1, d[i][j - 1] + 1);
      d[i][j] = std::min(d[i][j], d[i - 1][j - 1] + (a[i - 1] != b[j - 1] ? 1 : 0));
    }
  return d[a.size()][b.size()];
}

std::vector<int> random_labels(Rng& rng, int classes, size_t len) {
  std::vector<int> v(len);
  for (auto& x : v) x = int(rng.below(uint64_t(classes)));
  return v;
}

}  // namespace

TEST_CASE("frame accuracy") {
  CHECK(frame_accuracy({1, 2, 3}, {1, 2, 3}) == 100.0);
  CHECK(frame_accuracy({1, 1}, {2, 2}) == 0.0);
  CHECK(frame_accuracy({0, 0, 1, 1}, {0, 1, 1, 1}) == 75.0);
  CHECK_THROWS_AS(frame_accuracy({1}, {1, 2}), MetricsError);
}

TEST_CASE("edit score basics") {
  CHECK(edit_score({0, 0, 1, 1, 2}, {0, 1, 1, 2, 2}) == 100.0);  // same segment labels
  // truth segments [A,B,C] vs pred [A,C]: one deletion, normalized by 3
  CHECK(edit_score({0, 0, 2, 2}, {0, 1, 2, 2}) == doctest::Approx(100.0 * (1.0 - 1.0 / 3.0)));
  CHECK_THROWS_AS(edit_score({}, {1}), MetricsError);
}

TEST_CASE("edit score is duration invariant and symmetric") {
  // stretching segment durations does not change the score
  std::vector<int> truth = {0, 1, 1, 2};
  std::vector<int> stretched = {0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2};
  CHECK(edit_score(stretched, truth) == 100.0);

  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    auto a = random_labels(rng, 4, 1 + rng.below(30));
    auto b = random_labels(rng, 4, 1 + rng.below(30));
    CHECK(edit_score(a, b) == doctest::Approx(edit_score(b, a)));
  }
}

TEST_CASE("edit score matches brute-force DP on 1000 random pairs") {
  Rng rng(4242);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_labels(rng, 5, 1 + rng.below(40));
    auto b = random_labels(rng, 5, 1 + rng.below(40));
    std::vector<int> sa, sb;
    for (const auto& s : rle(a)) sa.push_back(s.label);
    for (const auto& s : rle(b)) sb.push_back(s.label);
    const double expect =
        100.0 * (1.0 - double(lev_oracle(sa, sb)) / double(std::max(sa.size(), sb.size())));
    CHECK(edit_score(a, b) == expect);  // exact: same integer arithmetic path
    CHECK(edit_score(a, b) >= 0.0);
    CHECK(edit_score(a, b) <= 100.0);
    CHECK((edit_score(a, b) == 100.0) == (sa == sb));
  }
}

TEST_CASE("prf binary toy") {
  // truth [A,A,B,B], pred [A,B,B,B]
  auto rep = prf({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
  CHECK(rep.per_class[0].precision == doctest::Approx(100.0));
  CHECK(rep.per_class[0].recall == doctest::Approx(50.0));
  CHECK(rep.per_class[1].precision == doctest::Approx(100.0 * 2 / 3));
  CHECK(rep.per_class[1].recall == doctest::Approx(100.0));
}

TEST_CASE("prf perfect prediction") {
  auto rep = evaluate_sequence({0, 1, 2, 2}, {0, 1, 2, 2}, 3);
  CHECK(rep.acc == 100.0);
  CHECK(rep.edit == 100.0);
  CHECK(rep.op == doctest::Approx(100.0));
  CHECK(rep.or_ == doctest::Approx(100.0));
  CHECK(rep.of1 == doctest::Approx(100.0));
  CHECK(rep.cp == doctest::Approx(100.0));
}

TEST_CASE("zero-division conventions") {
  // class 2 never predicted: precision 0 with flag, not NaN
  auto rep = prf({0, 0, 0}, {0, 0, 2}, 3);
  CHECK(rep.per_class[2].zero_pred);
  CHECK(rep.per_class[2].precision == 0.0);
  // class 1 absent from truth: flagged, excluded from averages
  CHECK(rep.per_class[1].zero_truth);
}

TEST_CASE("support-weighted OR equals frame accuracy when all classes present") {
  Rng rng(31337);
  for (int i = 0; i < 300; ++i) {
    std::vector<int> truth = random_labels(rng, 3, 60);
    truth[0] = 0;
    truth[1] = 1;
    truth[2] = 2;  // ensure presence
    auto pred = random_labels(rng, 3, 60);
    auto rep = prf(pred, truth, 3);
    CHECK(std::abs(rep.or_ - frame_accuracy(pred, truth)) < 1e-9);
  }
}

TEST_CASE("prf matches confusion-matrix oracle on 1000 random pairs") {
  Rng rng(777);
  for (int i = 0; i < 1000; ++i) {
    const int C = 2 + int(rng.below(4));
    auto truth = random_labels(rng, C, 20 + rng.below(60));
    auto pred = random_labels(rng, C, truth.size());
    auto rep = prf(pred, truth, C);

    // independent confusion-matrix arithmetic
    std::vector<std::vector<int64_t>> cm(C, std::vector<int64_t>(C, 0));
    for (size_t t = 0; t < truth.size(); ++t) cm[truth[t]][pred[t]]++;
    for (int c = 0; c < C; ++c) {
      int64_t tp = cm[c][c], fp = 0, fn = 0, sup = 0;
      for (int o = 0; o < C; ++o) {
        if (o != c) {
          fp += cm[o][c];
          fn += cm[c][o];
        }
        sup += cm[c][o];
      }
      if (tp + fp > 0)
        CHECK(rep.per_class[c].precision == doctest::Approx(100.0 * tp / double(tp + fp)));
      if (sup > 0) CHECK(rep.per_class[c].recall == doctest::Approx(100.0 * tp / double(tp + fn)));
      CHECK(rep.per_class[c].support == sup);
    }
  }
}

TEST_CASE("rle invariants") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    auto v = random_labels(rng, 3, 1 + rng.below(40));
    auto segs = rle(v);
    int64_t total = 0;
    for (size_t s = 0; s < segs.size(); ++s) {
      CHECK(segs[s].length >= 1);
      if (s > 0) CHECK(segs[s].label != segs[s - 1].label);
      total += segs[s].length;
    }
    CHECK(total == int64_t(v.size()));
  }
}

TEST_CASE("csv row format") {
  MetricsReport m;
  m.acc = 91.5;
  auto row = csv_row("full", "gauss_noise", 3, m);
  CHECK(row.substr(0, 20) == "full,gauss_noise,3,9");
  CHECK(csv_header() == "run,corruption,severity,acc,edit,op,or,of1,cp,cr,cf1");
}
