#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "ecurve/data.hpp"
#include "test_support.hpp"

using namespace ecurve;
using namespace ecurve::testing;

TEST_CASE("validate_wide: fully observed numeric data") {
  const NodeSpec spec = simple_spec(3, 1);
  const Table t = random_full_table(spec, 12, 99);
  const WideDataset ds = validate_wide(t, spec);
  for (int i = 0; i < ds.n_units(); ++i) {
    CHECK(ds.last_seen(i) == 3);
    for (int tt = 1; tt <= 4; ++tt) CHECK(ds.at_risk(i, tt) == 1.0);
  }
}

TEST_CASE("validate_wide: dropout at time 2 ends the record") {
  const NodeSpec spec = simple_spec(4, 1);
  Table t = random_full_table(spec, 3, 7);
  censor_at(t, spec, 1, 2);
  const WideDataset ds = validate_wide(t, spec);
  CHECK(ds.last_seen(1) == 2);
  CHECK(ds.last_seen(0) == 4);

  const WideDataset dsp = apply_policy(ds, Policy::identity());
  const LongDataset ld = to_long(dsp, 1);
  for (int row = 0; row < ld.n_rows(); ++row) {
    if (ld.unit(row) == 1) CHECK(ld.time(row) <= 2);
  }
  CHECK(ld.n_rows() == 4 + 2 + 4);
}

TEST_CASE("validate_wide: survival at-risk indicators match a linear event scan") {
  NodeSpec spec = simple_spec(4, 1, OutcomeKind::survival);
  Table t = empty_table(spec, 6);
  Rng rng(17);
  // Unit event patterns over y2..y5; unit 2 has the event recorded at y3.
  const std::vector<std::vector<double>> ys = {
      {1, 1, 1, 1}, {1, 0, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 0}, {1, 1, 0, 0}, {1, 1, 1, 0}};
  for (int i = 0; i < 6; ++i) {
    for (int tt = 1; tt <= 4; ++tt) {
      set_cell(t, "l" + std::to_string(tt), i, rng.bernoulli(0.5) ? 1.0 : 0.0);
      set_cell(t, "z" + std::to_string(tt), i, static_cast<double>(rng.next_u64() % 2));
      set_cell(t, "c" + std::to_string(tt), i, 1.0);
      set_cell(t, "r" + std::to_string(tt), i, 1.0);
      set_cell(t, "y" + std::to_string(tt + 1), i, ys[i][tt - 1]);
    }
  }
  const WideDataset ds = validate_wide(t, spec);
  for (int i = 0; i < 6; ++i) {
    // Reference: N_t = 0 iff some recorded event (Y_s = 0) at s <= t.
    for (int tt = 1; tt <= 5; ++tt) {
      bool event = false;
      for (int s = 2; s <= tt; ++s) {
        if (ys[i][s - 2] == 0.0) event = true;
      }
      CHECK(ds.at_risk(i, tt) == (event ? 0.0 : 1.0));
    }
  }
  // The spec case: event recorded at time 3 kills the risk set from 3 on.
  CHECK(ds.at_risk(1, 2) == 1.0);
  CHECK(ds.at_risk(1, 3) == 0.0);
  CHECK(ds.at_risk(1, 4) == 0.0);
  CHECK(ds.at_risk(1, 5) == 0.0);
}

TEST_CASE("validate_wide: errors and warnings") {
  const NodeSpec spec = simple_spec(2, 1);

  SUBCASE("missing column") {
    Table t = random_full_table(spec, 3, 1);
    t.names[0] = "renamed";
    CHECK_THROWS_WITH_AS(validate_wide(t, spec),
                         doctest::Contains("missing column"), std::runtime_error);
  }
  SUBCASE("non-binary censoring indicator") {
    Table t = random_full_table(spec, 3, 1);
    set_cell(t, "c1", 0, 2.0);
    CHECK_THROWS(validate_wide(t, spec));
  }
  SUBCASE("non-monotone censoring is a hard error") {
    Table t = random_full_table(spec, 3, 1);
    set_cell(t, "c1", 0, 0.0);
    set_cell(t, "c2", 0, 1.0);
    CHECK_THROWS_WITH_AS(validate_wide(t, spec),
                         doctest::Contains("non-monotone"), std::runtime_error);
  }
  SUBCASE("outcome recorded where R=0 is ignored with a warning") {
    Table t = random_full_table(spec, 3, 1);
    set_cell(t, "r1", 0, 0.0);
    set_cell(t, "y2", 0, 0.5);
    const auto before = warn_count();
    const WideDataset ds = validate_wide(t, spec);
    CHECK(warn_count() > before);
    CHECK(is_missing(ds.y_next(0, 1)));
  }
  SUBCASE("missing outcome where C=N=R=1 is an error") {
    Table t = random_full_table(spec, 3, 1);
    set_cell(t, "y2", 0, kMissing);
    CHECK_THROWS(validate_wide(t, spec));
  }
}

TEST_CASE("NodeSpec validation") {
  NodeSpec spec = simple_spec(3, 1);
  SUBCASE("duplicate role") {
    spec.r_cols[0] = "z1";
    CHECK_THROWS(spec.check());
  }
  SUBCASE("k out of range") {
    spec.markov_order = 4;
    CHECK_THROWS(spec.check());
  }
  SUBCASE("wrong Y count") {
    spec.y_cols.pop_back();
    CHECK_THROWS(spec.check());
  }
  SUBCASE("an extra tau+1 covariate block is accepted") {
    spec.l_cols.push_back({"l4"});
    CHECK_NOTHROW(spec.check());
  }
  SUBCASE("uneven covariate block widths are rejected") {
    spec.l_cols[1].push_back("extra");
    CHECK_THROWS(spec.check());
  }
}

TEST_CASE("apply_policy: identity leaves treatments untouched") {
  const NodeSpec spec = simple_spec(3, 0);
  const Table t = random_full_table(spec, 20, 5, 4);
  const WideDataset ds = apply_policy(validate_wide(t, spec), Policy::identity());
  for (int i = 0; i < ds.n_units(); ++i) {
    for (int tt = 1; tt <= 3; ++tt) CHECK(ds.z_shifted(i, tt) == ds.z(i, tt));
  }
}

TEST_CASE("apply_policy: shift down by one with floor zero") {
  const NodeSpec spec = simple_spec(2, 0);
  Table t = random_full_table(spec, 4, 5, 5);
  set_cell(t, "z1", 0, 3.0);
  set_cell(t, "z1", 1, 0.0);
  const WideDataset ds = apply_policy(validate_wide(t, spec), Policy::shift(-1.0, 0.0, 5.0));
  CHECK(ds.z_shifted(0, 1) == 2.0);
  CHECK(ds.z_shifted(1, 1) == 0.0);
}

TEST_CASE("apply_policy: static policy maps everything to the value") {
  const NodeSpec spec = simple_spec(2, 0);
  const Table t = random_full_table(spec, 10, 6, 1);
  const WideDataset ds = apply_policy(validate_wide(t, spec), Policy::static_value(1.0));
  for (int i = 0; i < ds.n_units(); ++i) {
    for (int tt = 1; tt <= 2; ++tt) CHECK(ds.z_shifted(i, tt) == 1.0);
  }
}

TEST_CASE("apply_policy: table policies map values under covariate predicates") {
  const NodeSpec spec = simple_spec(1, 0);
  Table t = empty_table(spec, 4);
  // (z, l): (2, 0), (2, 5), (1, 5), (3, 0)
  const double zs[4] = {2, 2, 1, 3}, ls[4] = {0, 5, 5, 0};
  for (int i = 0; i < 4; ++i) {
    set_cell(t, "l1", i, ls[i]);
    set_cell(t, "z1", i, zs[i]);
    set_cell(t, "c1", i, 1.0);
    set_cell(t, "r1", i, 1.0);
    set_cell(t, "y2", i, 0.5);
  }
  Policy p;
  p.kind = Policy::Kind::table;
  // 2 -> 0 only when the first covariate is at least 1; 1 -> 4 always.
  p.table = {{2.0, 0.0, 0, 1.0}, {1.0, 4.0, -1, 0.0}};
  const WideDataset ds = apply_policy(validate_wide(t, spec), p);
  CHECK(ds.z_shifted(0, 1) == 2.0);  // predicate fails, fall through to identity
  CHECK(ds.z_shifted(1, 1) == 0.0);
  CHECK(ds.z_shifted(2, 1) == 4.0);
  CHECK(ds.z_shifted(3, 1) == 3.0);  // no entry matches
}

TEST_CASE("apply_policy: support violations are hard errors") {
  const NodeSpec spec = simple_spec(2, 0);
  const Table t = random_full_table(spec, 4, 5, 5);
  Policy p = Policy::shift(10.0, -1e300, 1e300);
  p.support = {0, 1, 2, 3, 4, 5};
  CHECK_THROWS_WITH_AS(apply_policy(validate_wide(t, spec), p),
                       doctest::Contains("support"), std::runtime_error);
}

TEST_CASE("apply_policy: stochastic policies are deterministic given the seed") {
  const NodeSpec spec = simple_spec(3, 0);
  const Table t = random_full_table(spec, 50, 8, 3);
  Policy p = Policy::shift(-1.0, 0.0, 3.0);
  p.apply_prob = 0.5;
  p.seed = 77;
  const WideDataset a = apply_policy(validate_wide(t, spec), p);
  const WideDataset b = apply_policy(validate_wide(t, spec), p);
  bool any_identity = false, any_shifted = false;
  for (int i = 0; i < a.n_units(); ++i) {
    for (int tt = 1; tt <= 3; ++tt) {
      CHECK(a.z_shifted(i, tt) == b.z_shifted(i, tt));
      if (a.z(i, tt) > 0.0) {
        if (a.z_shifted(i, tt) == a.z(i, tt)) any_identity = true;
        if (a.z_shifted(i, tt) < a.z(i, tt)) any_shifted = true;
      }
    }
  }
  CHECK(any_identity);
  CHECK(any_shifted);
}

TEST_CASE("to_long: row counts, time column, padding") {
  const NodeSpec spec = simple_spec(3, 1);
  const Table t = random_full_table(spec, 1, 2);
  const WideDataset ds = apply_policy(validate_wide(t, spec), Policy::identity());

  SUBCASE("single unit contributes tau rows with t = 1..tau") {
    const LongDataset ld = to_long(ds, 1);
    CHECK(ld.n_rows() == 3);
    for (int row = 0; row < 3; ++row) CHECK(ld.time(row) == row + 1);
  }
  SUBCASE("lag cells before the start of follow-up are exactly zero") {
    const LongDataset ld = to_long(ds, 1);
    const Matrix x = ld.predictors(false, true);
    const auto names = ld.predictor_names(true);
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j].find("lag1") != std::string::npos) {
        CHECK(x.at(0, j) == 0.0);  // row at t=1
      }
    }
  }
  SUBCASE("k > tau is rejected") { CHECK_THROWS(to_long(ds, 4)); }
}

TEST_CASE("to_long: row enumeration matches an independent (unit,time) scan") {
  const NodeSpec spec = simple_spec(3, 1);
  Table t = random_full_table(spec, 2, 3);
  censor_at(t, spec, 1, 1);  // unit 1 drops immediately: T = 1
  const WideDataset ds = apply_policy(validate_wide(t, spec), Policy::identity());
  const LongDataset ld = to_long(ds, 1);

  std::vector<std::pair<int, int>> expected;
  for (int i = 0; i < ds.n_units(); ++i) {
    for (int tt = 1; tt <= ds.last_seen(i); ++tt) expected.push_back({i, tt});
  }
  REQUIRE(ld.n_rows() == static_cast<int>(expected.size()));
  CHECK(ld.n_rows() == 4);
  for (int row = 0; row < ld.n_rows(); ++row) {
    CHECK(ld.unit(row) == expected[row].first);
    CHECK(ld.time(row) == expected[row].second);
  }
}

TEST_CASE("to_long: total rows equal the sum of last-seen times on random data") {
  Rng rng(123);
  for (int rep = 0; rep < 20; ++rep) {
    const int tau = 2 + static_cast<int>(rng.next_u64() % 3);
    const NodeSpec spec = simple_spec(tau, 1);
    Table t = random_full_table(spec, 8, rng.next_u64());
    // Random censoring times.
    for (int i = 0; i < 8; ++i) {
      const int tc = 1 + static_cast<int>(rng.next_u64() % (tau + 1));
      if (tc <= tau) censor_at(t, spec, i, tc);
    }
    const WideDataset ds = apply_policy(validate_wide(t, spec), Policy::identity());
    const LongDataset ld = to_long(ds, 1);
    int total = 0;
    for (int i = 0; i < ds.n_units(); ++i) total += ds.last_seen(i);
    CHECK(ld.n_rows() == total);

    // Determinism and order preservation within unit.
    const LongDataset ld2 = to_long(ds, 1);
    for (int row = 0; row < ld.n_rows(); ++row) {
      CHECK(ld.unit(row) == ld2.unit(row));
      CHECK(ld.time(row) == ld2.time(row));
      CHECK((ld.time(row) == 1 || ld.time(row) == ld.time(row - 1) + 1));
    }
  }
}

TEST_CASE("fold_split: sizes, determinism, coverage") {
  SUBCASE("even split") {
    const FoldPartition p = fold_split(10, 5, 1);
    std::vector<int> sizes(5, 0);
    for (int lab : p.label) sizes[lab] += 1;
    for (int s : sizes) CHECK(s == 2);
  }
  SUBCASE("near-even split") {
    const FoldPartition p = fold_split(11, 5, 1);
    std::vector<int> sizes(5, 0);
    for (int lab : p.label) sizes[lab] += 1;
    std::multiset<int> ms(sizes.begin(), sizes.end());
    CHECK(ms == std::multiset<int>({3, 2, 2, 2, 2}));
  }
  SUBCASE("same seed, same labels") {
    const FoldPartition a = fold_split(37, 4, 9);
    const FoldPartition b = fold_split(37, 4, 9);
    CHECK(a.label == b.label);
  }
  SUBCASE("bounds") {
    CHECK_THROWS(fold_split(5, 1, 0));
    CHECK_THROWS(fold_split(5, 6, 0));
  }
}
