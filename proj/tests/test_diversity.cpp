#include <doctest.h>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "distill/corpus.hpp"
#include "distill/diversity.hpp"
#include "distill/errors.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace distill;

namespace {

TokenSequence seq(std::vector<std::string> t) { return TokenSequence(std::move(t)); }

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t n, std::size_t alphabet) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back("t" + std::to_string(rng() % alphabet));
  return out;
}

InstructionRecord rec(std::string id, std::string instruction, std::optional<std::string> response,
                      SubsetTag subset) {
  InstructionRecord r;
  r.id = std::move(id);
  r.instruction = std::move(instruction);
  r.response = std::move(response);
  r.subset = subset;
  return r;
}

std::vector<Vector> random_vectors(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vector> out(n, Vector(dim));
  for (auto& v : out)
    for (auto& x : v) x = g(rng);
  return out;
}

}  // namespace

TEST_CASE("ttr examples") {
  CHECK(ttr(seq({"a", "b", "c"})) == 1.0);
  CHECK(ttr(seq({"a", "a", "a", "a"})) == 0.25);
  CHECK_THROWS(ttr(TokenSequence{}));
  CHECK_THROWS_AS(TokenSequence(std::vector<std::string>{"a", ""}), ValidationError);

  std::mt19937_64 rng(200);
  const auto tokens = random_tokens(rng, 200, 60);
  CHECK(ttr(seq(tokens)) == oracle::ttr(tokens));
}

TEST_CASE("mattr examples") {
  CHECK(mattr(seq(std::vector<std::string>(100, "same")), 50) == doctest::Approx(0.02).epsilon(1e-12));
  std::vector<std::string> distinct;
  for (int i = 0; i < 60; ++i) distinct.push_back("w" + std::to_string(i));
  CHECK(mattr(seq(distinct), 50) == 1.0);
  CHECK(mattr(seq({"a", "a", "b"}), 2) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(mattr(seq({"a", "a", "b"}), 50) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS(mattr(seq({"a"}), 0));
  CHECK_THROWS(mattr(TokenSequence{}, 5));
}

TEST_CASE("sliding mattr equals the naive window average on 1000 random sequences") {
  std::mt19937_64 rng(1000);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 400;
    const std::size_t alphabet = 1 + rng() % 80;
    const std::size_t window = 1 + rng() % 60;
    const auto tokens = random_tokens(rng, n, alphabet);
    const double fast = mattr(seq(tokens), window);
    const double slow = oracle::naive_mattr(tokens, window);
    worst = std::max(worst, std::abs(fast - slow));
    if (n >= window) {
      CHECK(fast >= 1.0 / static_cast<double>(window) - 1e-15);
      CHECK(fast <= 1.0 + 1e-15);
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("mattr is invariant under relabeling and hits 1 only for duplicate-free windows") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto tokens = random_tokens(rng, 150, 40);
    std::vector<std::string> relabeled;
    for (const auto& t : tokens) relabeled.push_back("zz_" + t + "_renamed");
    CHECK(mattr(seq(relabeled), 20) == mattr(seq(tokens), 20));

    bool all_free = true;
    for (std::size_t s = 0; s + 20 <= tokens.size(); ++s) {
      std::set<std::string> w(tokens.begin() + s, tokens.begin() + s + 20);
      if (w.size() < 20) all_free = false;
    }
    CHECK((mattr(seq(tokens), 20) == 1.0) == all_free);
  }
  std::vector<std::string> cyc;
  for (int i = 0; i < 100; ++i) cyc.push_back("c" + std::to_string(i % 20));
  CHECK(mattr(seq(cyc), 20) == 1.0);
}

TEST_CASE("mattr_ids agrees with the string version") {
  const std::vector<std::uint32_t> ids = {0, 0, 1};
  CHECK(mattr_ids(ids, 2) == doctest::Approx(0.75));
}

TEST_CASE("subset_mattr concatenates one side of a subset in stored order") {
  const std::vector<InstructionRecord> records = {
      rec("1", "write a poem about the sea", std::string("the sea is blue and deep"), SubsetTag::gen_si),
      rec("2", "list three colors", std::string("red green blue"), SubsetTag::gen_si),
      rec("3", "unrelated p3 record", std::string("p3 answer"), SubsetTag::p3),
      rec("4", "write a story about the sea", std::nullopt, SubsetTag::gen_si),
      rec("5", "name a color", std::string("blue"), SubsetTag::gen_si),
      rec("6", "explain the tides of the sea", std::string("the moon pulls the sea"), SubsetTag::gen_si)};

  SUBCASE("single record") {
    const std::vector<InstructionRecord> one = {records[0]};
    CHECK(subset_mattr(one, SubsetTag::gen_si, Side::instruction, 3) ==
          mattr(TokenSequence::from_text(records[0].instruction), 3));
  }
  SUBCASE("five-record subset equals hand concatenation") {
    std::vector<std::string> ins, res;
    for (const auto& r : records) {
      if (r.subset != SubsetTag::gen_si) continue;
      for (const auto& t : oracle::split_ws(r.instruction)) ins.push_back(t);
      if (r.response)
        for (const auto& t : oracle::split_ws(*r.response)) res.push_back(t);
    }
    CHECK(subset_mattr(records, SubsetTag::gen_si, Side::instruction, 4) ==
          doctest::Approx(oracle::naive_mattr(ins, 4)).epsilon(1e-12));
    CHECK(subset_mattr(records, SubsetTag::gen_si, Side::response, 4) ==
          doctest::Approx(oracle::naive_mattr(res, 4)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(subset_mattr(records, SubsetTag::flan, Side::instruction), ValidationError);

  const auto rows = diversity_report(records, 4);
  std::ostringstream csv;
  write_diversity_csv(rows, csv);
  CHECK(csv.str().rfind("subset,side,window,mattr_x100,ttr,tokens\n", 0) == 0);
  CHECK(csv.str().find("\nall,instruction,4,") != std::string::npos);
  std::ostringstream md;
  write_diversity_markdown(rows, md);
  CHECK(md.str().find("gen_si") != std::string::npos);
}

TEST_CASE("cosine_stats examples") {
  const std::vector<Vector> same = {{1, 2, 3}, {1, 2, 3}};
  const auto s = cosine_stats(same);
  CHECK(s.mean_pairwise_cosine == doctest::Approx(1.0));
  CHECK(s.stddev == doctest::Approx(0.0));
  CHECK(s.pairs == 1);
  const std::vector<Vector> ortho = {{1, 0}, {0, 1}};
  CHECK(cosine_stats(ortho).mean_pairwise_cosine == doctest::Approx(0.0));
  const std::vector<Vector> zero = {{1, 0}, {0, 0}};
  CHECK_THROWS(cosine_stats(zero));
  const std::vector<Vector> ragged = {{1, 0}, {0, 1, 2}};
  CHECK_THROWS(cosine_stats(ragged));
  const std::vector<Vector> single = {{1, 0}};
  CHECK_THROWS(cosine_stats(single));
}

TEST_CASE("cosine_stats matches the all-pairs oracle and ignores positive scaling") {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = random_vectors(rng, 20, 8);
    const auto got = cosine_stats(v);
    const auto want = oracle::all_pairs_cosine(v);
    CHECK(got.pairs == 190);
    CHECK_FALSE(got.sampled);
    CHECK(std::abs(got.mean_pairwise_cosine - want.mean) < 1e-9);
    CHECK(std::abs(got.stddev - want.stddev) < 1e-9);
    for (auto& x : v[trial % 20]) x *= 37.5;
    const auto scaled = cosine_stats(v);
    CHECK(std::abs(scaled.mean_pairwise_cosine - got.mean_pairwise_cosine) < 1e-12);
  }
}

TEST_CASE("cosine_stats samples deterministically beyond the exact-pair cap") {
  std::mt19937_64 rng(21);
  const auto v = random_vectors(rng, 200, 6);
  const auto a = cosine_stats(v, 5, 1000);
  const auto b = cosine_stats(v, 5, 1000);
  CHECK(a.sampled);
  CHECK(a.pairs == 1000);
  CHECK(a.mean_pairwise_cosine == b.mean_pairwise_cosine);
  CHECK(std::abs(a.mean_pairwise_cosine - oracle::all_pairs_cosine(v).mean) < 0.05);
}

TEST_CASE("pca on rank-1 data leaves the second component near zero") {
  std::vector<Vector> line;
  for (int i = -5; i <= 5; ++i) line.push_back({1.0 * i, 2.0 * i, -0.5 * i});
  const auto pca = pca_project(line, 2);
  REQUIRE(pca.points.size() == line.size());
  for (const auto& p : pca.points) CHECK(std::abs(p[1]) < 1e-6);
  CHECK(pca.rank_deficient);
  CHECK(pca.explained_variance[0] > 0);
}

TEST_CASE("pca preserves pairwise distances of a 2-D point set") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 3);
  // Points on a tilted plane embedded in 5-D.
  const Vector e1 = {0.6, 0.8, 0, 0, 0};
  const Vector e2 = {0, 0, 0.6, 0, 0.8};
  std::vector<Vector> pts;
  for (int i = 0; i < 30; ++i) {
    const double a = u(rng), b = u(rng);
    Vector p(5);
    for (int k = 0; k < 5; ++k) p[k] = a * e1[k] + b * e2[k] + 1.0;
    pts.push_back(p);
  }
  const auto pca = pca_project(pts, 2);
  CHECK_FALSE(pca.rank_deficient);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d_hi = 0, d_lo = 0;
      for (int k = 0; k < 5; ++k) d_hi += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
      for (int k = 0; k < 2; ++k)
        d_lo += (pca.points[i][k] - pca.points[j][k]) * (pca.points[i][k] - pca.points[j][k]);
      CHECK(std::abs(std::sqrt(d_hi) - std::sqrt(d_lo)) < 1e-6);
    }
  }
}

TEST_CASE("pca explained variance matches a dense eigensolver") {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 5; ++trial) {
    auto v = random_vectors(rng, 50, 10);
    // Stretch a few axes so the top eigenvalues are well separated.
    for (auto& x : v) {
      x[0] *= 4.0;
      x[3] *= 2.5;
    }
    Eigen::MatrixXd m(50, 10);
    for (int i = 0; i < 50; ++i)
      for (int k = 0; k < 10; ++k) m(i, k) = v[i][k];
    const Eigen::MatrixXd centred = m.rowwise() - m.colwise().mean();
    const Eigen::MatrixXd cov = centred.transpose() * centred / 49.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const auto ev = es.eigenvalues();  // ascending

    const auto pca = pca_project(v, 2);
    REQUIRE(pca.explained_variance.size() == 2);
    CHECK(std::abs(pca.explained_variance[0] - ev(9)) < 1e-6);
    CHECK(std::abs(pca.explained_variance[1] - ev(8)) < 1e-6);
    CHECK(pca.explained_variance[0] >= pca.explained_variance[1]);

    // Sign convention: first non-negligible loading positive; deterministic output.
    for (const auto& c : pca.components) {
      for (double x : c) {
        if (std::abs(x) > 1e-12) {
          CHECK(x > 0);
          break;
        }
      }
    }
    CHECK(pca_project(v, 2).points == pca.points);

    // Variance of the projected coordinates equals the eigenvalues.
    for (int k = 0; k < 2; ++k) {
      double var = 0;
      for (const auto& p : pca.points) var += p[k] * p[k];
      CHECK(std::abs(var / 49.0 - pca.explained_variance[k]) < 1e-6);
    }
  }
}

TEST_CASE("pca csv layout") {
  const std::vector<Vector> v = {{0, 0}, {1, 1}, {2, 0}};
  const auto pca = pca_project(v, 2);
  std::ostringstream os;
  const std::vector<std::string> ids = {"a", "b", "c"}, labels = {"gen_si", "gen_si", "p3"};
  write_pca_csv(pca, ids, labels, os);
  const auto text = os.str();
  CHECK(text.rfind("id,x,y,label\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK_THROWS(pca_project(std::vector<Vector>{{1, 2}}, 2));
}
