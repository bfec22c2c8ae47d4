#include <doctest.h>

#include <fstream>
#include <sstream>

#include "sparsepca/errors.hpp"
#include "sparsepca/screening.hpp"
#include "support.hpp"

#ifndef SPARSEPCA_TEST_DATA
#error "SPARSEPCA_TEST_DATA must point at tests/data"
#endif

using namespace sparsepca;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("fixture moments by hand") {
  testing::TempDir dir;
  const auto corpus = parse_docword(dir.write("docword.txt", testing::kFixture));
  const auto stats = compute_variances(corpus);
  // Columns of the 3 x 4 count matrix: (0,2,0) (3,0,1) (0,0,2) (1,0,0).
  CHECK(stats.mean_of(1) == doctest::Approx(2.0 / 3.0));
  CHECK(stats.variance_of(1) == doctest::Approx(8.0 / 9.0));
  CHECK(stats.variance_of(2) == doctest::Approx(14.0 / 9.0));
  CHECK(stats.variance_of(3) == doctest::Approx(8.0 / 9.0));
  CHECK(stats.variance_of(4) == doctest::Approx(2.0 / 9.0));
  // Ties between 1 and 3 go to the smaller id.
  CHECK(stats.sorted_order == std::vector<FeatureId>{2, 1, 3, 4});
}

TEST_CASE("absent documents count as zeros") {
  testing::TempDir dir;
  const auto corpus = parse_docword(dir.write("docword.txt", "4\n1\n1\n2 1 2\n"));
  const auto stats = compute_variances(corpus);
  CHECK(stats.num_docs == 4);
  CHECK(stats.mean_of(1) == 0.5);
  CHECK(stats.variance_of(1) == 0.75);
}

TEST_CASE("variances are identical for every thread count") {
  testing::TempDir dir;
  std::string body;
  std::uint64_t nnz = 0;
  for (int d = 1; d <= 400; ++d)
    for (int w = 1 + d % 5; w <= 60; w += 1 + (d * w) % 7) {
      body += std::to_string(d) + " " + std::to_string(w) + " " + std::to_string(1 + (d + w) % 9) + "\n";
      ++nnz;
    }
  const auto corpus = parse_docword(dir.write("c.txt", "400\n60\n" + std::to_string(nnz) + "\n" + body));
  const auto one = compute_variances(corpus, {1, {}});
  for (std::size_t threads : {2, 3, 7}) {
    const auto many = compute_variances(corpus, {threads, {}});
    CHECK(many.mean == one.mean);
    CHECK(many.variance == one.variance);
    CHECK(many.sorted_order == one.sorted_order);
  }
}

TEST_CASE("count transform hook") {
  testing::TempDir dir;
  const auto corpus = parse_docword(dir.write("docword.txt", testing::kFixture));
  const auto binary = compute_variances(corpus, {1, [](FeatureId, std::uint32_t) { return 1.0; }});
  // Presence indicators: word 2 appears in documents 1 and 3.
  CHECK(binary.mean_of(2) == doctest::Approx(2.0 / 3.0));
  CHECK(binary.variance_of(2) == doctest::Approx(2.0 / 9.0));
}

TEST_CASE("screening keeps variances strictly above lambda") {
  const auto stats = FeatureStats::from_moments(3, {0, 0, 0, 0}, {1.0, 3.0, 2.0, 2.0});
  const auto r = screen(stats, 2.0);
  CHECK(r.kept == std::vector<FeatureId>{2});
  CHECK(r.original_n == 4);
  CHECK(r.reduced_n == 1);
  CHECK(screen(stats, 1.5).kept == std::vector<FeatureId>{2, 3, 4});
  CHECK_THROWS_WITH_AS(screen(stats, 3.0), doctest::Contains("eliminates all features"), InfeasibleError);
}

TEST_CASE("lambda_for_size") {
  const auto stats = FeatureStats::from_moments(3, {0, 0, 0, 0}, {1.0, 4.0, 2.0, 3.0});
  CHECK(lambda_for_size(stats, 2) == 2.0);
  CHECK(screen(stats, lambda_for_size(stats, 2)).reduced_n == 2);
  CHECK(lambda_for_size(stats, 4) == 0.0);
  CHECK_THROWS_AS(lambda_for_size(stats, 5), InfeasibleError);
}

TEST_CASE("from_moments rejects negative variance") {
  CHECK_THROWS_AS(FeatureStats::from_moments(3, {0.0}, {-1.0}), FormatError);
}

TEST_CASE("stats cache matches the golden file") {
  testing::TempDir dir;
  const auto docword = dir.write("docword.txt", testing::kFixture);
  const auto corpus = parse_docword(docword);
  const auto stats = compute_variances(corpus);
  const std::uint64_t hash = content_hash(docword);
  write_stats_cache(stats, hash, dir.file("stats.txt"));
  const std::filesystem::path golden = std::filesystem::path(SPARSEPCA_TEST_DATA) / "fixture_stats.txt";
  CHECK(slurp(dir.file("stats.txt")) == slurp(golden));

  const auto back = read_stats_cache(golden, hash);
  REQUIRE(back.has_value());
  CHECK(back->variance == stats.variance);
  CHECK(back->mean == stats.mean);
  CHECK(back->sorted_order == stats.sorted_order);
  CHECK_FALSE(read_stats_cache(golden, hash ^ 1).has_value());
  CHECK(read_stats_cache(golden).has_value());
}

TEST_CASE("malformed stats cache") {
  testing::TempDir dir;
  CHECK_THROWS_AS(read_stats_cache(dir.write("a", "SPCASTAT 2\n")), FormatError);
  CHECK_THROWS_AS(read_stats_cache(dir.write("b", "SPCASTAT 1\nn 2\nm 3\nhash 0000000000000000\n# id mean variance\n1 0 1\n")),
                  FormatError);
}
