#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "fedsim/dataset_io.hpp"
#include "fedsim/errors.hpp"

using namespace fedsim;

TEST_SUITE("dataset_io") {
  TEST_CASE("round trip is exact") {
    ClassPartitionConfig c;
    c.q = 0.6;
    c.samples_per_class = 12;
    c.feature_dim = 5;
    const auto d = gen_classification(c, 3);
    std::stringstream buf;
    write_dataset(buf, d.workers);
    const auto back = read_dataset(buf);
    REQUIRE(back.size() == d.workers.size());
    for (std::size_t p = 0; p < back.size(); ++p) {
      CHECK(back[p].dim == d.workers[p].dim);
      CHECK(back[p].features == d.workers[p].features);
      CHECK(back[p].labels == d.workers[p].labels);
    }
  }

  TEST_CASE("file round trip") {
    ClassPartitionConfig c;
    c.samples_per_class = 4;
    c.feature_dim = 3;
    const auto d = gen_classification(c, 4);
    const auto path = std::filesystem::temp_directory_path() / "fedsim_io_test.fsim";
    save_dataset(path, {d.test});
    const auto back = load_dataset(path);
    std::filesystem::remove(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].features == d.test.features);
  }

  TEST_CASE("bad input") {
    std::stringstream bad("FSIM2xxxxxxxx");
    CHECK_THROWS_AS(read_dataset(bad), ConfigError);
    ClassPartitionConfig c;
    c.samples_per_class = 4;
    c.feature_dim = 3;
    std::stringstream buf;
    write_dataset(buf, gen_classification(c, 1).workers);
    std::string s = buf.str();
    std::stringstream truncated(s.substr(0, s.size() - 3));
    CHECK_THROWS_AS(read_dataset(truncated), ConfigError);
    CHECK_THROWS_AS(load_dataset("/nonexistent/dir/x.fsim"), ConfigError);
    std::stringstream out;
    CHECK_THROWS_AS(write_dataset(out, {}), ConfigError);
  }
}
