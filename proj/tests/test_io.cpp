#include <doctest.h>

#include <sstream>

#include "dpfh/io.hpp"

using namespace dpfh;

TEST_SUITE("io") {

TEST_CASE("well-formed table parses") {
  std::istringstream in(
      "area_id,y,d,x1,x2\n"
      "a1,1.5,0.2,1,0.3\n"
      "a2,-0.7,0.4,1,0.6\n"
      "a3,0.2,0.6,1,0.9\n"
      "a4,0.9,0.8,1,0.1\n");
  const InputTable t = read_input_table(in);
  CHECK(t.data.size() == 4);
  CHECK(t.data.dim() == 2);
  CHECK(t.area_ids == std::vector<std::string>{"a1", "a2", "a3", "a4"});
  CHECK(t.groups.empty());
  CHECK(t.data[1].y == -0.7);
  CHECK(t.data[3].x[1] == 0.1);
}

TEST_CASE("optional group column") {
  std::istringstream in(
      "area_id,y,d,x1,group\n"
      "a,1,0.2,1,north\n"
      "b,2,0.2,1,south\n"
      "c,3,0.2,1,north\n");
  const InputTable t = read_input_table(in);
  CHECK(t.groups == std::vector<std::string>{"north", "south", "north"});
  CHECK(t.data.dim() == 1);
}

TEST_CASE("errors carry line numbers") {
  {
    std::istringstream in("");
    CHECK_THROWS_WITH_AS(read_input_table(in, "f.csv"), doctest::Contains("f.csv:1"),
                         ParseError);
  }
  {
    std::istringstream in("id,y,d,x1\n");
    CHECK_THROWS_WITH_AS(read_input_table(in, "f.csv"), doctest::Contains("f.csv:1"),
                         ParseError);
  }
  {
    std::istringstream in("area_id,y,d,x1\na,1,0.2,1\nb,oops,0.2,1\nc,1,0.2,1\n");
    CHECK_THROWS_WITH_AS(read_input_table(in, "f.csv"), doctest::Contains("f.csv:3"),
                         ParseError);
  }
  {
    std::istringstream in("area_id,y,d,x1\na,1,0.2,1\nb,1,0.2\nc,1,0.2,1\n");
    CHECK_THROWS_WITH_AS(read_input_table(in, "f.csv"), doctest::Contains("f.csv:3"),
                         ParseError);
  }
  {
    std::istringstream in("area_id,y,d,x1\na,1,-0.2,1\nb,1,0.2,1\nc,1,0.2,1\n");
    CHECK_THROWS_WITH_AS(read_input_table(in, "f.csv"), doctest::Contains("f.csv:2"),
                         ParseError);
  }
  {
    std::istringstream in("area_id,y,d,x1\na,1,0.2,\nb,1,0.2,1\nc,1,0.2,1\n");
    CHECK_THROWS_AS(read_input_table(in, "f.csv"), ParseError);
  }
}

TEST_CASE("full-precision rendering round-trips") {
  const double values[] = {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, -2.5e17};
  for (double v : values) {
    const std::string s = format_full(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("round trip through serialization and parsing") {
  std::ostringstream out;
  out << "area_id,y,d,x1\n";
  const double ys[] = {1.0 / 3.0, -0.123456789012345678, 4.0};
  for (int i = 0; i < 3; ++i) {
    out << "a" << i << ',' << format_full(ys[i]) << ",0.5,1\n";
  }
  std::istringstream in(out.str());
  const InputTable t = read_input_table(in);
  for (int i = 0; i < 3; ++i) {
    CHECK(t.data[i].y == ys[i]);
  }
}

TEST_CASE("config files: comments, whitespace, overrides") {
  std::istringstream in(
      "# study configuration\n"
      "seed = 42\n"
      "  c_percent=5.0   # efficiency loss\n"
      "\n"
      "label = table one\n"
      "seed = 43\n");
  const auto cfg = read_config(in);
  CHECK(cfg.at("seed") == "43");
  CHECK(cfg.at("c_percent") == "5.0");
  CHECK(cfg.at("label") == "table one");

  std::istringstream bad("no equals sign here\n");
  CHECK_THROWS_WITH_AS(read_config(bad, "c.conf"), doctest::Contains("c.conf:1"),
                       ParseError);
}

}  // TEST_SUITE
