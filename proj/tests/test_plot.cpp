#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cmv/plot.hpp"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Minimal well-formedness check: every tag closes, quotes balance, and
// nothing but declarations and comments escapes the element tree.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      ++i;
      continue;
    }
    if (s.compare(i, 4, "<!--") == 0) {
      const auto end = s.find("-->", i);
      if (end == std::string::npos) return false;
      i = end + 3;
      continue;
    }
    if (s.compare(i, 2, "<?") == 0) {
      const auto end = s.find("?>", i);
      if (end == std::string::npos) return false;
      i = end + 2;
      continue;
    }
    std::size_t j = i + 1;
    char quote = 0;
    while (j < s.size() && (quote != 0 || s[j] != '>')) {
      if (quote == 0 && (s[j] == '"' || s[j] == '\'')) {
        quote = s[j];
      } else if (quote != 0 && s[j] == quote) {
        quote = 0;
      }
      ++j;
    }
    if (j >= s.size()) return false;
    std::string tag = s.substr(i + 1, j - i - 1);
    i = j + 1;
    if (tag.empty()) return false;
    const bool closing = tag.front() == '/';
    const bool self_closing = tag.back() == '/';
    if (closing) {
      tag.erase(0, 1);
    } else if (self_closing) {
      tag.pop_back();
    }
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
    if (name.empty()) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++count;
  return count;
}

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& stem) {
    path = fs::temp_directory_path() / (stem + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)) +
                                        ".svg");
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

}  // namespace

TEST_CASE("well_formed_xml sanity") {
  CHECK(well_formed_xml("<a><b x=\"1\"/><c>t</c></a>"));
  CHECK_FALSE(well_formed_xml("<a><b></a></b>"));
  CHECK_FALSE(well_formed_xml("<a>"));
}

TEST_CASE("render_plot draws 1/N data with a -1.00 slope label") {
  TempFile tmp("plot_invn");
  const std::vector<std::pair<double, double>> points{{10.0, 0.1}, {100.0, 0.01}};
  cmv::render_plot(points, tmp.path.string());

  const std::string svg = slurp(tmp.path);
  CHECK(well_formed_xml(svg));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count_occurrences(svg, "<circle") == 2);
  CHECK(svg.find("fit slope -1.00") != std::string::npos);
  CHECK(svg.find("reference slope -1.00") != std::string::npos);
}

TEST_CASE("render_plot scales to more points") {
  TempFile tmp("plot_many");
  std::vector<std::pair<double, double>> points;
  for (const double n : {5.0, 15.0, 25.0, 55.0, 95.0})
    points.emplace_back(n, 2.0 / std::pow(n, 1.1));
  cmv::render_plot(points, tmp.path.string());

  const std::string svg = slurp(tmp.path);
  CHECK(well_formed_xml(svg));
  CHECK(count_occurrences(svg, "<circle") == 5);
  CHECK(svg.find("fit slope -1.10") != std::string::npos);
}

TEST_CASE("render_plot rejects unusable input") {
  TempFile tmp("plot_bad");
  using Points = std::vector<std::pair<double, double>>;
  CHECK_THROWS_AS(cmv::render_plot(Points{{10.0, 0.1}}, tmp.path.string()),
                  std::invalid_argument);
  CHECK_THROWS_AS(cmv::render_plot(Points{{10.0, 0.1}, {20.0, 0.0}}, tmp.path.string()),
                  std::invalid_argument);
  CHECK_THROWS_AS(cmv::render_plot(Points{{10.0, 0.1}, {-20.0, 0.2}}, tmp.path.string()),
                  std::invalid_argument);
  CHECK_THROWS_AS(cmv::render_plot(Points{{10.0, 0.1}, {10.0, 0.2}}, tmp.path.string()),
                  std::invalid_argument);
  CHECK_FALSE(fs::exists(tmp.path));

  CHECK_THROWS_WITH(
      cmv::render_plot(Points{{10.0, 0.1}, {100.0, 0.01}}, "/no/such/dir/plot.svg"),
      Catch::Matchers::ContainsSubstring("/no/such/dir/plot.svg"));
}
