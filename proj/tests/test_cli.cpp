#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("ope_meso_cli_" + std::to_string(std::rand()));
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && '" OPE_CLI_PATH "' " + args + " > stdout.txt 2> stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  std::string read(const std::string& name) const {
    std::ifstream is(dir / name, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }
};

}  // namespace

TEST_CASE("cumulants writes csv and a manifest") {
  Sandbox s;
  REQUIRE(s.run("cumulants --ensemble chebyshev2 --n 100,200 --m-max 3 --f 'im:1/(x-i)' -o out.csv") == 0);
  const std::string csv = s.read("out.csv");
  CHECK(csv.rfind("n,alpha,m,value_re,value_im\n", 0) == 0);
  long lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 1 + 2 * 3);
  const auto m = nlohmann::json::parse(s.read("out.csv.manifest.json"));
  CHECK(m["schema"] == 1);
  CHECK(m["exit_status"] == 0);
  CHECK(m["config"]["command"] == "cumulants");
  CHECK(m.contains("git_describe"));
  CHECK(m.contains("wallclock_seconds"));
}

TEST_CASE("replay reproduces output bit for bit") {
  Sandbox s;
  REQUIRE(s.run("cumulants --ensemble hermite --n 150 --m-max 4 --side left --f 'im:1/(x-i)+re:0.5/(x-(1+2i))' -o a.csv") ==
          0);
  const std::string first = s.read("a.csv");
  fs::rename(s.dir / "a.csv.manifest.json", s.dir / "saved.json");
  fs::remove(s.dir / "a.csv");
  REQUIRE(s.run("replay saved.json") == 0);
  CHECK(s.read("a.csv") == first);
  CHECK(!first.empty());
}

TEST_CASE("variance-limit") {
  Sandbox s;
  REQUIRE(s.run("variance-limit --f 'im:1/(x-i)' --side right --method both") == 0);
  const auto j = nlohmann::json::parse(s.read("stdout.txt"));
  CHECK(std::abs(j["value"].get<double>() - 3.0 / 32) < 1e-8);
  CHECK(std::abs(j["residue"]["value"].get<double>() - 3.0 / 32) < 1e-12);
}

TEST_CASE("errors map to exit codes") {
  Sandbox s;
  CHECK(s.run("cumulants --ensemble nosuch --n 100") == 2);
  CHECK(s.read("stderr.txt").rfind("error:", 0) == 0);
  CHECK(s.run("cumulants --ensemble hermite --n 100 --alpha 3") == 2);
  CHECK(s.run("variance-limit --f 'im:1/(x-2)'") == 2);
  CHECK(s.run("cumulants --bogus-flag") == 2);
  std::ofstream(s.dir / "bad.json") << R"({"schema":1,"config":{"command":"cumulants","unknown_key":3}})";
  CHECK(s.run("replay bad.json") == 2);
}

TEST_CASE("sample save and aggregate") {
  Sandbox s;
  REQUIRE(s.run("sample --ensemble hermite --n 40 --count 200 --seed 7 --f 'im:1/(x-i)' --save b1.bin -o s1.json") == 0);
  REQUIRE(s.run("sample --ensemble hermite --n 40 --count 200 --seed 7 --f 'im:1/(x-i)' -o s2.json") == 0);
  const auto j1 = nlohmann::json::parse(s.read("s1.json"));
  const auto j2 = nlohmann::json::parse(s.read("s2.json"));
  CHECK(j1["variance"] == j2["variance"]);
  REQUIRE(s.run("sample --ensemble hermite --n 40 --f 'im:1/(x-i)' --from b1.bin -o s3.json") == 0);
  const auto j3 = nlohmann::json::parse(s.read("s3.json"));
  CHECK(j3["variance"] == j1["variance"]);
  CHECK(j3["count"] == 200);
  CHECK(s.run("sample --ensemble chebyshev2 --n 40 --count 10 --f 'im:1/(x-i)'") != 0);
}
