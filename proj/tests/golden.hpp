#pragma once

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <string>

// Values pinned from a first run. OPE_PIN_GOLDEN=1 rewrites the stored value.
inline void check_golden(const std::string& key, double value, double rel_tol) {
  const std::string path = std::string(OPE_GOLDEN_DIR) + "/values.json";
  nlohmann::json j = nlohmann::json::object();
  {
    std::ifstream is(path);
    if (is) j = nlohmann::json::parse(is);
  }
  const char* pin = std::getenv("OPE_PIN_GOLDEN");
  if (pin && std::string(pin) == "1") {
    j[key] = value;
    std::ofstream os(path);
    os << j.dump(2) << '\n';
    return;
  }
  REQUIRE_MESSAGE(j.contains(key), "golden value missing: " << key);
  const double want = j[key].get<double>();
  CHECK_MESSAGE(std::abs(value - want) <= rel_tol * std::abs(want), key << ": got " << value << ", golden " << want);
}
