#pragma once

#include <random>
#include <string>

#include "threedify/common/canonical.hpp"

namespace testgen {

using threedify::json;

inline std::string random_string(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces{"a", "Z", "0", " ", "\n", "\t", "\"", "\\", "/", "é", "日本", "😀", "\x01", "{", "]"};
  std::uniform_int_distribution<int> len(0, 8);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += pieces[pick(rng)];
  return s;
}

inline json random_value(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> kind(0, depth > 0 ? 7 : 5);
  switch (kind(rng)) {
    case 0: return nullptr;
    case 1: return std::bernoulli_distribution(0.5)(rng);
    case 2: return std::uniform_int_distribution<std::int64_t>(INT64_MIN, INT64_MAX)(rng);
    case 3: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    case 4:
    case 5: return random_string(rng);
    case 6: {
      json arr = json::array();
      for (int i = std::uniform_int_distribution<int>(0, 4)(rng); i > 0; --i) arr.push_back(random_value(rng, depth - 1));
      return arr;
    }
    default: {
      json obj = json::object();
      for (int i = std::uniform_int_distribution<int>(0, 4)(rng); i > 0; --i) {
        obj[random_string(rng)] = random_value(rng, depth - 1);
      }
      return obj;
    }
  }
}

inline json random_object(std::mt19937_64& rng, int depth) {
  json obj = json::object();
  for (int i = std::uniform_int_distribution<int>(0, 4)(rng); i > 0; --i) {
    obj[random_string(rng)] = random_value(rng, depth - 1);
  }
  return obj;
}

}  // namespace testgen
