#pragma once

#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>

namespace stlsplit {

/// Real-valued margin over the full combined state. Positive means the
/// predicate holds; the magnitude is the distance to the boundary.
using PredicateFn = std::function<double(std::span<const double>)>;

using PredicateTable = std::map<std::string, PredicateFn>;

inline std::set<std::string> predicate_names(const PredicateTable& table) {
  std::set<std::string> names;
  for (const auto& [name, fn] : table) names.insert(name);
  return names;
}

}  // namespace stlsplit
