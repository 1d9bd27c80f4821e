#pragma once

#include <set>
#include <stdexcept>
#include <string>

#include "stlsplit/formula.hpp"

namespace stlsplit {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int col)
      : std::runtime_error(msg + " at line " + std::to_string(line) + ", column " +
                           std::to_string(col)),
        line(line),
        col(col) {}
  int line;
  int col;
};

/// Parse the textual STL grammar:
///   formula := "true" | ident | "not" formula | formula ("and"|"or"|"->") formula
///            | ("G"|"F"|"H"|"O") "[" num "," (num|"inf") "]" formula
///            | formula "U" "[" num "," (num|"inf") "]" formula
///            | "(" formula ")"
/// Precedence: unary > U > and > or > "->" (right-associative).
/// Intervals are in timesteps. Every identifier must be in predicate_table.
Formula parse_formula(const std::string& text, const std::set<std::string>& predicate_table);

}  // namespace stlsplit
