#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "entropyspc/entropyspc.hpp"

namespace testing_support {

inline std::string fixture(const std::string& name) { return std::string(ENTROPYSPC_FIXTURES) + "/" + name; }

/// Numeric table from a headed CSV fixture; '#' lines skipped.
inline std::vector<std::vector<double>> numeric_rows(const std::string& name) {
  std::ifstream in(fixture(name));
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<entropyspc::CoefficientVector> coefficients(const std::string& name, entropyspc::Method m) {
  return entropyspc::io::load_coefficients(fixture(name), m);
}

inline std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t c) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.at(c));
  return out;
}

/// Minimal XML well-formedness check: balanced, properly nested tags,
/// quoted attributes, a single root element.
inline bool well_formed_xml(const std::string& s, std::string* why = nullptr) {
  auto bad = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  std::vector<std::string> stack;
  int roots = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      if (s[i] == '&') {
        const auto semi = s.find(';', i);
        if (semi == std::string::npos || semi - i > 8) return bad("bare ampersand");
      }
      ++i;
      continue;
    }
    if (s.compare(i, 5, "<?xml") == 0) {
      const auto end = s.find("?>", i);
      if (end == std::string::npos) return bad("unterminated declaration");
      i = end + 2;
      continue;
    }
    if (s.compare(i, 4, "<!--") == 0) {
      const auto end = s.find("-->", i);
      if (end == std::string::npos) return bad("unterminated comment");
      i = end + 3;
      continue;
    }
    const auto end = s.find('>', i);
    if (end == std::string::npos) return bad("unterminated tag");
    std::string tag = s.substr(i + 1, end - i - 1);
    i = end + 1;
    int quotes = 0;
    for (char c : tag) quotes += c == '"';
    if (quotes % 2) return bad("unbalanced quotes in <" + tag + ">");
    if (!tag.empty() && tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return bad("mismatched </" + name + ">");
      stack.pop_back();
      continue;
    }
    const bool self_closing = !tag.empty() && tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (name.empty()) return bad("empty tag name");
    if (stack.empty()) ++roots;
    if (!self_closing) stack.push_back(name);
  }
  if (!stack.empty()) return bad("unclosed <" + stack.back() + ">");
  if (roots != 1) return bad("expected one root element");
  return true;
}

}  // namespace testing_support
