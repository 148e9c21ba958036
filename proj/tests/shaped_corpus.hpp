// SPDX-License-Identifier: Apache-2.0
//
// Synthetic corpus whose per-language sentence counts and mutation sites
// reproduce the full-scale dataset shape: 338 Java and 958 Python incomplete
// responses, with at least 330 valid mutants per language.
#pragma once

#include <string>
#include <vector>

#include "gapfinder/corpus.hpp"

namespace gapfinder::testing {

inline std::vector<std::string> filler(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("Note number " + std::to_string(i + 1) + " about the program.");
  return out;
}

inline CodeExample shaped_java(std::size_t index, std::size_t sentences) {
  const std::string name = "Shaped" + std::to_string(index);
  CodeExample ex{"java-" + std::to_string(index), Language::java,
                 "public class " + name + " {\n  public static void main(String[] args) {\n    int[] a = new int[6];\n"
                 "    for (int i = 0; i <= 5; i++) {\n      a[i] = i * 2;\n    }\n    System.out.println(a[5]);\n  }\n}\n",
                 {"arrays", "for loop"},
                 {"An array a of size 6 is created.", "A for loop runs from i = 0 to i = 5.",
                  "The program prints the last element."}};
  for (auto& s : filler(sentences - ex.expert_explanation.size())) ex.expert_explanation.push_back(s);
  return ex;
}

inline CodeExample shaped_python(std::size_t index, std::size_t sentences) {
  CodeExample ex{"python-" + std::to_string(index), Language::python,
                 "n = 6\nvals = [0] * n\nfor i in range(n):\n    vals[i] = i / 2\nprint(vals)\n",
                 {"lists", "range"},
                 {"The variable n is set to 6 and vals is a list of n zeros.",
                  "A loop over range(n) starts at index 0.", "Each element is i divided by 2.",
                  "The program prints the list."}};
  for (auto& s : filler(sentences - ex.expert_explanation.size())) ex.expert_explanation.push_back(s);
  return ex;
}

/// 110 Java examples (108 with 4 sentences, 2 with 8) and 110 Python
/// examples (32 with 9 sentences, 78 with 10).
inline std::vector<CodeExample> shaped_corpus() {
  std::vector<CodeExample> out;
  for (std::size_t i = 0; i < 110; ++i) out.push_back(shaped_java(i, i < 108 ? 4 : 8));
  for (std::size_t i = 0; i < 110; ++i) out.push_back(shaped_python(i, i < 32 ? 9 : 10));
  return out;
}

}  // namespace gapfinder::testing
