// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

// Runs the acceptance criteria at full size and prints one PASS/FAIL line per
// criterion. Arguments select criterion numbers; none runs all of them.
// Exits nonzero when any selected criterion fails.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "scout/verify.hpp"

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  scout::verify::Options o;
  o.log = &std::cerr;
  if (const char* corpus = std::getenv("SCOUT_CORPUS")) o.corpus = corpus;
  std::ofstream table;
  if (ids.empty() || std::find(ids.begin(), ids.end(), 8) != ids.end()) {
    table.open("ablation_table.csv", std::ios::trunc);
    o.ablation_table = &table;
  }
  return scout::verify::run_all(o, std::cout, ids) ? 0 : static_cast<int>(scout::ExitCode::kCheckFailure);
}
