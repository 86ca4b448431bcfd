#pragma once

#include <string>
#include <vector>

namespace pdl::cli {

// Experiment runner entry point. Verbs: generate, train, eval, alm-solve,
// report. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace pdl::cli
