#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace outline_forge {

// Verbs: augment, fewshot, fidprep, cutouts, score, preview, validate.
// Reports go to `out` as JSON, diagnostics to `err`. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace outline_forge
