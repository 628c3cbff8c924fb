#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mbprei {

// Command-line front end.  Returns 0 on success, 1 on validation failures
// (bad scenarios, bad arguments), 2 on numerical failures (non-convergence,
// undefined moments, overflow).  Reports are written under --out with
// deterministic bytes for a given configuration.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mbprei
