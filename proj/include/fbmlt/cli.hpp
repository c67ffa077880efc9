#pragma once

namespace fbmlt {

/// Command-line entry point. Returns 0 on success, 1 on usage, domain, configuration or
/// resource errors, 2 on numerical or accuracy failures.
int run_cli(int argc, char** argv);

}  // namespace fbmlt
