#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace davos
{
    // Exit codes: 0 success, 1 operational error, 2 usage error. Machine
    // output goes to `out` as one JSON document; diagnostics and installer
    // output go to `err`; prompts read `in`.
    int cli_main(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

    int cli_main(int argc, char** argv);
}
