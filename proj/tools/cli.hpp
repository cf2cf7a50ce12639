#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stereokit::cli {

// Exit codes: 0 success, 1 domain/IO error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stereokit::cli
