#pragma once

#include <string>

namespace monosurf {

/// Shortest decimal text that round-trips to the same double. Used for every
/// numeric cell the library writes, so identical values give identical bytes.
std::string format_number(double v);

}  // namespace monosurf
