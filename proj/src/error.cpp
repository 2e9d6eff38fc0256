#include "planemvs/error.hpp"

namespace planemvs {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Degenerate: return "degenerate";
    }
    return "unknown";
}

} // namespace planemvs
