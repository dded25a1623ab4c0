#include "dtmgp/error.hpp"

namespace dtmgp {

FormatError::FormatError(const std::string& what, std::size_t byte_offset)
    : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
      offset_(byte_offset) {}

FormatError::FormatError(const std::string& what) : Error(what) {}

}  // namespace dtmgp
