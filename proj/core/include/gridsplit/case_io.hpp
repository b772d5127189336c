#pragma once

#include <iosfwd>
#include <string>

#include "gridsplit/network.hpp"

namespace gridsplit {

enum class CaseFormat { MatpowerM, Json };

/// Parse a case document and return a validated NetworkCase in per-unit.
/// Input powers are MW/MVAr per MATPOWER convention and are converted on
/// parse. Throws ParseError (with line number) or ValidationError.
NetworkCase parse_case(std::istream& text, CaseFormat format);
NetworkCase parse_case(const std::string& text, CaseFormat format);

/// Convenience loader; picks the format from the file extension
/// (.m -> MatpowerM, .json -> Json).
NetworkCase load_case(const std::string& path);

/// Serialize back to a case document (powers converted back to MW/MVAr).
/// parse(serialize(c)) reproduces c's numerical values exactly.
std::string serialize_case(const NetworkCase& net, CaseFormat format);

}  // namespace gridsplit
