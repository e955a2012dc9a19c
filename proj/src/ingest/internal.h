#ifndef RULESCOPE_SRC_INGEST_INTERNAL_H_
#define RULESCOPE_SRC_INGEST_INTERNAL_H_

#include <string>

#include "rulescope/ensemble.h"

namespace rulescope {

// Throws ParseError unless every node is reachable from nodes[0] exactly once.
void ValidateTreeShape(const Tree& tree, const std::string& where);

}  // namespace rulescope

#endif  // RULESCOPE_SRC_INGEST_INTERNAL_H_
