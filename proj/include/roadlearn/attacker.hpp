#pragma once

#include "roadlearn/lti/types.hpp"
#include "roadlearn/privacy/message.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace roadlearn::attacker {

using lti::Roots;
using privacy::RelayMessage;

// Model-reduction attack on an intercepted message. S~ is realized, trimmed
// to a minimal realization, split into stable and antistable parts, and the
// stable part is reduced by balanced truncation to the assumed order (the
// antistable poles are kept as they are). When S~ has fewer states than the
// assumed order, the remaining poles come from T~ reduced the same way.
Roots infer_poles(const RelayMessage& msg, int assumed_order);

// Same attack starting from the serialized wire bytes, which is all an
// eavesdropper holds.
Roots infer_poles_from_wire(const std::string& bytes, int assumed_order);

// Minimum-cost matching between the two sets (Hungarian algorithm); unmatched
// elements cost the diameter of the truth set. Returns the mean cost per
// element of the larger set.
double pole_matching_distance(const Roots& estimated, const Roots& truth);

struct AttackRecord {
    int trial = 0;
    int vehicle = 0;
    Roots true_poles;
    Roots inferred_poles;
    double distance = 0.0;
};

// "re+imj" entries joined with ';'.
std::string format_roots(const Roots& r);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const AttackRecord& rec);

}  // namespace roadlearn::attacker
