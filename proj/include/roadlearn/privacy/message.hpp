#pragma once

#include "roadlearn/lti/types.hpp"

#include "json.hpp"

#include <string>

namespace roadlearn::privacy {

// What one vehicle hands to its successor. With privacy on every field has
// already passed through the sender's obfuscators.
struct RelayMessage {
    lti::TransferMatrix T_tilde;
    lti::TransferMatrix S_tilde;
    lti::Signal e_tilde;
    lti::Signal w_f_tilde;
    std::string sender_id;
};

// Wire format: a versioned JSON document of type "RelayMessage".
nlohmann::json to_wire(const RelayMessage& msg);
RelayMessage from_wire(const nlohmann::json& doc);
std::string serialize(const RelayMessage& msg);
RelayMessage deserialize(const std::string& bytes);

}  // namespace roadlearn::privacy
