#include "roadlearn/privacy/message.hpp"

#include "roadlearn/lti/serialize.hpp"

namespace roadlearn::privacy {

nlohmann::json to_wire(const RelayMessage& msg) {
    return lti::document("RelayMessage", nlohmann::json{{"sender_id", msg.sender_id},
                                                        {"T_tilde", lti::to_json(msg.T_tilde)},
                                                        {"S_tilde", lti::to_json(msg.S_tilde)},
                                                        {"e_tilde", lti::to_json(msg.e_tilde)},
                                                        {"w_f_tilde", lti::to_json(msg.w_f_tilde)}});
}

RelayMessage from_wire(const nlohmann::json& doc) {
    const nlohmann::json& v = lti::document_payload(doc, "RelayMessage");
    return RelayMessage{lti::transfer_matrix_from_json(v.at("T_tilde")),
                        lti::transfer_matrix_from_json(v.at("S_tilde")),
                        lti::signal_from_json(v.at("e_tilde")),
                        lti::signal_from_json(v.at("w_f_tilde")), v.at("sender_id").get<std::string>()};
}

std::string serialize(const RelayMessage& msg) { return to_wire(msg).dump(); }

RelayMessage deserialize(const std::string& bytes) { return from_wire(nlohmann::json::parse(bytes)); }

}  // namespace roadlearn::privacy
