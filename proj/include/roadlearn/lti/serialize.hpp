#pragma once

#include "roadlearn/lti/types.hpp"

#include "json.hpp"

#include <string>

namespace roadlearn::lti {

// Schema tag written into every top-level document.
inline constexpr const char* kSchema = "roadlearn/1";

nlohmann::json to_json(const Matrix& M);
nlohmann::json to_json(const Complex& z);
nlohmann::json to_json(const Roots& r);
nlohmann::json to_json(const StateSpace& sys);
nlohmann::json to_json(const RationalEntry& e);
nlohmann::json to_json(const TransferMatrix& G);
nlohmann::json to_json(const Signal& s);
nlohmann::json to_json(const FrequencyResponse& fr);

Matrix matrix_from_json(const nlohmann::json& j);
Complex complex_from_json(const nlohmann::json& j);
Roots roots_from_json(const nlohmann::json& j);
StateSpace state_space_from_json(const nlohmann::json& j);
RationalEntry entry_from_json(const nlohmann::json& j);
TransferMatrix transfer_matrix_from_json(const nlohmann::json& j);
Signal signal_from_json(const nlohmann::json& j);
FrequencyResponse frequency_response_from_json(const nlohmann::json& j);

// Wraps a payload as {"schema": ..., "type": ..., "value": payload}.
nlohmann::json document(const std::string& type, nlohmann::json payload);
// Validates schema and type and returns the payload.
const nlohmann::json& document_payload(const nlohmann::json& doc, const std::string& type);

}  // namespace roadlearn::lti
