#include "chainvoice/ledger/agreement.hpp"

#include <algorithm>

#include "chainvoice/error.hpp"

namespace chainvoice::ledger {

using nlohmann::json;

std::string SupplyAgreement::terms() const {
  return json{{"supplier", supplier},
              {"buyer", buyer},
              {"item", item},
              {"quantity", quantity},
              {"unit_price", unit_price},
              {"payment_terms_days", payment_terms_days}}
      .dump();
}

void SupplyAgreement::sign(const Keyring& keyring, const PartyId& party) {
  auto sig = keyring.sign(party, terms());
  auto it = std::find_if(signatures.begin(), signatures.end(), [&](const auto& s) { return s.party == party; });
  if (it != signatures.end()) {
    it->signature = std::move(sig);
  } else {
    signatures.push_back({party, std::move(sig)});
  }
}

bool SupplyAgreement::signed_by(const Keyring& keyring, const PartyId& party) const {
  const auto payload = terms();
  return std::any_of(signatures.begin(), signatures.end(), [&](const auto& s) {
    return s.party == party && keyring.verify(party, payload, s.signature);
  });
}

bool SupplyAgreement::countersigned(const Keyring& keyring) const {
  return signed_by(keyring, supplier) && signed_by(keyring, buyer);
}

json to_json(const SupplyAgreement& a) {
  json sigs = json::array();
  for (const auto& s : a.signatures) sigs.push_back(json{{"party", s.party}, {"signature", s.signature}});
  return json{{"supplier", a.supplier},
              {"buyer", a.buyer},
              {"item", a.item},
              {"quantity", a.quantity},
              {"unit_price", a.unit_price},
              {"payment_terms_days", a.payment_terms_days},
              {"signatures", std::move(sigs)}};
}

SupplyAgreement agreement_from_json(const json& doc) {
  SupplyAgreement a;
  try {
    a.supplier = doc.at("supplier").get<std::string>();
    a.buyer = doc.at("buyer").get<std::string>();
    a.item = doc.value("item", "");
    a.quantity = doc.at("quantity").get<std::int64_t>();
    a.unit_price = doc.at("unit_price").get<Amount>();
    a.payment_terms_days = doc.at("payment_terms_days").get<int>();
    for (const auto& s : doc.value("signatures", json::array()))
      a.signatures.push_back({s.at("party").get<std::string>(), s.at("signature").get<std::string>()});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("supply agreement: ") + e.what());
  }
  if (a.payment_terms_days != 30 && a.payment_terms_days != 60)
    throw Error(ErrorCode::ParseError, "supply agreement payment terms must be 30 or 60 days");
  if (a.quantity < 0 || a.unit_price < 0)
    throw Error(ErrorCode::ParseError, "supply agreement quantity and price must be non-negative");
  return a;
}

}  // namespace chainvoice::ledger
