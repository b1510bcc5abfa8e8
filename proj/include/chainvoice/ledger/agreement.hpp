#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainvoice/ledger/crypto.hpp"

namespace chainvoice::ledger {

using Amount = std::int64_t;

struct AgreementSignature {
  PartyId party;
  std::string signature;
};

struct SupplyAgreement {
  PartyId supplier;
  PartyId buyer;
  std::string item;
  std::int64_t quantity = 0;
  Amount unit_price = 0;
  int payment_terms_days = 60;  // 30 or 60
  std::vector<AgreementSignature> signatures;

  Amount value() const { return quantity * unit_price; }

  /// Canonical serialization of the terms (everything but the signatures);
  /// this is what each party signs.
  std::string terms() const;

  /// Appends (or replaces) `party`'s signature over the terms.
  void sign(const Keyring& keyring, const PartyId& party);
  bool signed_by(const Keyring& keyring, const PartyId& party) const;
  /// Both supplier and buyer signatures present and valid.
  bool countersigned(const Keyring& keyring) const;
};

nlohmann::json to_json(const SupplyAgreement& agreement);
/// Throws ParseError on missing fields or payment terms other than 30/60.
SupplyAgreement agreement_from_json(const nlohmann::json& doc);

}  // namespace chainvoice::ledger
