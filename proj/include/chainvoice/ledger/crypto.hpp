#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>

namespace chainvoice::ledger {

using PartyId = std::string;

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Ed25519 keys for every party, derived from SHA-256(seed "/" party) so a
/// run seed reproduces every signature byte-for-byte.
class Keyring {
 public:
  explicit Keyring(std::string seed);

  const std::string& seed() const noexcept { return seed_; }

  /// Idempotent.
  void add_party(const PartyId& party);
  bool has(const PartyId& party) const { return keys_.count(party) != 0; }

  /// Hex detached signature; throws BadSignature for a party without keys.
  std::string sign(const PartyId& party, std::string_view message) const;
  bool verify(const PartyId& party, std::string_view message, std::string_view signature_hex) const;
  std::string public_key_hex(const PartyId& party) const;

 private:
  struct Keys {
    std::array<unsigned char, 32> public_key;
    std::array<unsigned char, 64> secret_key;
  };

  const Keys& keys(const PartyId& party) const;

  std::string seed_;
  std::map<PartyId, Keys> keys_;
};

}  // namespace chainvoice::ledger
