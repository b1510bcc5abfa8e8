#include "chainvoice/ledger/crypto.hpp"

#include <sodium.h>

#include <stdexcept>

#include "chainvoice/error.hpp"

namespace chainvoice::ledger {

namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

std::string to_hex(const unsigned char* data, std::size_t size) {
  std::string out(size * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), data, size);
  out.pop_back();
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  ensure_sodium();
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(data.data()), data.size());
  return to_hex(digest, sizeof digest);
}

Keyring::Keyring(std::string seed) : seed_(std::move(seed)) { ensure_sodium(); }

void Keyring::add_party(const PartyId& party) {
  if (has(party)) return;
  unsigned char key_seed[crypto_hash_sha256_BYTES];
  const std::string material = seed_ + "/" + party;
  crypto_hash_sha256(key_seed, reinterpret_cast<const unsigned char*>(material.data()), material.size());
  Keys keys{};
  crypto_sign_seed_keypair(keys.public_key.data(), keys.secret_key.data(), key_seed);
  keys_.emplace(party, keys);
}

const Keyring::Keys& Keyring::keys(const PartyId& party) const {
  auto it = keys_.find(party);
  if (it == keys_.end()) throw Error(ErrorCode::BadSignature, "no keys for party '" + party + "'");
  return it->second;
}

std::string Keyring::sign(const PartyId& party, std::string_view message) const {
  const auto& k = keys(party);
  unsigned char sig[crypto_sign_BYTES];
  crypto_sign_detached(sig, nullptr, reinterpret_cast<const unsigned char*>(message.data()), message.size(),
                       k.secret_key.data());
  return to_hex(sig, sizeof sig);
}

bool Keyring::verify(const PartyId& party, std::string_view message, std::string_view signature_hex) const {
  auto it = keys_.find(party);
  if (it == keys_.end()) return false;
  unsigned char sig[crypto_sign_BYTES];
  std::size_t len = 0;
  if (sodium_hex2bin(sig, sizeof sig, signature_hex.data(), signature_hex.size(), nullptr, &len, nullptr) != 0 ||
      len != sizeof sig)
    return false;
  return crypto_sign_verify_detached(sig, reinterpret_cast<const unsigned char*>(message.data()), message.size(),
                                     it->second.public_key.data()) == 0;
}

std::string Keyring::public_key_hex(const PartyId& party) const {
  const auto& k = keys(party);
  return to_hex(k.public_key.data(), k.public_key.size());
}

}  // namespace chainvoice::ledger
