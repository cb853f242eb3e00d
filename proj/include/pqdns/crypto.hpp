#pragma once

#include "pqdns/codec.hpp"
#include "pqdns/common.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pqdns
{
  struct KeyMaterial
  {
    Bytes secret;
    Bytes public_key;
  };

  /// Signer/verifier implementation behind a suite. Implementations must be
  /// reentrant; one backend instance is shared by every thread.
  class SignatureBackend
  {
  public:
    virtual ~SignatureBackend() = default;
    virtual KeyMaterial generate(ByteView seed) const = 0;
    virtual Bytes sign(ByteView secret, ByteView message) const = 0;
    virtual bool verify(ByteView public_key, ByteView message, ByteView signature) const = 0;
  };

  /// Size- and determinism-faithful stand-in for a post-quantum scheme:
  /// public = SHAKE256(seed), signature = SHAKE256(public || message).
  /// Anyone holding the public key can produce valid signatures, so this
  /// gives no security at all; it exists to exercise protocol mechanics.
  std::shared_ptr<const SignatureBackend> make_mock_backend(
    std::size_t sig_len, std::size_t pubkey_len);
  /// ECDSA P-256 with SHA-256 (RFC 6605 key and signature encoding).
  std::shared_ptr<const SignatureBackend> make_ecdsa_p256_backend();
  /// RSA-2048 PKCS#1 v1.5 with SHA-256 (RFC 3110 key encoding). Key
  /// generation is deterministic in the seed.
  std::shared_ptr<const SignatureBackend> make_rsa2048_backend();

  struct SignatureSuite
  {
    std::uint8_t code = 0;
    std::string name;
    SigClass cls = SigClass::pre_quantum;
    std::size_t sig_len = 0;
    std::size_t pubkey_len = 0;
    std::shared_ptr<const SignatureBackend> backend;
  };

  /// Algorithm registry and the size table both endpoints use for fragment
  /// planning and forecasting. Immutable once shared.
  class SuiteRegistry
  {
  public:
    /// Real ECDSA-P256 and RSA-2048 plus mock post-quantum suites.
    static const SuiteRegistry& standard();
    /// Every suite backed by the mock backend; fully deterministic.
    static const SuiteRegistry& mock();

    SuiteRegistry& add(SignatureSuite suite);

    const SignatureSuite* find(std::uint8_t code) const;
    const SignatureSuite& at(std::uint8_t code) const;
    /// Case-insensitive lookup by name or short alias ("ecdsap256",
    /// "rsasha256", "falcon512", "dilithium2", "sphincs+").
    const SignatureSuite& by_name(std::string_view name) const;
    std::optional<SigClass> class_of(std::uint8_t code) const;

    std::vector<std::uint8_t> codes() const;

  private:
    std::map<std::uint8_t, SignatureSuite> suites_;
  };

  enum class KeyRole : std::uint8_t
  {
    zsk,
    ksk,
  };

  std::string_view to_string(KeyRole r);

  struct KeyPair
  {
    std::uint8_t algorithm = 0;
    KeyRole role = KeyRole::zsk;
    Bytes secret;
    Bytes public_key;
    std::uint16_t key_tag = 0;

    DnskeyRdata dnskey() const;
  };

  KeyPair generate_keypair(
    const SuiteRegistry& registry, std::uint8_t algorithm, KeyRole role, ByteView seed);

  /// RFC 4034 Appendix B key tag over DNSKEY RDATA.
  std::uint16_t key_tag(ByteView dnskey_rdata);

  struct ValidityWindow
  {
    std::uint32_t inception = 0;
    std::uint32_t expiration = 0;

    /// now - 1 h .. now + 30 days.
    static ValidityWindow around(std::uint32_t now);
  };

  /// Bytes covered by a signature: RRSIG RDATA up to (excluding) the
  /// signature, then the RRset in canonical form and order.
  Bytes signing_input(const RrsigRdata& sig, const std::vector<Record>& rrset);

  Record sign_rrset(
    const SuiteRegistry& registry,
    const std::vector<Record>& rrset,
    const KeyPair& key,
    const Name& signer,
    ValidityWindow window);

  /// True iff the backend accepts the signature and `now` lies within the
  /// validity window. Throws UnknownAlgorithm for unregistered suites.
  bool verify_rrsig(
    const SuiteRegistry& registry,
    const Record& rrsig,
    const std::vector<Record>& rrset,
    ByteView public_key,
    std::uint32_t now);

  struct VerifiedDual
  {
    std::optional<std::uint16_t> pre_quantum_tag;
    std::optional<std::uint16_t> post_quantum_tag;
  };

  inline const std::vector<SigClass> both_classes{
    SigClass::pre_quantum, SigClass::post_quantum};

  /// Conjunctive acceptance: for every class in `required`, at least one
  /// RRSIG of that class must verify against one of `keys`. Throws
  /// MissingClass(side) when no RRSIG of a class is present and
  /// NoValidSignature(side) when none of them verifies.
  VerifiedDual verify_dual(
    const SuiteRegistry& registry,
    const std::vector<Record>& rrsigs,
    const std::vector<Record>& rrset,
    const std::vector<Record>& keys,
    std::uint32_t now,
    const std::vector<SigClass>& required = both_classes);

  /// Key file text: header lines then base64 public and secret sections.
  std::string write_key_file(const KeyPair& key, const SuiteRegistry& registry);
  KeyPair read_key_file(std::string_view text, const SuiteRegistry& registry);

  Bytes sha256(ByteView data);
  Bytes shake256(ByteView data, std::size_t out_len);
}
