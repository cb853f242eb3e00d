#pragma once

#include "pqdns/codec.hpp"
#include "pqdns/crypto.hpp"
#include "pqdns/zone.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pqdns
{
  /// Signature suite pair. `pre` may be absent (post-quantum alone).
  struct Combo
  {
    std::optional<std::uint8_t> pre;
    std::optional<std::uint8_t> post;

    /// "FALCON", "FALCON+ECDSA", "SPHINCS+RSA", ...
    std::string name() const;
    /// Accepts the short names above and suite names joined by '+'.
    static Combo parse(std::string_view text, const SuiteRegistry& registry);

    friend bool operator==(const Combo&, const Combo&) = default;
  };

  /// The nine combinations of {FALCON, DILITHIUM, SPHINCS+} x {alone,
  /// +ECDSA, +RSA}, post-quantum family major.
  std::vector<Combo> all_combos();

  namespace fixture
  {
    inline constexpr const char* root_address = "10.9.9.1";
    inline constexpr const char* auth_address = "10.9.9.2";
    inline constexpr const char* resolver_address = "10.9.9.3";
    inline constexpr const char* client_address = "10.9.9.4";
    /// Signing time used by deterministic runs (2023-11-14).
    inline constexpr std::uint32_t epoch = 1700000000;

    /// socratescrc. with SOA, NS ns1, ns1 A and test0..test9 A records.
    std::string child_zone_text();
    /// Root zone delegating socratescrc. (DS records are added on signing).
    std::string root_zone_text();
    Name child_origin();
    std::vector<Name> query_names();
  }

  struct Testbed
  {
    Combo combo;
    Zone root;
    Zone child;
    TrustAnchor anchor;
  };

  /// Signs the child, publishes its DS in the root, signs the root and
  /// derives the trust anchor.
  Testbed make_testbed(
    const SuiteRegistry& registry,
    const Combo& combo,
    std::uint32_t now = fixture::epoch,
    std::string_view seed = "testbed");

  Message make_query(const Name& qname, RType qtype, std::uint16_t id = 1, std::optional<std::uint16_t> udp_size = 1232);
}
