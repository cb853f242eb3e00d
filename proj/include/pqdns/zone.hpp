#pragma once

#include "pqdns/codec.hpp"
#include "pqdns/crypto.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pqdns
{
  inline constexpr std::uint32_t max_zone_ttl = 0xFFFFFF;

  struct Zone
  {
    Name origin;
    /// Data records followed, once signed, by DNSKEY and RRSIG records.
    std::vector<Record> records;
    /// Signing keys (secret material stays out of the record list).
    std::vector<KeyPair> keys;

    bool is_signed() const;
    const Record& soa() const;

    /// Records of one RRset, in zone order. Owner match is case-insensitive.
    std::vector<Record> rrset(const Name& owner, RType type) const;
    std::vector<Record> rrsigs(const Name& owner, RType covered) const;
    bool has_owner(const Name& owner) const;

    /// Closest delegation point (non-apex NS owner) at or above `name`.
    std::optional<Name> delegation_for(const Name& name) const;
    /// True for RRsets this zone is authoritative for (everything except
    /// delegation NS and glue below a cut).
    bool is_authoritative(const Name& owner, RType type) const;

    friend bool operator==(const Zone& a, const Zone& b)
    {
      return a.origin == b.origin && a.records == b.records;
    }
  };

  /// Master-file subset: $ORIGIN, $TTL, @, blank owners, `;` comments,
  /// parentheses, A/NS/SOA/DS/DNSKEY/RRSIG and the generic `\#` form.
  /// `origin` is used when the text has no $ORIGIN before the first record.
  Zone parse_zone_file(std::string_view text, const std::optional<Name>& origin = std::nullopt);
  std::string print_zone(const Zone& zone);

  /// KSK and ZSK for each requested class. At least one suite is needed and
  /// no two suites may share a class.
  std::vector<KeyPair> make_zone_keys(
    const SuiteRegistry& registry,
    const Name& origin,
    std::optional<std::uint8_t> pre,
    std::optional<std::uint8_t> post,
    ByteView seed);

  /// Publishes one DNSKEY per key and signs every authoritative RRset with
  /// the ZSK of each class. The DNSKEY RRset is signed by every key.
  Zone sign_zone(
    const Zone& zone,
    const SuiteRegistry& registry,
    std::vector<KeyPair> keys,
    std::uint32_t now,
    std::uint32_t dnskey_ttl = 3600);

  Zone sign_zone(
    const Zone& zone,
    const SuiteRegistry& registry,
    std::optional<std::uint8_t> pre,
    std::optional<std::uint8_t> post,
    std::uint32_t now,
    ByteView seed);

  /// SHA-256 (digest type 2) DS over owner || DNSKEY RDATA.
  DsRdata make_ds(const Name& owner, const DnskeyRdata& key);
  /// One DS record per KSK of a signed zone.
  std::vector<Record> make_ds(const Zone& zone);
  bool ds_matches(const DsRdata& ds, const Name& owner, const DnskeyRdata& key);

  struct TrustAnchor
  {
    Name zone;
    std::vector<DsRdata> ds;

    static TrustAnchor from_zone(const Zone& signed_zone);
    /// One DS per line: `zone key_tag algorithm 2 hex-digest`.
    static TrustAnchor parse(std::string_view text);
    std::string to_string() const;
  };
}
