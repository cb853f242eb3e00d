#pragma once

#include "pqdns/common.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pqdns
{
  enum class RType : std::uint16_t
  {
    A = 1,
    NS = 2,
    SOA = 6,
    OPT = 41,
    DS = 43,
    RRSIG = 46,
    DNSKEY = 48,
  };

  std::string to_string(RType t);
  /// Accepts mnemonics (case-insensitive) and the generic `TYPEnnn` form.
  std::optional<RType> rtype_from_string(std::string_view s);

  inline constexpr std::uint16_t class_in = 1;

  /// DNSSEC algorithm numbers used by the stack. 240-242 are local
  /// assignments for the post-quantum suites.
  namespace alg
  {
    inline constexpr std::uint8_t rsasha256 = 8;
    inline constexpr std::uint8_t ecdsap256sha256 = 13;
    inline constexpr std::uint8_t falcon512 = 240;
    inline constexpr std::uint8_t dilithium2 = 241;
    inline constexpr std::uint8_t sphincs_sha256_128s = 242;
  }

  namespace rcode
  {
    inline constexpr std::uint8_t noerror = 0;
    inline constexpr std::uint8_t formerr = 1;
    inline constexpr std::uint8_t servfail = 2;
    inline constexpr std::uint8_t nxdomain = 3;
    inline constexpr std::uint8_t notimp = 4;
    inline constexpr std::uint8_t refused = 5;
  }

  /// Domain name as an ordered list of raw labels. Labels may contain any
  /// byte (fragment labels contain '?'). Equality is exact; use
  /// `equals_ci` or `lowercase()` for DNS comparison semantics.
  class Name
  {
  public:
    static constexpr std::size_t max_label = 63;
    static constexpr std::size_t max_wire = 255;

    Name() = default;
    explicit Name(std::vector<std::string> labels);

    /// Presentation format. A trailing dot is optional; "." and "" are
    /// the root. `\.`, `\\` and `\DDD` escapes are understood.
    static Name parse(std::string_view text);
    /// Like `parse`, but names without a trailing dot are taken relative
    /// to `origin`, and "@" is the origin itself.
    static Name parse_relative(std::string_view text, const Name& origin);

    const std::vector<std::string>& labels() const
    {
      return labels_;
    }

    std::size_t label_count() const
    {
      return labels_.size();
    }

    bool is_root() const
    {
      return labels_.empty();
    }

    std::size_t wire_length() const;
    std::string to_string() const;

    Name lowercase() const;
    bool equals_ci(const Name& other) const;
    /// True if this name is `parent` or lies below it (case-insensitive).
    bool is_subdomain_of(const Name& parent) const;
    Name parent() const;
    Name prepend(std::string label) const;
    /// Uncompressed wire form.
    Bytes to_wire() const;
    /// Uncompressed wire form with ASCII letters lowercased.
    Bytes canonical_wire() const;

    friend bool operator==(const Name&, const Name&) = default;

  private:
    std::vector<std::string> labels_;
  };

  struct NameHashCi
  {
    std::size_t operator()(const Name& n) const;
  };

  struct NameEqualCi
  {
    bool operator()(const Name& a, const Name& b) const
    {
      return a.equals_ci(b);
    }
  };

  struct Header
  {
    std::uint16_t id = 0;
    bool qr = false;
    std::uint8_t opcode = 0;
    bool aa = false;
    bool tc = false;
    bool rd = false;
    bool ra = false;
    std::uint8_t z = 0;
    std::uint8_t rcode = 0;

    std::uint16_t pack_flags() const;
    static Header with_flags(std::uint16_t id, std::uint16_t flags);

    friend bool operator==(const Header&, const Header&) = default;
  };

  struct ARdata
  {
    std::array<std::uint8_t, 4> address{};

    static ARdata parse(std::string_view dotted);
    std::string to_string() const;
    friend bool operator==(const ARdata&, const ARdata&) = default;
  };

  struct NsRdata
  {
    Name host;
    friend bool operator==(const NsRdata&, const NsRdata&) = default;
  };

  struct SoaRdata
  {
    Name mname;
    Name rname;
    std::uint32_t serial = 0;
    std::uint32_t refresh = 0;
    std::uint32_t retry = 0;
    std::uint32_t expire = 0;
    std::uint32_t minimum = 0;
    friend bool operator==(const SoaRdata&, const SoaRdata&) = default;
  };

  struct DsRdata
  {
    std::uint16_t key_tag = 0;
    std::uint8_t algorithm = 0;
    std::uint8_t digest_type = 0;
    Bytes digest;
    friend bool operator==(const DsRdata&, const DsRdata&) = default;
  };

  struct RrsigRdata
  {
    RType type_covered = RType::A;
    std::uint8_t algorithm = 0;
    std::uint8_t labels = 0;
    std::uint32_t original_ttl = 0;
    std::uint32_t expiration = 0;
    std::uint32_t inception = 0;
    std::uint16_t key_tag = 0;
    Name signer;
    Bytes signature;

    /// Length of everything before the signature (fixed fields + signer).
    std::size_t prefix_length() const
    {
      return 18 + signer.wire_length();
    }

    friend bool operator==(const RrsigRdata&, const RrsigRdata&) = default;
  };

  struct DnskeyRdata
  {
    static constexpr std::uint16_t zsk_flags = 256;
    static constexpr std::uint16_t ksk_flags = 257;
    static constexpr std::size_t prefix_length = 4;

    std::uint16_t flags = zsk_flags;
    std::uint8_t protocol = 3;
    std::uint8_t algorithm = 0;
    Bytes public_key;

    bool is_ksk() const
    {
      return flags == ksk_flags;
    }

    friend bool operator==(const DnskeyRdata&, const DnskeyRdata&) = default;
  };

  /// Anything not decoded into a typed form (OPT options, continuation
  /// slices, unknown types, malformed typed RDATA).
  struct OpaqueRdata
  {
    Bytes data;
    friend bool operator==(const OpaqueRdata&, const OpaqueRdata&) = default;
  };

  using Rdata = std::variant<
    OpaqueRdata,
    ARdata,
    NsRdata,
    SoaRdata,
    DsRdata,
    RrsigRdata,
    DnskeyRdata>;

  /// Uncompressed RDATA bytes. With `canonical`, embedded names (NS, SOA,
  /// RRSIG signer) are lowercased.
  Bytes encode_rdata(const Rdata& rdata, bool canonical = false);
  /// Typed decode of standalone (uncompressed) RDATA; falls back to
  /// OpaqueRdata when the bytes do not form a well-formed typed value.
  Rdata decode_rdata(RType type, ByteView bytes);

  struct Record
  {
    Name name;
    RType type = RType::A;
    std::uint16_t rclass = class_in;
    std::uint32_t ttl = 0;
    Rdata rdata;

    template <typename T>
    const T* as() const
    {
      return std::get_if<T>(&rdata);
    }

    template <typename T>
    T* as()
    {
      return std::get_if<T>(&rdata);
    }

    /// Uncompressed wire encoding of the whole record.
    Bytes to_wire() const;

    /// Structural equality; RDATA is compared through its wire form so
    /// that opaque and typed representations of the same bytes agree.
    friend bool operator==(const Record& a, const Record& b);
  };

  /// Record carrying an RRSIG, for the type that RRSIG covers.
  const RrsigRdata* rrsig_covering(const Record& r, RType covered);

  struct Question
  {
    Name qname;
    RType qtype = RType::A;
    std::uint16_t qclass = class_in;
    friend bool operator==(const Question&, const Question&) = default;
  };

  enum class Section : std::uint8_t
  {
    answer,
    authority,
    additional,
  };

  struct Message
  {
    Header header;
    std::vector<Question> question;
    std::vector<Record> answer;
    std::vector<Record> authority;
    std::vector<Record> additional;

    std::vector<Record>& section(Section s);
    const std::vector<Record>& section(Section s) const;

    const Record* opt() const;
    /// OPT advertised UDP payload size, clamped to [512, 65535].
    std::optional<std::uint16_t> udp_payload_size() const;

    friend bool operator==(const Message&, const Message&) = default;
  };

  inline constexpr std::array<Section, 3> all_sections{
    Section::answer, Section::authority, Section::additional};

  /// DNSSEC OK flag within the OPT record's TTL field.
  inline constexpr std::uint32_t opt_do_bit = 0x8000;

  /// OPT pseudo-record advertising `udp_size` (clamped to [512, 65535]).
  Record make_opt(std::uint16_t udp_size);

  Bytes encode_message(const Message& msg, bool compress = true);
  Message decode_message(ByteView wire);

  /// Byte range [offset, offset + length) of each resource record in a
  /// wire message, in wire order (answer, authority, additional).
  struct RecordSpan
  {
    Section section;
    std::size_t offset;
    std::size_t length;
  };
  std::vector<RecordSpan> record_spans(ByteView wire);

  /// Decodes one uncompressed resource record starting at `offset` and
  /// advances it. Compression pointers are rejected as BadPointer.
  Record decode_standalone_record(ByteView bytes, std::size_t& offset);

  /// Post-quantum algorithm signalled through the 3-bit z field of a
  /// truncated response: 1 = FALCON512, 2 = DILITHIUM2,
  /// 3 = SPHINCS+-SHA256-128S, 0 = none.
  std::uint8_t z_value_for_algorithm(std::optional<std::uint8_t> algorithm);
  std::optional<std::uint8_t> algorithm_for_z_value(std::uint8_t z);
  Header set_z_signal(Header h, std::optional<std::uint8_t> algorithm);

  std::string to_string(const Record& r);
  std::string rdata_to_string(const Record& r);
}
