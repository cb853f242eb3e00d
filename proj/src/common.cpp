#include "pqdns/common.hpp"

#include <openssl/evp.h>

#include <cctype>

namespace pqdns
{
  std::string_view to_string(SigClass c)
  {
    return c == SigClass::pre_quantum ? "pre-quantum" : "post-quantum";
  }

  std::string_view to_string(Errc e)
  {
    switch (e)
    {
      case Errc::truncated: return "Truncated";
      case Errc::pointer_loop: return "PointerLoop";
      case Errc::bad_pointer: return "BadPointer";
      case Errc::count_mismatch: return "CountMismatch";
      case Errc::name_too_long: return "NameTooLong";
      case Errc::label_too_long: return "LabelTooLong";
      case Errc::bad_label: return "BadLabel";
      case Errc::rdata_too_long: return "RdataTooLong";
      case Errc::bad_rdata: return "BadRdata";
      case Errc::unknown_algorithm: return "UnknownAlgorithm";
      case Errc::too_short: return "TooShort";
      case Errc::empty_rrset: return "EmptyRrset";
      case Errc::mixed_rrset: return "MixedRrset";
      case Errc::role_violation: return "RoleViolation";
      case Errc::missing_class: return "MissingClass";
      case Errc::no_valid_signature: return "NoValidSignature";
      case Errc::bad_key_file: return "BadKeyFile";
      case Errc::crypto_failure: return "CryptoFailure";
      case Errc::syntax_error: return "SyntaxError";
      case Errc::ttl_too_large: return "TtlTooLarge";
      case Errc::no_soa: return "NoSoa";
      case Errc::class_mismatch: return "ClassMismatch";
      case Errc::not_signed: return "NotSigned";
      case Errc::first_fragment_overflow: return "FirstFragmentOverflow";
      case Errc::continuation_overflow: return "ContinuationOverflow";
      case Errc::out_of_range: return "OutOfRange";
      case Errc::not_truncated: return "NotTruncated";
      case Errc::unknown_z_value: return "UnknownZValue";
      case Errc::inconsistent_first_fragment:
        return "InconsistentFirstFragment";
      case Errc::unexpected_fragment: return "UnexpectedFragment";
      case Errc::length_mismatch: return "LengthMismatch";
      case Errc::incomplete: return "Incomplete";
      case Errc::stream_corrupt: return "StreamCorrupt";
      case Errc::order_conflict: return "OrderConflict";
      case Errc::fragment_rcode: return "FragmentRcode";
      case Errc::timeout: return "Timeout";
      case Errc::validation_failure: return "ValidationFailure";
      case Errc::chain_broken: return "ChainBroken";
      case Errc::nx_domain: return "NxDomain";
      case Errc::server_failure: return "ServerFailure";
      case Errc::network: return "Network";
      case Errc::fixture_error: return "FixtureError";
      case Errc::datagram_too_large: return "DatagramTooLarge";
    }
    return "Unknown";
  }

  void fail(Errc code, const std::string& msg)
  {
    throw Error(code, std::string(to_string(code)) + ": " + msg);
  }

  std::string to_hex(ByteView data)
  {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data)
    {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0xF]);
    }
    return out;
  }

  Bytes from_hex(std::string_view hex)
  {
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9')
        return c - '0';
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
      return -1;
    };
    if (hex.size() % 2 != 0)
      fail(Errc::syntax_error, "odd-length hex string");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2)
    {
      int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
      if (hi < 0 || lo < 0)
        fail(Errc::syntax_error, "invalid hex digit");
      out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
  }

  std::string to_base64(ByteView data)
  {
    if (data.empty())
      return {};
    std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
    int n = EVP_EncodeBlock(
      reinterpret_cast<unsigned char*>(out.data()),
      data.data(),
      static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
  }

  Bytes from_base64(std::string_view text)
  {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text)
      if (!std::isspace(static_cast<unsigned char>(c)))
        clean.push_back(c);
    if (clean.empty())
      return {};
    if (clean.size() % 4 != 0)
      fail(Errc::syntax_error, "base64 length not a multiple of 4");
    Bytes out(clean.size() / 4 * 3);
    int n = EVP_DecodeBlock(
      out.data(),
      reinterpret_cast<const unsigned char*>(clean.data()),
      static_cast<int>(clean.size()));
    if (n < 0)
      fail(Errc::syntax_error, "invalid base64");
    // EVP_DecodeBlock does not strip padding.
    std::size_t pad = 0;
    if (clean.back() == '=')
      pad++;
    if (clean.size() >= 2 && clean[clean.size() - 2] == '=')
      pad++;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
  }
}
