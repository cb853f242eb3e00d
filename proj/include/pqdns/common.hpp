#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pqdns
{
  using Bytes = std::vector<std::uint8_t>;
  using ByteView = std::span<const std::uint8_t>;

  /// Signature algorithm family: classical (pre-quantum) or post-quantum.
  enum class SigClass : std::uint8_t
  {
    pre_quantum,
    post_quantum,
  };

  std::string_view to_string(SigClass c);

  enum class Errc
  {
    // codec
    truncated,
    pointer_loop,
    bad_pointer,
    count_mismatch,
    name_too_long,
    label_too_long,
    bad_label,
    rdata_too_long,
    bad_rdata,
    unknown_algorithm,
    // crypto
    too_short,
    empty_rrset,
    mixed_rrset,
    role_violation,
    missing_class,
    no_valid_signature,
    bad_key_file,
    crypto_failure,
    // zone
    syntax_error,
    ttl_too_large,
    no_soa,
    class_mismatch,
    not_signed,
    // fragment
    first_fragment_overflow,
    continuation_overflow,
    out_of_range,
    // reassembly
    not_truncated,
    unknown_z_value,
    inconsistent_first_fragment,
    unexpected_fragment,
    length_mismatch,
    incomplete,
    stream_corrupt,
    order_conflict,
    fragment_rcode,
    // resolver / transport
    timeout,
    validation_failure,
    chain_broken,
    nx_domain,
    server_failure,
    network,
    // simnet
    fixture_error,
    datagram_too_large,
  };

  std::string_view to_string(Errc e);

  /// The single exception type thrown by the library. `code()` is the
  /// machine-readable reason; `side()` names the signature class for
  /// class-specific validation errors; `cause()` carries the underlying
  /// reason when a failure wraps another (validation_failure).
  class Error : public std::runtime_error
  {
  public:
    Error(Errc code, const std::string& msg) :
      std::runtime_error(msg),
      code_(code)
    {}

    Error(
      Errc code,
      const std::string& msg,
      std::optional<SigClass> side,
      std::optional<Errc> cause = std::nullopt) :
      std::runtime_error(msg),
      code_(code),
      side_(side),
      cause_(cause)
    {}

    Errc code() const
    {
      return code_;
    }

    std::optional<SigClass> side() const
    {
      return side_;
    }

    std::optional<Errc> cause() const
    {
      return cause_;
    }

  private:
    Errc code_;
    std::optional<SigClass> side_;
    std::optional<Errc> cause_;
  };

  [[noreturn]] void fail(Errc code, const std::string& msg);

  std::string to_hex(ByteView data);
  Bytes from_hex(std::string_view hex);
  std::string to_base64(ByteView data);
  Bytes from_base64(std::string_view text);

  inline ByteView view(const Bytes& b)
  {
    return ByteView(b.data(), b.size());
  }
}
