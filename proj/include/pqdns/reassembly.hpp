#pragma once

#include "pqdns/codec.hpp"
#include "pqdns/crypto.hpp"
#include "pqdns/fragment.hpp"

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace pqdns
{
  struct OmittedRecord
  {
    Section section = Section::answer;
    RType type = RType::RRSIG;
    Name owner;
    std::size_t wire_length = 0;
  };

  struct SplitDescriptor
  {
    Section section = Section::answer;
    /// Position within the first fragment's section (not the original index).
    std::size_t position = 0;
    RType type = RType::RRSIG;
    std::uint8_t algorithm = 0;
    std::size_t present = 0;
    std::size_t missing = 0;
  };

  /// The resolver's reconstruction of the server's plan from fragment 1.
  struct FragmentForecast
  {
    std::size_t n_fragments = 0;
    std::size_t stream_len = 0;
    std::uint8_t postq_suite = 0;
    std::optional<SplitDescriptor> split;
    std::vector<OmittedRecord> omitted;
    std::vector<Slice> slices;
    Name base;
    RType qtype = RType::A;
    /// True when pre-quantum material was present to mirror.
    bool dual = false;
  };

  FragmentForecast forecast(
    const Message& first, const SuiteRegistry& registry, const FragmentConfig& cfg);

  /// Queries for fragments 2..N with pairwise distinct ids from `next_id`.
  std::vector<Message> fragment_queries(
    const FragmentForecast& fc,
    const Name& base,
    RType qtype,
    const std::function<std::uint16_t()>& next_id,
    std::uint16_t udp_size = 1232);

  class ReassemblyState
  {
  public:
    ReassemblyState(Message first, FragmentForecast fc);

    /// Stores the slice carried by a continuation response. Returns false
    /// for duplicates. Throws UnexpectedFragment, LengthMismatch or
    /// FragmentRcode.
    bool accept(const Message& response);
    /// Same, taking the raw datagram so the slice bytes are read verbatim.
    bool accept_wire(ByteView wire);

    bool complete() const;
    std::vector<std::size_t> missing() const;
    const FragmentForecast& forecast() const
    {
      return fc_;
    }
    const Message& first() const
    {
      return first_;
    }

    Bytes stream() const;
    /// The original response: split record completed, omitted records
    /// decoded, sections reordered by TTL position, TTLs restored, TC and
    /// z cleared. Throws Incomplete, StreamCorrupt or OrderConflict.
    Message reassemble() const;

  private:
    bool store(std::size_t n, const Name& qname, Bytes slice);

    Message first_;
    FragmentForecast fc_;
    std::map<std::size_t, Bytes> received_;
  };

  /// Convenience for tests and tools: fragment 1 plus the continuation
  /// stream of a plan, reassembled without any network.
  Message reassemble_plan(
    const FragmentPlan& plan, const SuiteRegistry& registry, const FragmentConfig& cfg);
}
