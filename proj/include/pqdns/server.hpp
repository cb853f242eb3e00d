#pragma once

#include "pqdns/codec.hpp"
#include "pqdns/crypto.hpp"
#include "pqdns/fragment.hpp"
#include "pqdns/zone.hpp"

#include <atomic>
#include <optional>
#include <string>
#include <vector>

namespace pqdns
{
  enum class ServerRole
  {
    root,
    authoritative,
  };

  struct ServerConfig
  {
    ServerRole role = ServerRole::authoritative;
    std::vector<Zone> zones;
    FragmentConfig fragment;
    /// UDP payload size advertised in response OPT records.
    std::uint16_t advertised_size = 65535;
  };

  struct ServerStats
  {
    std::uint64_t queries = 0;
    std::uint64_t fragmented = 0;
    std::uint64_t continuations = 0;
    std::uint64_t cache_misses = 0;
  };

  /// Answers queries from signed zones and fragments oversized responses.
  /// `handle_*` is safe to call from several threads at once.
  class NameServer
  {
  public:
    NameServer(ServerConfig cfg, const SuiteRegistry& registry);

    /// Complete response before any fragmentation.
    Message respond(const Message& query) const;
    /// Full handling: fragment queries are served from the cache and
    /// oversized responses are replaced by their first fragment.
    Message handle_query(const Message& query, const std::string& client, double now);
    /// Wire in, wire out. Returns nothing for datagrams too short to answer.
    std::optional<Bytes> handle_datagram(ByteView wire, const std::string& client, double now);

    /// min(client OPT size, configured threshold), or 512 without OPT.
    std::size_t effective_threshold(const Message& query) const;

    const ServerConfig& config() const
    {
      return cfg_;
    }
    FragmentCache& cache()
    {
      return cache_;
    }
    ServerStats stats() const;

  private:
    const Zone* zone_for(const Name& qname) const;

    ServerConfig cfg_;
    const SuiteRegistry& registry_;
    FragmentCache cache_;
    std::atomic<std::uint64_t> queries_{0}, fragmented_{0}, continuations_{0}, misses_{0};
  };
}
