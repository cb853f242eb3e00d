#pragma once

#include "pqdns/codec.hpp"
#include "pqdns/crypto.hpp"
#include "pqdns/fragment.hpp"
#include "pqdns/net.hpp"
#include "pqdns/zone.hpp"

#include <functional>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

namespace pqdns
{
  struct ResolverConfig
  {
    Endpoint root;
    TrustAnchor anchor;
    FragmentConfig fragment;
    double query_timeout = 2.0;
    int retries = 2;
    std::size_t cache_capacity = 10000;
    /// Signature classes that must each verify. Both by default; a single
    /// class only for benchmarking zones signed with one suite.
    std::vector<SigClass> required = both_classes;
    /// Rewrites server addresses learned from glue (e.g. onto loopback ports).
    std::map<std::string, Endpoint> address_map;
    /// Epoch seconds used for signature validity checks.
    std::function<std::uint32_t()> clock;
    std::uint32_t id_seed = 0x5eed;
  };

  struct ResolveResult
  {
    Name qname;
    RType qtype = RType::A;
    std::vector<Record> rrset;
    std::vector<Record> rrsigs;
    bool secure = false;
    bool from_cache = false;
    /// Datagrams received that were part of fragmented responses.
    std::size_t fragments = 0;
    std::size_t queries = 0;
    double elapsed = 0;
  };

  struct FetchOptions
  {
    double timeout = 2.0;
    /// Additional attempts after the first for each outstanding datagram.
    int retries = 2;
    FragmentConfig fragment;
  };

  struct FetchResult
  {
    Message message;
    /// Datagrams received (1 unless the response was fragmented).
    std::size_t datagrams = 0;
    /// N of a fragmented response, 0 otherwise.
    std::size_t fragments = 0;
    /// Authenticated-data indication seen on a non-truncated response.
    bool authenticated = false;
  };

  /// Sends `query` and returns the complete response, fetching and
  /// reassembling continuation fragments in parallel when fragment 1
  /// arrives. A continuation answered with a nonzero RCODE restarts the
  /// exchange once. Throws Timeout after the retries are spent.
  FetchResult fetch(
    Transport& transport,
    const Endpoint& server,
    const Message& query,
    const SuiteRegistry& registry,
    const FetchOptions& opts,
    const std::function<std::uint16_t()>& next_id);

  /// For each class in `required`: some DS matches a KSK in `dnskeys` and
  /// that KSK's RRSIG over the DNSKEY RRset verifies. Returns the witness
  /// key tags; throws ChainBroken(class).
  VerifiedDual validate_chain(
    const SuiteRegistry& registry,
    const Name& zone,
    const std::vector<Record>& dnskeys,
    const std::vector<Record>& rrsigs,
    const std::vector<DsRdata>& ds_from_parent,
    std::uint32_t now,
    const std::vector<SigClass>& required = both_classes);

  /// Iterative validating resolver. Thread-safe.
  class Resolver
  {
  public:
    Resolver(ResolverConfig cfg, Transport& transport, const SuiteRegistry& registry);

    /// Throws Timeout, ValidationFailure (with cause and side), NxDomain
    /// or ServerFailure.
    ResolveResult resolve(const Name& qname, RType qtype);

    void clear_cache();
    std::size_t cache_size() const;

    /// One upstream exchange including fragment retrieval and reassembly.
    Message query(const Endpoint& server, const Name& qname, RType qtype, ResolveResult& stats);

    const ResolverConfig& config() const
    {
      return cfg_;
    }

  private:
    struct Keys
    {
      std::vector<Record> dnskeys;
      double expires;
    };
    struct Cut
    {
      Name zone;
      std::vector<Endpoint> servers;
      std::vector<DsRdata> ds;
      double expires;
    };
    struct Answer
    {
      ResolveResult result;
      double expires;
    };
    using AnswerKey = std::pair<std::string, RType>;

    std::vector<Record> ensure_keys(const Cut& cut, ResolveResult& stats);
    Message query_any(const std::vector<Endpoint>& servers, const Name& qname, RType qtype, ResolveResult& stats);
    Endpoint map_address(const std::string& ip) const;
    std::uint32_t epoch_now() const;
    std::uint16_t next_id();
    Cut deepest_cut(const Name& qname);
    void store_answer(const ResolveResult& r, std::uint32_t min_ttl);

    ResolverConfig cfg_;
    Transport& transport_;
    const SuiteRegistry& registry_;

    mutable std::mutex mutex_;
    std::mt19937 rng_;
    /// Keyed by lowercased presentation name.
    std::map<std::string, Keys> keys_;
    std::map<std::string, Cut> cuts_;
    std::list<std::pair<AnswerKey, Answer>> lru_;
    std::map<AnswerKey, std::list<std::pair<AnswerKey, Answer>>::iterator> answers_;
  };

  /// Client-facing endpoint: answers standard queries through a Resolver.
  /// Secure answers carry the authenticated-data bit (z bit 5, value 2 on
  /// a non-truncated response). Signatures are included when the client's
  /// OPT sets DO; oversized answers are fragmented like server responses.
  class ResolverFrontend
  {
  public:
    ResolverFrontend(Resolver& resolver, const SuiteRegistry& registry, FragmentConfig cfg = {});
    std::optional<Bytes> handle_datagram(ByteView wire, const std::string& client, double now);
    Message handle_query(const Message& q, const std::string& client, double now);

  private:
    Resolver& resolver_;
    const SuiteRegistry& registry_;
    FragmentConfig cfg_;
    FragmentCache cache_;
  };

  inline constexpr std::uint8_t ad_z_value = 2;
}
