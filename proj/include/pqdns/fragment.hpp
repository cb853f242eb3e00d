#pragma once

#include "pqdns/codec.hpp"
#include "pqdns/crypto.hpp"

#include <condition_variable>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace pqdns
{
  struct FragmentConfig
  {
    /// 1280 (IPv6 minimum MTU) - 40 (IPv6 header) - 8 (UDP header).
    std::size_t threshold = 1232;
    /// Fewest signature/key bytes worth sending in a split record.
    std::size_t min_useful_slice = 64;
    double cache_ttl = 30.0;
    std::size_t cache_cap = 10000;

    void validate() const;
  };

  /// Record position packed into the TTL's top byte.
  std::uint32_t encode_ttl(std::size_t index, std::uint32_t ttl);
  std::pair<std::size_t, std::uint32_t> decode_ttl(std::uint32_t encoded);

  struct Slice
  {
    std::size_t offset = 0;
    std::size_t length = 0;
    friend bool operator==(const Slice&, const Slice&) = default;
  };

  /// Largest continuation payload fragment `n` can carry for `base`.
  std::size_t continuation_capacity(
    const Name& base, RType qtype, std::size_t n, std::size_t threshold);
  /// Greedy partition of a stream of `stream_len` bytes into fragments
  /// 2..N. Used by both the planner and the resolver's forecast.
  std::vector<Slice> pack_stream(
    std::size_t stream_len, const Name& base, RType qtype, std::size_t threshold);

  /// Record classified as post-quantum signature material (RRSIG or DNSKEY
  /// of a post-quantum suite).
  bool is_post_quantum_record(const Record& r, const SuiteRegistry& registry);
  bool is_pre_quantum_record(const Record& r, const SuiteRegistry& registry);

  /// Encoded size of `msg` with every post-quantum record removed: the
  /// part of a response that always travels in fragment 1.
  std::size_t pre_quantum_portion(const Message& msg, const SuiteRegistry& registry);

  struct SplitInfo
  {
    Section section = Section::answer;
    std::size_t index = 0;
    std::size_t present = 0;
    std::size_t missing = 0;
  };

  struct FragmentPlan
  {
    Message original;
    Message first;
    Bytes stream;
    std::vector<Slice> slices;
    std::optional<SplitInfo> split;
    /// Algorithm signalled through z (set only when records were omitted
    /// without a split).
    std::optional<std::uint8_t> signalled_algorithm;
    std::size_t threshold = 0;

    std::size_t n_fragments() const
    {
      return 1 + slices.size();
    }

    ByteView slice(std::size_t n) const;
  };

  /// Deterministic fragmentation of `original`; nullopt when it already
  /// fits within `threshold` (cfg.threshold unless overridden).
  std::optional<FragmentPlan> plan_fragments(
    const Message& original,
    const FragmentConfig& cfg,
    const SuiteRegistry& registry,
    std::optional<std::size_t> threshold = std::nullopt);

  /// Fragment `n` (2..N) answering `frag_query`.
  Message build_continuation(const FragmentPlan& plan, std::size_t n, const Message& frag_query);

  /// `?n?` joined to the first label of `base`; a standalone `?n?` label
  /// when `base` is the root or the joined label would exceed 63 bytes.
  Name fragment_qname(const Name& base, std::size_t n);
  std::optional<std::pair<std::size_t, Name>> parse_fragment_qname(const Name& qname);

  struct FragmentCacheKey
  {
    std::string client;
    Name qname;
    RType qtype = RType::A;
    std::uint16_t qclass = class_in;

    FragmentCacheKey() = default;
    FragmentCacheKey(std::string client, const Name& qname, RType qtype, std::uint16_t qclass);

    friend bool operator==(const FragmentCacheKey&, const FragmentCacheKey&) = default;
  };

  struct FragmentCacheKeyHash
  {
    std::size_t operator()(const FragmentCacheKey& k) const;
  };

  /// Bounded LRU of fragment plans with per-entry expiry. Thread-safe;
  /// `get_or_build` coalesces concurrent builds for one key.
  class FragmentCache
  {
  public:
    using PlanPtr = std::shared_ptr<const FragmentPlan>;

    explicit FragmentCache(FragmentConfig cfg = {});

    void put(const FragmentCacheKey& key, PlanPtr plan, double now);
    PlanPtr get(const FragmentCacheKey& key, double now);
    std::optional<Message> get(
      const FragmentCacheKey& key, std::size_t n, const Message& frag_query, double now);
    /// Returns the cached plan or runs `build` once per key, sharing the
    /// result with concurrent callers. A null plan is returned but not cached.
    PlanPtr get_or_build(
      const FragmentCacheKey& key, double now, const std::function<PlanPtr()>& build);

    std::size_t size() const;
    std::uint64_t evictions() const;

  private:
    struct Entry
    {
      FragmentCacheKey key;
      PlanPtr plan;
      double created;
    };
    using List = std::list<Entry>;

    PlanPtr lookup_locked(const FragmentCacheKey& key, double now);
    void put_locked(const FragmentCacheKey& key, PlanPtr plan, double now);

    FragmentConfig cfg_;
    mutable std::mutex mutex_;
    std::condition_variable built_;
    List lru_;
    std::unordered_map<FragmentCacheKey, List::iterator, FragmentCacheKeyHash> index_;
    std::unordered_set<FragmentCacheKey, FragmentCacheKeyHash> building_;
    std::uint64_t evictions_ = 0;
  };
}
