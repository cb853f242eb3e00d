#pragma once

#include "pqdns/crypto.hpp"
#include "pqdns/net.hpp"
#include "pqdns/testbed.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace pqdns
{
  struct LinkModel
  {
    /// One-way propagation delay in seconds, applied per direction.
    double delay = 0.010;
    /// Bits per second.
    double bandwidth = 50e6;
    double loss = 0.0;

    void validate() const;
    /// delay + size * 8 / bandwidth.
    double latency(std::size_t bytes) const;
  };

  /// One direction of a link: datagrams serialize in FIFO order, so a burst
  /// of fragments pays for its total size.
  class SimLink
  {
  public:
    SimLink(LinkModel model, std::uint64_t seed);

    /// Arrival time of a datagram handed to the link at `now`, or nullopt
    /// when the loss draw drops it. Throws DatagramTooLarge above 65535.
    std::optional<double> deliver(std::size_t bytes, double now);

    const LinkModel& model() const
    {
      return model_;
    }

  private:
    LinkModel model_;
    double free_at_ = 0;
    std::mt19937_64 rng_;
    std::bernoulli_distribution drop_;
  };

  struct SimStats
  {
    std::uint64_t datagrams = 0;
    std::uint64_t bytes = 0;
    std::uint64_t dropped = 0;
  };

  /// Virtual-time network of addressable endpoints. Single-threaded;
  /// handlers may themselves exchange datagrams (a resolver behind a
  /// client hop), which advances the shared clock.
  class SimNetwork
  {
  public:
    explicit SimNetwork(LinkModel link = {}, std::uint64_t seed = 1);

    void attach(const std::string& address, DatagramHandler handler);

    double now() const
    {
      return now_;
    }

    /// Sends `queries` from `from` to `to` back to back. The clock moves to
    /// the last response arrival, or to send time + timeout when any
    /// response is missing; late responses count as lost.
    std::vector<std::optional<Bytes>> exchange(
      const std::string& from, const std::string& to, const std::vector<Bytes>& queries, double timeout);

    const SimStats& stats() const
    {
      return stats_;
    }

  private:
    SimLink& link(const std::string& from, const std::string& to);

    LinkModel model_;
    std::uint64_t seed_;
    double now_ = 0;
    std::map<std::string, DatagramHandler> endpoints_;
    std::map<std::pair<std::string, std::string>, SimLink> links_;
    SimStats stats_;
  };

  class SimTransport final : public Transport
  {
  public:
    SimTransport(SimNetwork& net, std::string address);

    std::vector<std::optional<Bytes>> exchange(
      const Endpoint& server, const std::vector<Bytes>& queries, double timeout) override;
    double now() const override;

  private:
    SimNetwork& net_;
    std::string address_;
  };

  struct BenchResult
  {
    Combo combo;
    RType qtype = RType::A;
    /// Planner N of the reference response (1 when unfragmented).
    std::size_t fragments = 1;
    /// Per-query resolution times in seconds of virtual time.
    std::vector<double> times;
    double mean = 0;
  };

  struct BenchOptions
  {
    LinkModel link;
    int repetitions = 1;
    std::uint64_t seed = 1;
    /// Also time cold DNSKEY lookups of the child zone.
    bool dnskey = true;
  };

  /// Per combo: fresh servers and a cold resolver for every repetition, the
  /// ten fixture names resolved through the client -> resolver hop.
  std::vector<BenchResult> run_benchmark(
    const SuiteRegistry& registry, const std::vector<Combo>& combos, const BenchOptions& opts = {});

  /// CSV with columns combo,qtype,fragments,mean_ms,times_ms (times joined by ';').
  std::string bench_csv(const std::vector<BenchResult>& results);

  /// Planner N for the reference A (test0) or DNSKEY (apex) response of the
  /// fixture child zone; 1 when it fits.
  std::size_t count_fragments(
    const SuiteRegistry& registry, const Combo& combo, RType qtype, std::size_t threshold = 1232);
}
