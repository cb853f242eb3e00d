#include "pqdns/simnet.hpp"

#include "pqdns/fragment.hpp"
#include "pqdns/resolver.hpp"
#include "pqdns/server.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace pqdns
{
  void LinkModel::validate() const
  {
    if (!(delay >= 0))
      fail(Errc::fixture_error, "link delay must be >= 0");
    if (!(bandwidth > 0))
      fail(Errc::fixture_error, "link bandwidth must be > 0");
    if (!(loss >= 0 && loss < 1))
      fail(Errc::fixture_error, "link loss must lie in [0, 1)");
  }

  double LinkModel::latency(std::size_t bytes) const
  {
    return delay + static_cast<double>(bytes) * 8.0 / bandwidth;
  }

  SimLink::SimLink(LinkModel model, std::uint64_t seed) :
    model_(model),
    rng_(seed),
    drop_(model.loss)
  {
    model_.validate();
  }

  std::optional<double> SimLink::deliver(std::size_t bytes, double now)
  {
    if (bytes > 65535)
      fail(Errc::datagram_too_large, "datagram of " + std::to_string(bytes) + " bytes");
    if (model_.loss > 0 && drop_(rng_))
      return std::nullopt;
    double start = std::max(now, free_at_);
    double tx = static_cast<double>(bytes) * 8.0 / model_.bandwidth;
    free_at_ = start + tx;
    return start + tx + model_.delay;
  }

  SimNetwork::SimNetwork(LinkModel link, std::uint64_t seed) :
    model_(link),
    seed_(seed)
  {
    model_.validate();
  }

  void SimNetwork::attach(const std::string& address, DatagramHandler handler)
  {
    endpoints_[address] = std::move(handler);
  }

  SimLink& SimNetwork::link(const std::string& from, const std::string& to)
  {
    auto key = std::make_pair(from, to);
    auto it = links_.find(key);
    if (it == links_.end())
    {
      // Each direction draws losses from its own stream so that adding a
      // flow elsewhere does not perturb this one.
      auto s = seed_ ^ std::hash<std::string>{}(from + ">" + to);
      it = links_.emplace(key, SimLink(model_, s)).first;
    }
    return it->second;
  }

  std::vector<std::optional<Bytes>> SimNetwork::exchange(
    const std::string& from, const std::string& to, const std::vector<Bytes>& queries, double timeout)
  {
    std::vector<std::optional<Bytes>> out(queries.size());
    auto ep = endpoints_.find(to);
    double sent = now_;
    double deadline = sent + timeout;
    double last = sent;
    bool all = true;
    for (std::size_t i = 0; i < queries.size(); ++i)
    {
      ++stats_.datagrams;
      stats_.bytes += queries[i].size();
      auto arrival = link(from, to).deliver(queries[i].size(), sent);
      if (!arrival || ep == endpoints_.end())
      {
        ++stats_.dropped;
        all = false;
        continue;
      }
      now_ = std::max(now_, *arrival);
      std::optional<Bytes> reply;
      try
      {
        reply = ep->second(view(queries[i]), from, now_);
      }
      catch (const std::exception& e)
      {
        spdlog::warn("handler at {} failed: {}", to, e.what());
      }
      if (!reply)
      {
        all = false;
        continue;
      }
      ++stats_.datagrams;
      stats_.bytes += reply->size();
      auto back = link(to, from).deliver(reply->size(), now_);
      if (!back || *back > deadline)
      {
        ++stats_.dropped;
        all = false;
        continue;
      }
      last = std::max(last, *back);
      out[i] = std::move(*reply);
    }
    now_ = std::max(now_, all ? last : deadline);
    return out;
  }

  SimTransport::SimTransport(SimNetwork& net, std::string address) :
    net_(net),
    address_(std::move(address))
  {}

  std::vector<std::optional<Bytes>> SimTransport::exchange(
    const Endpoint& server, const std::vector<Bytes>& queries, double timeout)
  {
    return net_.exchange(address_, server.host, queries, timeout);
  }

  double SimTransport::now() const
  {
    return net_.now();
  }

  // ----------------------------------------------------------- benchmark

  namespace
  {
    struct World
    {
      SimNetwork net;
      NameServer root;
      NameServer auth;
      SimTransport upstream;
      Resolver resolver;
      ResolverFrontend frontend;
      SimTransport client;

      World(const SuiteRegistry& registry, const Testbed& tb, const BenchOptions& opts, std::uint64_t seed) :
        net(opts.link, seed),
        root(ServerConfig{ServerRole::root, {tb.root}, {}, 65535}, registry),
        auth(ServerConfig{ServerRole::authoritative, {tb.child}, {}, 65535}, registry),
        upstream(net, fixture::resolver_address),
        resolver(resolver_config(tb, seed), upstream, registry),
        frontend(resolver, registry),
        client(net, fixture::client_address)
      {
        net.attach(fixture::root_address, [this](ByteView w, const std::string& c, double t) {
          return root.handle_datagram(w, c, t);
        });
        net.attach(fixture::auth_address, [this](ByteView w, const std::string& c, double t) {
          return auth.handle_datagram(w, c, t);
        });
        net.attach(fixture::resolver_address, [this](ByteView w, const std::string& c, double t) {
          return frontend.handle_datagram(w, c, t);
        });
      }

      static ResolverConfig resolver_config(const Testbed& tb, std::uint64_t seed)
      {
        ResolverConfig cfg;
        cfg.root = Endpoint{fixture::root_address, 53};
        cfg.anchor = tb.anchor;
        cfg.clock = [] { return fixture::epoch; };
        cfg.id_seed = static_cast<std::uint32_t>(seed);
        cfg.required.clear();
        if (tb.combo.pre)
          cfg.required.push_back(SigClass::pre_quantum);
        if (tb.combo.post)
          cfg.required.push_back(SigClass::post_quantum);
        return cfg;
      }

      /// Client-observed time for one stub query; throws on failure.
      double time_query(const Name& qname, RType qtype, std::uint16_t id, const SuiteRegistry& registry)
      {
        auto q = make_query(qname, qtype, id, 1232);
        q.header.rd = true;
        double t0 = net.now();
        std::uint16_t next = id;
        auto r = fetch(client, Endpoint{fixture::resolver_address, 53}, q, registry, {}, [&] {
          return ++next;
        });
        if (r.message.header.rcode != rcode::noerror || !r.authenticated)
          fail(
            Errc::fixture_error,
            "benchmark query " + qname.to_string() + " failed (rcode " +
              std::to_string(r.message.header.rcode) + ")");
        return net.now() - t0;
      }
    };

    double mean_of(const std::vector<double>& v)
    {
      return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }
  }

  std::vector<BenchResult> run_benchmark(
    const SuiteRegistry& registry, const std::vector<Combo>& combos, const BenchOptions& opts)
  {
    opts.link.validate();
    std::vector<BenchResult> out;
    for (const auto& combo : combos)
    {
      auto tb = make_testbed(registry, combo);
      BenchResult a{combo, RType::A, count_fragments(registry, combo, RType::A), {}, 0};
      BenchResult k{combo, RType::DNSKEY, count_fragments(registry, combo, RType::DNSKEY), {}, 0};
      for (int rep = 0; rep < std::max(1, opts.repetitions); ++rep)
      {
        auto seed = opts.seed * 1000003u + static_cast<std::uint64_t>(rep);
        {
          World w(registry, tb, opts, seed);
          std::uint16_t id = 100;
          for (const auto& name : fixture::query_names())
          {
            a.times.push_back(w.time_query(name, RType::A, id, registry));
            id += 100;
          }
        }
        if (opts.dnskey)
        {
          World w(registry, tb, opts, seed);
          k.times.push_back(w.time_query(fixture::child_origin(), RType::DNSKEY, 100, registry));
        }
      }
      a.mean = mean_of(a.times);
      k.mean = mean_of(k.times);
      spdlog::debug("{}: A mean {:.3f} ms", combo.name(), a.mean * 1000);
      out.push_back(std::move(a));
      if (opts.dnskey)
        out.push_back(std::move(k));
    }
    return out;
  }

  std::string bench_csv(const std::vector<BenchResult>& results)
  {
    std::string out = "combo,qtype,fragments,mean_ms,times_ms\n";
    char buf[64];
    for (const auto& r : results)
    {
      std::snprintf(buf, sizeof buf, "%.3f", r.mean * 1000);
      out += r.combo.name() + "," + to_string(r.qtype) + "," + std::to_string(r.fragments) + "," + buf + ",";
      for (std::size_t i = 0; i < r.times.size(); ++i)
      {
        std::snprintf(buf, sizeof buf, "%s%.3f", i ? ";" : "", r.times[i] * 1000);
        out += buf;
      }
      out += "\n";
    }
    return out;
  }

  std::size_t count_fragments(
    const SuiteRegistry& registry, const Combo& combo, RType qtype, std::size_t threshold)
  {
    auto tb = make_testbed(registry, combo);
    NameServer auth(ServerConfig{ServerRole::authoritative, {tb.child}, {}, 65535}, registry);
    auto qname = qtype == RType::DNSKEY ? fixture::child_origin() : fixture::query_names().front();
    auto full = auth.respond(make_query(qname, qtype, 1, 1232));
    FragmentConfig cfg;
    cfg.threshold = threshold;
    auto plan = plan_fragments(full, cfg, registry);
    return plan ? plan->n_fragments() : 1;
  }
}
