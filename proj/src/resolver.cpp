#include "pqdns/resolver.hpp"

#include "pqdns/reassembly.hpp"
#include "pqdns/testbed.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <ctime>
#include <limits>

namespace pqdns
{
  namespace
  {
    constexpr int max_referrals = 16;

    bool authenticated_wire(ByteView wire)
    {
      // TC is bit 9 of the flags word, z occupies bits 6-4.
      return wire.size() >= 4 && (wire[2] & 0x02) == 0 && ((wire[3] >> 4) & 0x07) == ad_z_value;
    }

    FetchResult fetch_once(
      Transport& transport,
      const Endpoint& server,
      const Message& query,
      const SuiteRegistry& registry,
      const FetchOptions& opts,
      const std::function<std::uint16_t()>& next_id)
    {
      const auto& qq = query.question.at(0);
      auto what = [&] {
        return qq.qname.to_string() + " " + to_string(qq.qtype) + " at " + server.to_string();
      };

      std::optional<Bytes> resp;
      auto wire = encode_message(query);
      for (int i = 0; i <= opts.retries && !resp; ++i)
        resp = transport.exchange(server, {wire}, opts.timeout).at(0);
      if (!resp)
        fail(Errc::timeout, "no response for " + what());

      FetchResult out;
      out.datagrams = 1;
      Message first = decode_message(*resp);
      if (!first.header.tc)
      {
        out.authenticated = authenticated_wire(*resp);
        out.message = std::move(first);
        return out;
      }

      // The server fragments at min(our advertised size, its threshold).
      FragmentConfig cfg = opts.fragment;
      cfg.threshold = query.opt() ? std::min<std::size_t>(*query.udp_payload_size(), cfg.threshold) : 512;
      auto fc = forecast(first, registry, cfg);
      auto udp = query.udp_payload_size().value_or(static_cast<std::uint16_t>(cfg.threshold));
      auto queries = fragment_queries(fc, qq.qname, qq.qtype, next_id, udp);
      std::vector<Bytes> wires;
      for (const auto& q : queries)
        wires.push_back(encode_message(q));

      ReassemblyState state(std::move(first), fc);
      bool all_authenticated = true;
      for (int attempt = 0; attempt <= opts.retries && !state.complete(); ++attempt)
      {
        std::vector<Bytes> batch;
        for (auto n : state.missing())
          batch.push_back(wires.at(n - 2));
        if (attempt > 0)
          spdlog::debug("retrying {} fragment(s) of {}", batch.size(), what());
        for (const auto& r : transport.exchange(server, batch, opts.timeout))
        {
          if (!r)
            continue;
          ++out.datagrams;
          all_authenticated = all_authenticated && authenticated_wire(*r);
          state.accept_wire(*r);
        }
      }
      if (!state.complete())
        fail(
          Errc::timeout,
          std::to_string(state.missing().size()) + " of " +
            std::to_string(fc.n_fragments - 1) + " fragments missing for " + what());
      out.fragments = fc.n_fragments;
      out.authenticated = all_authenticated;
      out.message = state.reassemble();
      return out;
    }

    bool is_validation_error(Errc c)
    {
      switch (c)
      {
        case Errc::missing_class:
        case Errc::no_valid_signature:
        case Errc::chain_broken:
        case Errc::empty_rrset:
        case Errc::mixed_rrset:
        case Errc::unknown_algorithm:
        case Errc::crypto_failure:
        case Errc::too_short:
          return true;
        default:
          return false;
      }
    }

    template <typename F>
    auto validated(const std::string& what, F&& f)
    {
      try
      {
        return f();
      }
      catch (const Error& e)
      {
        if (!is_validation_error(e.code()))
          throw;
        throw Error(
          Errc::validation_failure, "ValidationFailure: " + what + ": " + e.what(), e.side(), e.code());
      }
    }

    std::vector<Record> select(const std::vector<Record>& v, const Name& owner, RType type)
    {
      std::vector<Record> out;
      for (const auto& r : v)
        if (r.type == type && r.name.equals_ci(owner))
          out.push_back(r);
      return out;
    }

    std::vector<Record> signatures(const std::vector<Record>& v, const Name& owner, RType covered)
    {
      std::vector<Record> out;
      for (const auto& r : v)
        if (rrsig_covering(r, covered) && r.name.equals_ci(owner))
          out.push_back(r);
      return out;
    }

    std::vector<Record> zsks(const std::vector<Record>& keys)
    {
      std::vector<Record> out;
      for (const auto& k : keys)
        if (const auto* dk = k.as<DnskeyRdata>(); dk && !dk->is_ksk())
          out.push_back(k);
      return out;
    }

    std::uint32_t min_ttl(const std::vector<Record>& a, const std::vector<Record>& b = {})
    {
      std::uint32_t t = std::numeric_limits<std::uint32_t>::max();
      for (const auto* v : {&a, &b})
        for (const auto& r : *v)
          t = std::min(t, r.ttl);
      return t == std::numeric_limits<std::uint32_t>::max() ? 0 : t;
    }
  }

  FetchResult fetch(
    Transport& transport,
    const Endpoint& server,
    const Message& query,
    const SuiteRegistry& registry,
    const FetchOptions& opts,
    const std::function<std::uint16_t()>& next_id)
  {
    if (query.question.size() != 1)
      fail(Errc::count_mismatch, "fetch needs exactly one question");
    try
    {
      return fetch_once(transport, server, query, registry, opts, next_id);
    }
    catch (const Error& e)
    {
      if (e.code() != Errc::fragment_rcode)
        throw;
      spdlog::debug("fragment refused ({}); asking the original question again", e.what());
    }
    Message again = query;
    again.header.id = next_id();
    return fetch_once(transport, server, again, registry, opts, next_id);
  }

  VerifiedDual validate_chain(
    const SuiteRegistry& registry,
    const Name& zone,
    const std::vector<Record>& dnskeys,
    const std::vector<Record>& rrsigs,
    const std::vector<DsRdata>& ds_from_parent,
    std::uint32_t now,
    const std::vector<SigClass>& required)
  {
    VerifiedDual out;
    for (auto cls : required)
    {
      auto& slot = cls == SigClass::pre_quantum ? out.pre_quantum_tag : out.post_quantum_tag;
      bool have_ds = false;
      for (const auto& ds : ds_from_parent)
      {
        if (registry.class_of(ds.algorithm) != cls)
          continue;
        have_ds = true;
        for (const auto& k : dnskeys)
        {
          const auto* dk = k.as<DnskeyRdata>();
          if (
            k.type != RType::DNSKEY || !dk || !dk->is_ksk() || dk->protocol != 3 ||
            !k.name.equals_ci(zone) || key_tag(encode_rdata(*dk)) != ds.key_tag ||
            !ds_matches(ds, zone, *dk))
            continue;
          for (const auto& sig : rrsigs)
          {
            const auto* s = rrsig_covering(sig, RType::DNSKEY);
            if (
              !s || s->key_tag != ds.key_tag || s->algorithm != dk->algorithm ||
              !s->signer.equals_ci(zone) || !sig.name.equals_ci(zone))
              continue;
            bool ok = false;
            try
            {
              ok = verify_rrsig(registry, sig, dnskeys, dk->public_key, now);
            }
            catch (const Error&)
            {
            }
            if (ok)
            {
              slot = ds.key_tag;
              break;
            }
          }
          if (slot)
            break;
        }
        if (slot)
          break;
      }
      if (!slot)
        throw Error(
          Errc::chain_broken,
          "ChainBroken: " + std::string(to_string(cls)) +
            (have_ds ? " KSK does not match the parent's DS or its DNSKEY signature fails"
                     : " DS missing") +
            " for " + zone.to_string(),
          cls);
    }
    return out;
  }

  // ------------------------------------------------------------ Resolver

  Resolver::Resolver(ResolverConfig cfg, Transport& transport, const SuiteRegistry& registry) :
    cfg_(std::move(cfg)),
    transport_(transport),
    registry_(registry),
    rng_(cfg_.id_seed)
  {
    cfg_.fragment.validate();
    if (cfg_.anchor.ds.empty())
      fail(Errc::chain_broken, "trust anchor has no DS records");
    if (cfg_.cache_capacity == 0)
      cfg_.cache_capacity = 1;
  }

  std::uint32_t Resolver::epoch_now() const
  {
    return cfg_.clock ? cfg_.clock() : static_cast<std::uint32_t>(std::time(nullptr));
  }

  std::uint16_t Resolver::next_id()
  {
    std::lock_guard lock(mutex_);
    return static_cast<std::uint16_t>(rng_());
  }

  Endpoint Resolver::map_address(const std::string& ip) const
  {
    if (auto it = cfg_.address_map.find(ip); it != cfg_.address_map.end())
      return it->second;
    return Endpoint{ip, 53};
  }

  void Resolver::clear_cache()
  {
    std::lock_guard lock(mutex_);
    lru_.clear();
    answers_.clear();
    keys_.clear();
    cuts_.clear();
  }

  std::size_t Resolver::cache_size() const
  {
    std::lock_guard lock(mutex_);
    return answers_.size();
  }

  Message Resolver::query(const Endpoint& server, const Name& qname, RType qtype, ResolveResult& stats)
  {
    auto q = make_query(qname, qtype, next_id(), static_cast<std::uint16_t>(cfg_.fragment.threshold));
    q.additional.back().ttl |= opt_do_bit;
    FetchOptions opts{cfg_.query_timeout, cfg_.retries, cfg_.fragment};
    double t0 = transport_.now();
    auto r = fetch(transport_, server, q, registry_, opts, [this] { return next_id(); });
    spdlog::trace(
      "{} {} at {}: rcode {}, {} datagram(s), {:.3f} ms", qname.to_string(), to_string(qtype),
      server.to_string(), r.message.header.rcode, r.datagrams, (transport_.now() - t0) * 1000);
    ++stats.queries;
    stats.fragments += r.fragments == 0 ? 0 : r.datagrams;
    return std::move(r.message);
  }

  Message Resolver::query_any(
    const std::vector<Endpoint>& servers, const Name& qname, RType qtype, ResolveResult& stats)
  {
    std::optional<Error> last;
    for (const auto& s : servers)
    {
      try
      {
        return query(s, qname, qtype, stats);
      }
      catch (const Error& e)
      {
        if (e.code() != Errc::timeout && e.code() != Errc::network)
          throw;
        spdlog::debug("{}", e.what());
        last = e;
      }
    }
    if (last)
      throw *last;
    fail(Errc::server_failure, "no servers for " + qname.to_string());
  }

  Resolver::Cut Resolver::deepest_cut(const Name& qname)
  {
    double now = transport_.now();
    std::lock_guard lock(mutex_);
    const Cut* best = nullptr;
    for (auto it = cuts_.begin(); it != cuts_.end();)
    {
      if (it->second.expires <= now)
      {
        it = cuts_.erase(it);
        continue;
      }
      const auto& zone = it->second.zone;
      if (qname.is_subdomain_of(zone) && (!best || zone.label_count() > best->zone.label_count()))
        best = &it->second;
      ++it;
    }
    if (best)
      return *best;
    return Cut{cfg_.anchor.zone, {cfg_.root}, cfg_.anchor.ds, std::numeric_limits<double>::infinity()};
  }

  std::vector<Record> Resolver::ensure_keys(const Cut& cut, ResolveResult& stats)
  {
    {
      std::lock_guard lock(mutex_);
      if (auto it = keys_.find(cut.zone.lowercase().to_string()); it != keys_.end())
      {
        if (it->second.expires > transport_.now())
          return it->second.dnskeys;
        keys_.erase(it);
      }
    }
    auto m = query_any(cut.servers, cut.zone, RType::DNSKEY, stats);
    if (m.header.rcode != rcode::noerror)
      fail(Errc::server_failure, "DNSKEY query for " + cut.zone.to_string() + " failed with rcode " + std::to_string(m.header.rcode));
    auto keys = select(m.answer, cut.zone, RType::DNSKEY);
    auto sigs = signatures(m.answer, cut.zone, RType::DNSKEY);
    auto now = epoch_now();
    validated("DNSKEY RRset of " + cut.zone.to_string(), [&] {
      return validate_chain(registry_, cut.zone, keys, sigs, cut.ds, now, cfg_.required);
    });
    std::lock_guard lock(mutex_);
    keys_[cut.zone.lowercase().to_string()] = Keys{keys, transport_.now() + min_ttl(keys, sigs)};
    return keys;
  }

  void Resolver::store_answer(const ResolveResult& r, std::uint32_t ttl)
  {
    if (ttl == 0)
      return;
    AnswerKey key{r.qname.lowercase().to_string(), r.qtype};
    std::lock_guard lock(mutex_);
    if (auto it = answers_.find(key); it != answers_.end())
    {
      lru_.erase(it->second);
      answers_.erase(it);
    }
    lru_.emplace_front(key, Answer{r, transport_.now() + ttl});
    answers_[key] = lru_.begin();
    while (answers_.size() > cfg_.cache_capacity)
    {
      answers_.erase(lru_.back().first);
      lru_.pop_back();
    }
  }

  ResolveResult Resolver::resolve(const Name& qname, RType qtype)
  {
    double t0 = transport_.now();
    AnswerKey key{qname.lowercase().to_string(), qtype};
    {
      std::lock_guard lock(mutex_);
      if (auto it = answers_.find(key); it != answers_.end())
      {
        if (it->second->second.expires > t0)
        {
          lru_.splice(lru_.begin(), lru_, it->second);
          ResolveResult r = it->second->second.result;
          r.from_cache = true;
          r.queries = 0;
          r.fragments = 0;
          r.elapsed = 0;
          return r;
        }
        lru_.erase(it->second);
        answers_.erase(it);
      }
    }

    ResolveResult res;
    res.qname = qname;
    res.qtype = qtype;
    Cut cut = deepest_cut(qname);
    auto keys = ensure_keys(cut, res);
    for (int depth = 0; depth < max_referrals; ++depth)
    {
      auto m = query_any(cut.servers, qname, qtype, res);
      if (m.header.rcode == rcode::nxdomain)
        throw Error(Errc::nx_domain, "NxDomain: " + qname.to_string());
      if (m.header.rcode != rcode::noerror)
        fail(
          Errc::server_failure,
          "rcode " + std::to_string(m.header.rcode) + " from " + cut.zone.to_string());

      auto rrset = select(m.answer, qname, qtype);
      if (!rrset.empty())
      {
        auto sigs = signatures(m.answer, qname, qtype);
        auto signing_keys = qtype == RType::DNSKEY ? keys : zsks(keys);
        auto now = epoch_now();
        validated(to_string(qtype) + " RRset at " + qname.to_string(), [&] {
          return verify_dual(registry_, sigs, rrset, signing_keys, now, cfg_.required);
        });
        res.rrset = std::move(rrset);
        res.rrsigs = std::move(sigs);
        res.secure = true;
        res.elapsed = transport_.now() - t0;
        store_answer(res, min_ttl(res.rrset, res.rrsigs));
        return res;
      }

      // Referral to a zone strictly between the current cut and qname.
      std::optional<Name> child;
      std::vector<Record> ns;
      for (const auto& r : m.authority)
        if (
          r.type == RType::NS && qname.is_subdomain_of(r.name) && r.name.is_subdomain_of(cut.zone) &&
          r.name.label_count() > cut.zone.label_count())
        {
          child = r.name;
          ns = select(m.authority, r.name, RType::NS);
          break;
        }
      if (!child)
        fail(Errc::server_failure, "no answer and no referral for " + qname.to_string());

      auto ds = select(m.additional, *child, RType::DS);
      if (ds.empty())
        ds = select(m.authority, *child, RType::DS);
      auto ds_sigs = signatures(m.additional, *child, RType::DS);
      for (auto& r : signatures(m.authority, *child, RType::DS))
        ds_sigs.push_back(std::move(r));
      if (ds.empty())
        throw Error(
          Errc::validation_failure,
          "ValidationFailure: unsigned delegation to " + child->to_string(),
          std::nullopt,
          Errc::chain_broken);
      auto now = epoch_now();
      auto parent_zsks = zsks(keys);
      validated("DS RRset at " + child->to_string(), [&] {
        return verify_dual(registry_, ds_sigs, ds, parent_zsks, now, cfg_.required);
      });

      Cut next;
      next.zone = *child;
      for (const auto& r : ds)
        if (const auto* d = r.as<DsRdata>())
          next.ds.push_back(*d);
      for (const auto& r : ns)
      {
        const auto* host = r.as<NsRdata>();
        if (!host)
          continue;
        for (const auto& glue : select(m.additional, host->host, RType::A))
          if (const auto* a = glue.as<ARdata>())
            next.servers.push_back(map_address(a->to_string()));
      }
      if (next.servers.empty())
        fail(Errc::server_failure, "no glue for " + child->to_string());
      next.expires = transport_.now() + min_ttl(ns, ds);

      keys = ensure_keys(next, res);
      {
        std::lock_guard lock(mutex_);
        cuts_[next.zone.lowercase().to_string()] = next;
      }
      cut = std::move(next);
    }
    fail(Errc::server_failure, "referral chain too long for " + qname.to_string());
  }

  // ---------------------------------------------------- ResolverFrontend

  ResolverFrontend::ResolverFrontend(Resolver& resolver, const SuiteRegistry& registry, FragmentConfig cfg) :
    resolver_(resolver),
    registry_(registry),
    cfg_(cfg),
    cache_(cfg)
  {
    cfg_.validate();
  }

  Message ResolverFrontend::handle_query(const Message& q, const std::string& client, double now)
  {
    Message r;
    r.header.id = q.header.id;
    r.header.qr = true;
    r.header.opcode = q.header.opcode;
    r.header.rd = q.header.rd;
    r.header.ra = true;
    r.question = q.question;
    if (q.header.qr || q.question.size() != 1)
    {
      r.header.rcode = rcode::formerr;
      return r;
    }
    if (q.header.opcode != 0)
    {
      r.header.rcode = rcode::notimp;
      return r;
    }
    const auto& qq = q.question[0];
    if (qq.qclass != class_in)
    {
      r.header.rcode = rcode::refused;
      return r;
    }

    if (auto frag = parse_fragment_qname(qq.qname))
    {
      auto plan = cache_.get(FragmentCacheKey(client, frag->second, qq.qtype, qq.qclass), now);
      if (!plan || frag->first < 2 || frag->first > plan->n_fragments())
      {
        r.header.rcode = rcode::servfail;
        return r;
      }
      auto c = build_continuation(*plan, frag->first, q);
      c.header.ra = true;
      // Only validated answers are ever fragmented here.
      c.header.z = ad_z_value;
      return c;
    }

    bool want_sigs = q.opt() && (q.opt()->ttl & opt_do_bit) != 0;
    bool secure = false;
    try
    {
      auto res = resolver_.resolve(qq.qname, qq.qtype);
      r.answer = res.rrset;
      if (want_sigs)
        r.answer.insert(r.answer.end(), res.rrsigs.begin(), res.rrsigs.end());
      secure = res.secure;
    }
    catch (const Error& e)
    {
      r.header.rcode = e.code() == Errc::nx_domain ? rcode::nxdomain : rcode::servfail;
      spdlog::debug("resolution of {} failed: {}", qq.qname.to_string(), e.what());
    }
    catch (const std::exception& e)
    {
      r.header.rcode = rcode::servfail;
      spdlog::warn("resolution of {} failed: {}", qq.qname.to_string(), e.what());
    }
    if (q.opt())
    {
      auto opt = make_opt(static_cast<std::uint16_t>(cfg_.threshold));
      if (want_sigs)
        opt.ttl |= opt_do_bit;
      r.additional.push_back(opt);
    }

    std::size_t threshold = q.opt() ? std::min<std::size_t>(*q.udp_payload_size(), cfg_.threshold) : 512;
    if (encode_message(r).size() <= threshold || !secure)
    {
      if (secure)
        r.header.z = ad_z_value;
      return r;
    }
    auto plan = plan_fragments(r, cfg_, registry_, threshold);
    auto shared = std::make_shared<const FragmentPlan>(std::move(*plan));
    cache_.put(FragmentCacheKey(client, qq.qname, qq.qtype, qq.qclass), shared, now);
    return shared->first;
  }

  std::optional<Bytes> ResolverFrontend::handle_datagram(ByteView wire, const std::string& client, double now)
  {
    if (wire.size() < 12)
      return std::nullopt;
    Message q;
    try
    {
      q = decode_message(wire);
    }
    catch (const Error& e)
    {
      spdlog::debug("malformed query from {}: {}", client, e.what());
      Message r;
      r.header = Header::with_flags(static_cast<std::uint16_t>(wire[0] << 8 | wire[1]), 0);
      r.header.qr = true;
      r.header.rcode = rcode::formerr;
      return encode_message(r);
    }
    if (q.header.qr)
      return std::nullopt;
    return encode_message(handle_query(q, client, now));
  }
}
