#include "pqdns/server.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace pqdns
{
  namespace
  {
    Message reply_to(const Message& q, std::uint8_t rc)
    {
      Message m;
      m.header.id = q.header.id;
      m.header.qr = true;
      m.header.opcode = q.header.opcode;
      m.header.rd = q.header.rd;
      m.header.rcode = rc;
      m.question = q.question;
      return m;
    }

    void append(std::vector<Record>& dst, const std::vector<Record>& src)
    {
      dst.insert(dst.end(), src.begin(), src.end());
    }

    bool contains(const std::vector<Record>& v, const Record& r)
    {
      return std::find(v.begin(), v.end(), r) != v.end();
    }
  }

  NameServer::NameServer(ServerConfig cfg, const SuiteRegistry& registry) :
    cfg_(std::move(cfg)),
    registry_(registry),
    cache_(cfg_.fragment)
  {
    cfg_.fragment.validate();
    if (cfg_.zones.empty())
      fail(Errc::fixture_error, "name server needs at least one zone");
    if (cfg_.role == ServerRole::root)
    {
      bool has_root = std::any_of(cfg_.zones.begin(), cfg_.zones.end(), [](const Zone& z) {
        return z.origin.is_root();
      });
      if (!has_root)
        fail(Errc::fixture_error, "root server needs the root zone");
    }
  }

  const Zone* NameServer::zone_for(const Name& qname) const
  {
    const Zone* best = nullptr;
    for (const auto& z : cfg_.zones)
      if (qname.is_subdomain_of(z.origin) && (!best || z.origin.label_count() > best->origin.label_count()))
        best = &z;
    return best;
  }

  std::size_t NameServer::effective_threshold(const Message& query) const
  {
    auto size = query.udp_payload_size();
    if (!size)
      return 512;
    return std::min<std::size_t>(*size, cfg_.fragment.threshold);
  }

  Message NameServer::respond(const Message& q) const
  {
    if (q.header.qr || q.question.size() != 1)
      return reply_to(q, rcode::formerr);
    if (q.header.opcode != 0)
      return reply_to(q, rcode::notimp);
    const auto& qq = q.question[0];
    if (qq.qclass != class_in)
      return reply_to(q, rcode::refused);

    Message m = reply_to(q, rcode::noerror);
    const Zone* zone = zone_for(qq.qname);
    if (!zone)
    {
      m.header.rcode = rcode::refused;
    }
    else if (auto cut = zone->delegation_for(qq.qname);
             cut && !(qq.qtype == RType::DS && qq.qname.equals_ci(*cut)))
    {
      // Referral: NS in authority; DS (with signatures), then glue, in
      // additional.
      auto ns = zone->rrset(*cut, RType::NS);
      append(m.authority, ns);
      append(m.additional, zone->rrset(*cut, RType::DS));
      append(m.additional, zone->rrsigs(*cut, RType::DS));
      for (const auto& r : ns)
        append(m.additional, zone->rrset(r.as<NsRdata>()->host, RType::A));
    }
    else if (!zone->has_owner(qq.qname))
    {
      m.header.aa = true;
      m.header.rcode = rcode::nxdomain;
    }
    else
    {
      m.header.aa = true;
      append(m.answer, zone->rrset(qq.qname, qq.qtype));
      append(m.answer, zone->rrsigs(qq.qname, qq.qtype));
      if (qq.qtype != RType::DNSKEY && qq.qtype != RType::NS && qq.qtype != RType::DS)
      {
        auto ns = zone->rrset(zone->origin, RType::NS);
        append(m.authority, ns);
        append(m.authority, zone->rrsigs(zone->origin, RType::NS));
        for (const auto& r : ns)
        {
          const auto& host = r.as<NsRdata>()->host;
          if (!host.is_subdomain_of(zone->origin))
            continue;
          for (const auto& a : zone->rrset(host, RType::A))
            if (!contains(m.answer, a))
              m.additional.push_back(a);
          if (!(qq.qtype == RType::A && host.equals_ci(qq.qname)))
            append(m.additional, zone->rrsigs(host, RType::A));
        }
      }
    }
    if (const auto* qopt = q.opt())
    {
      auto opt = make_opt(cfg_.advertised_size);
      opt.ttl |= qopt->ttl & opt_do_bit;
      m.additional.push_back(opt);
    }
    return m;
  }

  Message NameServer::handle_query(const Message& q, const std::string& client, double now)
  {
    ++queries_;
    if (q.question.size() == 1 && !q.header.qr && q.header.opcode == 0)
    {
      const auto& qq = q.question[0];
      if (auto frag = parse_fragment_qname(qq.qname))
      {
        FragmentCacheKey key(client, frag->second, qq.qtype, qq.qclass);
        if (auto resp = cache_.get(key, frag->first, q, now))
        {
          ++continuations_;
          return *resp;
        }
        ++misses_;
        spdlog::debug("fragment cache miss for {} from {}", qq.qname.to_string(), client);
        return reply_to(q, rcode::servfail);
      }
    }

    Message full = respond(q);
    auto threshold = effective_threshold(q);
    if (encode_message(full).size() <= threshold)
      return full;

    const auto& qq = q.question[0];
    FragmentCacheKey key(client, qq.qname, qq.qtype, qq.qclass);
    FragmentCache::PlanPtr plan;
    try
    {
      plan = cache_.get_or_build(key, now, [&]() -> FragmentCache::PlanPtr {
        auto p = plan_fragments(full, cfg_.fragment, registry_, threshold);
        if (!p)
          return nullptr;
        return std::make_shared<const FragmentPlan>(std::move(*p));
      });
    }
    catch (const Error& e)
    {
      spdlog::warn("cannot fragment response for {}: {}", qq.qname.to_string(), e.what());
      return reply_to(q, rcode::servfail);
    }
    if (!plan)
      return full;
    if (plan->threshold != threshold || !(plan->original.question == full.question))
    {
      // Cached for a different buffer size; rebuild for this client.
      auto p = plan_fragments(full, cfg_.fragment, registry_, threshold);
      plan = std::make_shared<const FragmentPlan>(std::move(*p));
      cache_.put(key, plan, now);
    }
    ++fragmented_;
    Message first = plan->first;
    first.header.id = q.header.id;
    first.header.rd = q.header.rd;
    return first;
  }

  std::optional<Bytes> NameServer::handle_datagram(
    ByteView wire, const std::string& client, double now)
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
      Message m;
      m.header = Header::with_flags(
        static_cast<std::uint16_t>(wire[0] << 8 | wire[1]),
        static_cast<std::uint16_t>(wire[2] << 8 | wire[3]));
      if (m.header.qr)
        return std::nullopt;
      m.header.qr = true;
      m.header.aa = m.header.tc = m.header.ra = false;
      m.header.z = 0;
      m.header.rcode = rcode::formerr;
      return encode_message(m);
    }
    if (q.header.qr)
      return std::nullopt;
    return encode_message(handle_query(q, client, now));
  }

  ServerStats NameServer::stats() const
  {
    return {queries_.load(), fragmented_.load(), continuations_.load(), misses_.load()};
  }
}
