#include "pqdns/reassembly.hpp"

#include <algorithm>
#include <set>

namespace pqdns
{
  namespace
  {
    [[noreturn]] void inconsistent(const std::string& msg)
    {
      fail(Errc::inconsistent_first_fragment, msg);
    }

    struct Group
    {
      Section section;
      Name owner;
      RType type;
      std::size_t pre = 0;
      std::size_t post = 0;
      std::optional<Name> signer;
    };

    Group& group_for(std::vector<Group>& groups, Section s, const Name& owner, RType type)
    {
      for (auto& g : groups)
        if (g.section == s && g.type == type && g.owner.equals_ci(owner))
          return g;
      groups.push_back(Group{s, owner, type, 0, 0, std::nullopt});
      return groups.back();
    }

    std::size_t body_length(const Record& r)
    {
      if (const auto* s = r.as<RrsigRdata>())
        return s->signature.size();
      if (const auto* k = r.as<DnskeyRdata>())
        return k->public_key.size();
      return 0;
    }

    std::uint8_t algorithm_of(const Record& r)
    {
      if (const auto* s = r.as<RrsigRdata>())
        return s->algorithm;
      return r.as<DnskeyRdata>()->algorithm;
    }
  }

  FragmentForecast forecast(
    const Message& first, const SuiteRegistry& registry, const FragmentConfig& cfg)
  {
    if (!first.header.tc)
      fail(Errc::not_truncated, "response is not a first fragment (TC=0)");
    if (first.question.size() != 1)
      inconsistent("first fragment must carry exactly one question");
    const auto& q = first.question[0];

    std::optional<std::uint8_t> z_alg;
    if (first.header.z != 0)
    {
      z_alg = algorithm_for_z_value(first.header.z);
      if (!z_alg || registry.class_of(*z_alg) != SigClass::post_quantum)
        fail(Errc::unknown_z_value, "z value " + std::to_string(first.header.z) + " is unassigned");
    }

    FragmentForecast fc;
    fc.base = q.qname;
    fc.qtype = q.qtype;

    std::vector<Group> sig_groups, key_groups, data_groups;
    std::optional<Name> any_signer, any_key_owner;
    std::optional<std::pair<Section, std::size_t>> last_pq;
    std::set<std::uint8_t> pq_algs;

    for (auto s : all_sections)
    {
      const auto& sec = first.section(s);
      for (std::size_t i = 0; i < sec.size(); ++i)
      {
        const auto& r = sec[i];
        if (r.type == RType::OPT)
          continue;
        std::optional<SigClass> cls;
        if (is_pre_quantum_record(r, registry))
          cls = SigClass::pre_quantum;
        else if (is_post_quantum_record(r, registry))
          cls = SigClass::post_quantum;
        if (r.type == RType::RRSIG && r.as<RrsigRdata>())
        {
          const auto* sig = r.as<RrsigRdata>();
          auto& g = group_for(sig_groups, s, r.name, sig->type_covered);
          if (!g.signer)
            g.signer = sig->signer;
          if (!any_signer)
            any_signer = sig->signer;
          if (cls == SigClass::pre_quantum)
            ++g.pre;
          else if (cls == SigClass::post_quantum)
            ++g.post;
        }
        else
        {
          group_for(data_groups, s, r.name, r.type);
          if (r.type == RType::DNSKEY && r.as<DnskeyRdata>())
          {
            auto& g = group_for(key_groups, s, r.name, RType::DNSKEY);
            if (!any_key_owner)
              any_key_owner = r.name;
            if (cls == SigClass::pre_quantum)
              ++g.pre;
            else if (cls == SigClass::post_quantum)
              ++g.post;
          }
        }

        if (cls != SigClass::post_quantum)
          continue;
        last_pq = std::make_pair(s, i);
        auto alg = algorithm_of(r);
        pq_algs.insert(alg);
        const auto& suite = registry.at(alg);
        auto expected = r.type == RType::RRSIG ? suite.sig_len : suite.pubkey_len;
        auto have = body_length(r);
        if (have > expected)
          inconsistent(suite.name + " record longer than its suite allows");
        if (have < expected)
        {
          if (fc.split)
            inconsistent("more than one split record");
          fc.split = SplitDescriptor{s, i, r.type, alg, have, expected - have};
        }
      }
    }
    for (const auto& g : sig_groups)
      if (g.pre > 0)
        fc.dual = true;
    for (const auto& g : key_groups)
      if (g.pre > 0)
        fc.dual = true;

    if (fc.split)
    {
      if (z_alg)
        inconsistent("split record and z signal are mutually exclusive");
      if (last_pq != std::make_pair(fc.split->section, fc.split->position))
        inconsistent("split record must be the last post-quantum record");
      fc.postq_suite = fc.split->algorithm;
    }
    else if (z_alg)
      fc.postq_suite = *z_alg;
    else
      inconsistent("truncated response has neither a split record nor a z signal");
    for (auto a : pq_algs)
      if (a != fc.postq_suite)
        inconsistent("post-quantum records of more than one suite");

    // Expected post-quantum record counts per group.
    std::vector<std::pair<const Group*, std::size_t>> sig_expect, key_expect;
    std::vector<Group> extra;
    extra.reserve(4);
    if (fc.dual)
    {
      for (const auto& g : sig_groups)
        sig_expect.emplace_back(&g, g.pre);
      for (const auto& g : key_groups)
        key_expect.emplace_back(&g, g.pre);
    }
    else
    {
      // Single-class zones: in an authoritative answer, or a recursive one
      // to a DO query, every RRset carries one signature. Referrals sign
      // only their DS. A DNSKEY RRset holds a KSK and a ZSK, both signing it.
      const auto* opt = first.opt();
      bool signed_response = first.header.aa ||
        (opt && (opt->ttl & opt_do_bit) != 0 && !first.answer.empty());
      if (q.qtype == RType::DNSKEY && signed_response)
      {
        group_for(data_groups, Section::answer, q.qname, RType::DNSKEY);
        group_for(key_groups, Section::answer, q.qname, RType::DNSKEY);
      }
      for (const auto& g : key_groups)
        key_expect.emplace_back(&g, std::max<std::size_t>(2, g.post));
      for (const auto& d : data_groups)
      {
        std::size_t want = 0;
        if (!signed_response && !(d.type == RType::DS && d.section != Section::answer))
          want = 0;
        else
          want = d.type == RType::DNSKEY ? 2 : 1;
        if (want == 0)
          continue;
        bool found = false;
        for (const auto& g : sig_groups)
          if (g.section == d.section && g.type == d.type && g.owner.equals_ci(d.owner))
          {
            found = true;
            break;
          }
        if (!found)
          extra.push_back(Group{d.section, d.owner, d.type, 0, 0, std::nullopt});
      }
      for (const auto& g : sig_groups)
      {
        std::size_t want = 0;
        if (signed_response || (g.type == RType::DS && g.section != Section::answer))
          want = g.type == RType::DNSKEY ? 2 : 1;
        sig_expect.emplace_back(&g, std::max(want, g.post));
      }
      for (const auto& g : extra)
        sig_expect.emplace_back(&g, g.type == RType::DNSKEY ? 2 : 1);
    }

    const auto& suite = registry.at(fc.postq_suite);
    auto signer_for = [&](const Group& g) -> Name {
      if (g.signer)
        return *g.signer;
      if (any_signer)
        return *any_signer;
      if (any_key_owner)
        return *any_key_owner;
      if (q.qtype == RType::DNSKEY)
        return q.qname;
      inconsistent("cannot determine the signer of omitted signatures");
    };

    for (auto s : all_sections)
    {
      for (const auto& [g, want] : key_expect)
      {
        if (g->section != s)
          continue;
        if (g->post > want)
          inconsistent("more post-quantum DNSKEYs than expected");
        for (std::size_t k = g->post; k < want; ++k)
          fc.omitted.push_back(
            {s, RType::DNSKEY, g->owner, g->owner.wire_length() + 10 + 4 + suite.pubkey_len});
      }
      for (const auto& [g, want] : sig_expect)
      {
        if (g->section != s)
          continue;
        if (g->post > want)
          inconsistent("more post-quantum signatures than expected");
        auto len = g->owner.wire_length() + 10 + 18 + signer_for(*g).wire_length() + suite.sig_len;
        for (std::size_t k = g->post; k < want; ++k)
          fc.omitted.push_back({s, RType::RRSIG, g->owner, len});
      }
    }

    fc.stream_len = fc.split ? fc.split->missing : 0;
    for (const auto& o : fc.omitted)
      fc.stream_len += o.wire_length;
    if (fc.stream_len == 0)
      inconsistent("nothing left to fetch");
    fc.slices = pack_stream(fc.stream_len, q.qname, q.qtype, cfg.threshold);
    fc.n_fragments = 1 + fc.slices.size();
    return fc;
  }

  std::vector<Message> fragment_queries(
    const FragmentForecast& fc,
    const Name& base,
    RType qtype,
    const std::function<std::uint16_t()>& next_id,
    std::uint16_t udp_size)
  {
    std::vector<Message> out;
    std::set<std::uint16_t> used;
    for (std::size_t n = 2; n <= fc.n_fragments; ++n)
    {
      std::uint16_t id;
      do
        id = next_id();
      while (!used.insert(id).second);
      Message m;
      m.header.id = id;
      m.question.push_back({fragment_qname(base, n), qtype, class_in});
      m.additional.push_back(make_opt(udp_size));
      out.push_back(std::move(m));
    }
    return out;
  }

  // ------------------------------------------------------------- state

  ReassemblyState::ReassemblyState(Message first, FragmentForecast fc) :
    first_(std::move(first)),
    fc_(std::move(fc))
  {}

  bool ReassemblyState::store(std::size_t n, const Name& qname, Bytes slice)
  {
    auto parsed = parse_fragment_qname(qname);
    if (!parsed || !parsed->second.equals_ci(fc_.base))
      fail(Errc::unexpected_fragment, "'" + qname.to_string() + "' is not a fragment of " + fc_.base.to_string());
    if (parsed->first != n || n < 2 || n > fc_.n_fragments)
      fail(
        Errc::unexpected_fragment,
        "fragment " + std::to_string(parsed->first) + " outside 2.." + std::to_string(fc_.n_fragments));
    if (slice.size() != fc_.slices[n - 2].length)
      fail(
        Errc::length_mismatch,
        "fragment " + std::to_string(n) + " carries " + std::to_string(slice.size()) +
          " bytes, forecast " + std::to_string(fc_.slices[n - 2].length));
    return received_.emplace(n, std::move(slice)).second;
  }

  bool ReassemblyState::accept(const Message& response)
  {
    if (response.header.rcode != rcode::noerror)
      fail(Errc::fragment_rcode, "fragment response with RCODE " + std::to_string(response.header.rcode));
    if (response.question.size() != 1 || response.answer.size() != 1)
      fail(Errc::unexpected_fragment, "continuation must carry one question and one record");
    const auto& r = response.answer[0];
    auto parsed = parse_fragment_qname(response.question[0].qname);
    if (!parsed)
      fail(Errc::unexpected_fragment, "not a fragment qname");
    if (r.ttl != parsed->first || !r.name.equals_ci(response.question[0].qname))
      fail(Errc::unexpected_fragment, "continuation record does not match its question");
    return store(parsed->first, response.question[0].qname, encode_rdata(r.rdata));
  }

  bool ReassemblyState::accept_wire(ByteView wire)
  {
    auto m = decode_message(wire);
    if (m.header.rcode != rcode::noerror || m.question.size() != 1 || m.answer.size() != 1)
      return accept(m);
    // Read the RDATA straight from the datagram: owner, then type, class,
    // TTL and the 16-bit length.
    auto p = record_spans(wire).front().offset;
    for (;;)
    {
      auto b = wire[p];
      if (b == 0)
      {
        ++p;
        break;
      }
      if ((b & 0xC0) == 0xC0)
      {
        p += 2;
        break;
      }
      p += 1 + static_cast<std::size_t>(b);
    }
    p += 8;
    std::size_t rdlen = static_cast<std::size_t>(wire[p]) << 8 | wire[p + 1];
    Bytes raw(wire.begin() + static_cast<std::ptrdiff_t>(p + 2), wire.begin() + static_cast<std::ptrdiff_t>(p + 2 + rdlen));
    const auto& r = m.answer[0];
    auto parsed = parse_fragment_qname(m.question[0].qname);
    if (!parsed)
      fail(Errc::unexpected_fragment, "not a fragment qname");
    if (r.ttl != parsed->first || !r.name.equals_ci(m.question[0].qname))
      fail(Errc::unexpected_fragment, "continuation record does not match its question");
    return store(parsed->first, m.question[0].qname, std::move(raw));
  }

  bool ReassemblyState::complete() const
  {
    return received_.size() + 1 == fc_.n_fragments;
  }

  std::vector<std::size_t> ReassemblyState::missing() const
  {
    std::vector<std::size_t> out;
    for (std::size_t n = 2; n <= fc_.n_fragments; ++n)
      if (!received_.contains(n))
        out.push_back(n);
    return out;
  }

  Bytes ReassemblyState::stream() const
  {
    Bytes out;
    out.reserve(fc_.stream_len);
    for (const auto& [n, bytes] : received_)
      out.insert(out.end(), bytes.begin(), bytes.end());
    return out;
  }

  Message ReassemblyState::reassemble() const
  {
    if (!complete())
      fail(Errc::incomplete, std::to_string(missing().size()) + " fragments outstanding");
    auto stream = this->stream();
    if (stream.size() != fc_.stream_len)
      fail(Errc::stream_corrupt, "stream length differs from the forecast");

    Message m = first_;
    std::size_t off = 0;
    if (fc_.split)
    {
      auto& rec = m.section(fc_.split->section).at(fc_.split->position);
      auto full = encode_rdata(rec.rdata);
      full.insert(full.end(), stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(fc_.split->missing));
      rec.rdata = decode_rdata(rec.type, full);
      off = fc_.split->missing;
    }
    for (const auto& om : fc_.omitted)
    {
      Record r;
      try
      {
        r = decode_standalone_record(stream, off);
      }
      catch (const Error& e)
      {
        fail(Errc::stream_corrupt, e.what());
      }
      if (r.type != RType::RRSIG && r.type != RType::DNSKEY)
        fail(Errc::stream_corrupt, "stream holds a " + to_string(r.type) + " record");
      m.section(om.section).push_back(std::move(r));
    }
    if (off != stream.size())
      fail(Errc::stream_corrupt, std::to_string(stream.size() - off) + " trailing stream bytes");

    for (auto s : all_sections)
    {
      auto& sec = m.section(s);
      std::vector<Record> opt;
      std::vector<std::pair<std::size_t, Record>> ordered;
      for (auto& r : sec)
      {
        if (r.type == RType::OPT)
        {
          opt.push_back(std::move(r));
          continue;
        }
        auto [index, ttl] = decode_ttl(r.ttl);
        r.ttl = ttl;
        ordered.emplace_back(index, std::move(r));
      }
      std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        return a.first < b.first;
      });
      sec.clear();
      for (std::size_t i = 0; i < ordered.size(); ++i)
      {
        if (ordered[i].first != i)
          fail(
            Errc::order_conflict,
            "position " + std::to_string(ordered[i].first) + " in slot " + std::to_string(i));
        sec.push_back(std::move(ordered[i].second));
      }
      for (auto& r : opt)
        sec.push_back(std::move(r));
    }
    m.header.tc = false;
    m.header.z = 0;
    return m;
  }

  Message reassemble_plan(
    const FragmentPlan& plan, const SuiteRegistry& registry, const FragmentConfig& cfg)
  {
    auto first = decode_message(encode_message(plan.first));
    FragmentConfig c = cfg;
    c.threshold = plan.threshold;
    auto fc = forecast(first, registry, c);
    std::uint16_t id = 1;
    auto queries = fragment_queries(
      fc, first.question[0].qname, first.question[0].qtype, [&] { return id++; });
    ReassemblyState state(first, fc);
    for (std::size_t k = 0; k < queries.size(); ++k)
    {
      if (k + 2 > plan.n_fragments())
        break;
      auto resp = build_continuation(plan, k + 2, queries[k]);
      state.accept_wire(encode_message(resp));
    }
    return state.reassemble();
  }
}
