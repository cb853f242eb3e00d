#include "pqdns/testbed.hpp"

#include <cctype>

namespace pqdns
{
  namespace
  {
    const char* short_name(std::uint8_t code)
    {
      switch (code)
      {
        case alg::rsasha256: return "RSA";
        case alg::ecdsap256sha256: return "ECDSA";
        case alg::falcon512: return "FALCON";
        case alg::dilithium2: return "DILITHIUM";
        case alg::sphincs_sha256_128s: return "SPHINCS";
      }
      return nullptr;
    }
  }

  std::string Combo::name() const
  {
    std::string out;
    auto add = [&](std::optional<std::uint8_t> c) {
      if (!c)
        return;
      if (!out.empty())
        out += "+";
      const char* s = short_name(*c);
      out += s ? s : std::to_string(*c);
    };
    add(post);
    add(pre);
    return out.empty() ? "NONE" : out;
  }

  Combo Combo::parse(std::string_view text, const SuiteRegistry& registry)
  {
    // Split on '+'; an empty token re-attaches to its predecessor so that
    // "sphincs+" survives as a name.
    std::vector<std::string> toks{""};
    for (char ch : text)
    {
      if (ch == '+')
        toks.emplace_back();
      else
        toks.back().push_back(ch);
    }
    std::vector<std::string> names;
    for (auto& t : toks)
    {
      if (t.empty() && !names.empty() && names.back().back() != '+')
        names.back() += '+';
      else if (t.empty())
        fail(Errc::syntax_error, "empty suite name in '" + std::string(text) + "'");
      else
        names.push_back(t);
    }

    Combo c;
    for (const auto& n : names)
    {
      const auto& suite = registry.by_name(n);
      auto& slot = suite.cls == SigClass::pre_quantum ? c.pre : c.post;
      if (slot)
        fail(Errc::class_mismatch, "two suites of the same class in '" + std::string(text) + "'");
      slot = suite.code;
    }
    if (!c.pre && !c.post)
      fail(Errc::syntax_error, "no suites in '" + std::string(text) + "'");
    return c;
  }

  std::vector<Combo> all_combos()
  {
    std::vector<Combo> out;
    for (auto pq : {alg::falcon512, alg::dilithium2, alg::sphincs_sha256_128s})
      for (auto pre : {std::optional<std::uint8_t>(), std::optional(alg::ecdsap256sha256), std::optional(alg::rsasha256)})
        out.push_back({pre, pq});
    return out;
  }

  namespace fixture
  {
    std::string child_zone_text()
    {
      std::string z =
        "$ORIGIN socratescrc.\n"
        "$TTL 3600\n"
        "@      IN SOA ns1 hostmaster 2023111401 7200 3600 1209600 3600\n"
        "@      IN NS  ns1\n"
        "ns1    IN A   10.9.9.2\n";
      for (int i = 0; i < 10; ++i)
        z += "test" + std::to_string(i) + "  IN A   10.9.9." + std::to_string(10 + i) + "\n";
      return z;
    }

    std::string root_zone_text()
    {
      return "$ORIGIN .\n"
             "$TTL 86400\n"
             ".                IN SOA a.root. hostmaster.root. 2023111401 1800 900 604800 86400\n"
             ".                IN NS  a.root.\n"
             "a.root.          IN A   10.9.9.1\n"
             "socratescrc.     IN NS  ns1.socratescrc.\n"
             "ns1.socratescrc. IN A   10.9.9.2\n";
    }

    Name child_origin()
    {
      return Name::parse("socratescrc.");
    }

    std::vector<Name> query_names()
    {
      std::vector<Name> out;
      for (int i = 0; i < 10; ++i)
        out.push_back(Name::parse("test" + std::to_string(i) + ".socratescrc."));
      return out;
    }
  }

  Testbed make_testbed(
    const SuiteRegistry& registry, const Combo& combo, std::uint32_t now, std::string_view seed)
  {
    Bytes s(seed.begin(), seed.end());
    Testbed tb;
    tb.combo = combo;
    tb.child = sign_zone(parse_zone_file(fixture::child_zone_text()), registry, combo.pre, combo.post, now, s);
    auto root = parse_zone_file(fixture::root_zone_text());
    for (auto ds : make_ds(tb.child))
    {
      ds.ttl = 86400;
      root.records.push_back(std::move(ds));
    }
    tb.root = sign_zone(root, registry, combo.pre, combo.post, now, s);
    tb.anchor = TrustAnchor::from_zone(tb.root);
    return tb;
  }

  Message make_query(const Name& qname, RType qtype, std::uint16_t id, std::optional<std::uint16_t> udp_size)
  {
    Message q;
    q.header.id = id;
    q.question.push_back({qname, qtype, class_in});
    if (udp_size)
      q.additional.push_back(make_opt(*udp_size));
    return q;
  }
}
