#include "doctest.h"

#include "pqdns/testbed.hpp"
#include "pqdns/zone.hpp"

using namespace pqdns;

namespace
{
  Errc parse_error(std::string_view text)
  {
    try
    {
      parse_zone_file(text);
    }
    catch (const Error& e)
    {
      return e.code();
    }
    FAIL("parse succeeded");
    return Errc::network;
  }

  Bytes seed(std::string_view s)
  {
    return Bytes(s.begin(), s.end());
  }
}

TEST_CASE("master file subset")
{
  auto z = parse_zone_file(
    "$ORIGIN example.\n"
    "$TTL 300\n"
    "@ IN SOA ns1 admin ( 1 ; serial\n"
    "    7200 3600 1209600 60 )\n"
    "  IN NS ns1\n"
    "ns1 IN A 192.0.2.1\n"
    "www 60 IN A 192.0.2.2 ; comment\n"
    "raw IN TYPE1 \\# 4 c0000203\n");
  CHECK(z.origin == Name::parse("example."));
  CHECK(z.soa().as<SoaRdata>()->minimum == 60);
  REQUIRE(z.rrset(Name::parse("example."), RType::NS).size() == 1);
  CHECK(z.rrset(Name::parse("example."), RType::NS)[0].ttl == 300);
  auto www = z.rrset(Name::parse("WWW.example."), RType::A);
  REQUIRE(www.size() == 1);
  CHECK(www[0].ttl == 60);
  auto raw = z.rrset(Name::parse("raw.example."), RType::A);
  REQUIRE(raw.size() == 1);
  CHECK(encode_rdata(raw[0].rdata) == Bytes{0xc0, 0, 2, 3});
}

TEST_CASE("zone file errors")
{
  CHECK(parse_error("$ORIGIN x.\n@ IN SOA a b 1 2 3 4\n") == Errc::syntax_error);
  CHECK(parse_error("$ORIGIN x.\n$TTL 16777216\n@ IN A 1.2.3.4\n") == Errc::ttl_too_large);
  CHECK(parse_error("$ORIGIN x.\n@ 3600 IN A 1.2.3.4\n") == Errc::no_soa);
  CHECK(parse_error("$ORIGIN x.\n@ 3600 IN BOGUS 1\n") == Errc::syntax_error);
}

TEST_CASE("print and parse round trip a signed zone")
{
  auto z = sign_zone(
    parse_zone_file(fixture::child_zone_text()), SuiteRegistry::mock(), alg::ecdsap256sha256, alg::falcon512,
    fixture::epoch, view(seed("rt")));
  auto back = parse_zone_file(print_zone(z));
  CHECK(back == z);
}

TEST_CASE("signing publishes keys and signs each authoritative RRset with both classes")
{
  const auto& reg = SuiteRegistry::mock();
  auto tb = make_testbed(reg, Combo{alg::rsasha256, alg::falcon512});
  const auto& z = tb.child;
  CHECK(z.is_signed());
  CHECK(z.rrset(z.origin, RType::DNSKEY).size() == 4);
  CHECK(z.rrsigs(z.origin, RType::DNSKEY).size() == 4);
  for (int i = 0; i < 10; ++i)
  {
    auto owner = Name::parse("test" + std::to_string(i) + ".socratescrc.");
    auto sigs = z.rrsigs(owner, RType::A);
    REQUIRE(sigs.size() == 2);
    CHECK(verify_dual(reg, sigs, z.rrset(owner, RType::A), z.rrset(z.origin, RType::DNSKEY), fixture::epoch)
            .post_quantum_tag.has_value());
  }

  // Delegation NS and glue in the root are not signed; the DS is.
  auto child = Name::parse("socratescrc.");
  CHECK(tb.root.rrsigs(child, RType::NS).empty());
  CHECK(tb.root.rrsigs(Name::parse("ns1.socratescrc."), RType::A).empty());
  CHECK(tb.root.rrsigs(child, RType::DS).size() == 2);
  CHECK_FALSE(tb.root.is_authoritative(child, RType::NS));
  CHECK(tb.root.is_authoritative(child, RType::DS));
  CHECK(tb.root.delegation_for(Name::parse("test0.socratescrc.")) == child);
}

TEST_CASE("make_zone_keys rejects duplicate classes and empty requests")
{
  const auto& reg = SuiteRegistry::mock();
  auto origin = Name::parse("x.");
  CHECK_THROWS_AS(make_zone_keys(reg, origin, std::nullopt, std::nullopt, view(seed("k"))), Error);
  CHECK_THROWS_AS(make_zone_keys(reg, origin, alg::falcon512, alg::dilithium2, view(seed("k"))), Error);
  CHECK(make_zone_keys(reg, origin, std::nullopt, alg::falcon512, view(seed("k"))).size() == 2);
}

TEST_CASE("DS records follow each KSK")
{
  const auto& reg = SuiteRegistry::mock();
  auto tb = make_testbed(reg, Combo{alg::ecdsap256sha256, alg::sphincs_sha256_128s});
  auto ds = make_ds(tb.child);
  REQUIRE(ds.size() == 2);
  for (const auto& d : ds)
  {
    bool found = false;
    for (const auto& k : tb.child.rrset(tb.child.origin, RType::DNSKEY))
      found = found || ds_matches(*d.as<DsRdata>(), tb.child.origin, *k.as<DnskeyRdata>());
    CHECK(found);
  }
}

TEST_CASE("trust anchor text round trip")
{
  auto tb = make_testbed(SuiteRegistry::mock(), Combo{alg::ecdsap256sha256, alg::falcon512});
  auto text = tb.anchor.to_string();
  auto back = TrustAnchor::parse(text);
  CHECK(back.zone == tb.anchor.zone);
  CHECK(back.ds == tb.anchor.ds);
  CHECK_THROWS_AS(TrustAnchor::parse(". 1 2"), Error);
}

TEST_CASE("combo names")
{
  const auto& reg = SuiteRegistry::mock();
  auto combos = all_combos();
  REQUIRE(combos.size() == 9);
  CHECK(combos[0].name() == "FALCON");
  CHECK(combos[1].name() == "FALCON+ECDSA");
  CHECK(combos[8].name() == "SPHINCS+RSA");
  for (const auto& c : combos)
    CHECK(Combo::parse(c.name(), reg) == c);
  CHECK(Combo::parse("falcon512+ecdsap256", reg) == Combo{alg::ecdsap256sha256, alg::falcon512});
  CHECK_THROWS_AS(Combo::parse("falcon512+dilithium2", reg), Error);
}
