#include "doctest.h"

#include "../oracles/wire_vectors.hpp"
#include "../support/generators.hpp"

#include "pqdns/codec.hpp"

using namespace pqdns;

namespace
{
  Errc decode_error(const Bytes& wire)
  {
    try
    {
      decode_message(view(wire));
    }
    catch (const Error& e)
    {
      return e.code();
    }
    FAIL("decode succeeded");
    return Errc::network;
  }
}

TEST_CASE("name parsing and presentation")
{
  auto n = Name::parse("test0.socratescrc.");
  CHECK(n.label_count() == 2);
  CHECK(n.to_string() == "test0.socratescrc.");
  CHECK(n.wire_length() == 19);
  CHECK(Name::parse("socratescrc") == Name::parse("socratescrc."));
  CHECK(Name::parse(".").is_root());
  CHECK(Name::parse("").is_root());
  CHECK(Name::parse("a\\.b.c.").label_count() == 2);
  CHECK(Name::parse("\\065.").labels()[0] == "A");
  CHECK(Name::parse_relative("@", Name::parse("x.")) == Name::parse("x."));
  CHECK(Name::parse_relative("www", Name::parse("x.")) == Name::parse("www.x."));
  CHECK(Name::parse("WWW.Example.").equals_ci(Name::parse("www.example.")));
  CHECK(Name::parse("a.b.example.").is_subdomain_of(Name::parse("EXAMPLE.")));
  CHECK_FALSE(Name::parse("example.").is_subdomain_of(Name::parse("a.example.")));
}

TEST_CASE("name limits")
{
  CHECK_THROWS_AS(Name::parse(std::string(64, 'a') + "."), Error);
  std::string long_name;
  for (int i = 0; i < 5; ++i)
    long_name += std::string(60, 'a') + ".";
  CHECK_THROWS_AS(Name::parse(long_name), Error);
}

TEST_CASE("header flag packing")
{
  Header h;
  h.qr = h.aa = h.tc = true;
  h.z = 1;
  CHECK(h.pack_flags() == 0x8610);
  auto back = Header::with_flags(9, 0x8610);
  CHECK(back.qr);
  CHECK(back.aa);
  CHECK(back.tc);
  CHECK(back.z == 1);
  CHECK_FALSE(back.rd);
  Header all = Header::with_flags(1, 0xFFFF);
  CHECK(all.opcode == 15);
  CHECK(all.z == 7);
  CHECK(all.rcode == 15);
  CHECK(all.pack_flags() == 0xFFFF);
}

TEST_CASE("hand-assembled query decodes and re-encodes byte for byte")
{
  auto q = decode_message(view(oracle::query_test0_a));
  CHECK(q.header.id == 0x1234);
  CHECK(q.header.pack_flags() == 0);
  REQUIRE(q.question.size() == 1);
  CHECK(q.question[0].qname == Name::parse("test0.socratescrc."));
  CHECK(q.question[0].qtype == RType::A);
  CHECK(q.udp_payload_size() == 1232);
  CHECK(encode_message(q) == oracle::query_test0_a);
  CHECK(encode_message(make_query(Name::parse("test0.socratescrc."), RType::A, 0x1234, 1232)) == oracle::query_test0_a);
}

TEST_CASE("hand-assembled response with a compressed owner")
{
  auto m = decode_message(view(oracle::response_test0_a));
  CHECK(m.header.pack_flags() == 0x8610);
  REQUIRE(m.answer.size() == 1);
  const auto& a = m.answer[0];
  CHECK(a.name == Name::parse("test0.socratescrc."));
  CHECK(a.ttl == 3600);
  REQUIRE(a.as<ARdata>());
  CHECK(a.as<ARdata>()->to_string() == "10.9.9.10");
  CHECK(encode_message(m) == oracle::response_test0_a);
}

TEST_CASE("pointer loops and forward pointers are rejected")
{
  CHECK(decode_error(oracle::response_pointer_loop) == Errc::pointer_loop);
  CHECK(decode_error(oracle::response_forward_pointer) == Errc::bad_pointer);
}

TEST_CASE("truncated input")
{
  auto wire = oracle::response_test0_a;
  for (std::size_t cut = 0; cut < wire.size(); ++cut)
  {
    Bytes part(wire.begin(), wire.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_message(view(part)), Error);
  }
}

TEST_CASE("counts that disagree with the body")
{
  auto wire = oracle::response_test0_a;
  wire.push_back(0);
  CHECK(decode_error(wire) == Errc::count_mismatch);
}

TEST_CASE("record spans cover each record")
{
  auto spans = record_spans(view(oracle::response_test0_a));
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].section == Section::answer);
  CHECK(spans[0].offset == 35);
  CHECK(spans[0].length == 16);
}

TEST_CASE("standalone records reject compression")
{
  Bytes rec{0xc0, 0x0c, 0x00, 0x01, 0x00, 0x01, 0, 0, 0, 0, 0, 4, 1, 2, 3, 4};
  std::size_t off = 0;
  try
  {
    decode_standalone_record(view(rec), off);
    FAIL("accepted a pointer");
  }
  catch (const Error& e)
  {
    CHECK(e.code() == Errc::bad_pointer);
  }
}

TEST_CASE("rtype names")
{
  CHECK(rtype_from_string("dnskey") == RType::DNSKEY);
  CHECK(rtype_from_string("TYPE43") == RType::DS);
  CHECK_FALSE(rtype_from_string("MX").has_value());
  CHECK(to_string(RType::RRSIG) == "RRSIG");
}

TEST_CASE("z signalling")
{
  CHECK(z_value_for_algorithm(alg::falcon512) == 1);
  CHECK(z_value_for_algorithm(alg::dilithium2) == 2);
  CHECK(z_value_for_algorithm(alg::sphincs_sha256_128s) == 3);
  CHECK(z_value_for_algorithm(std::nullopt) == 0);
  for (std::uint8_t z = 1; z <= 3; ++z)
    CHECK(z_value_for_algorithm(algorithm_for_z_value(z)) == z);
  CHECK_FALSE(algorithm_for_z_value(5).has_value());
}

TEST_CASE("OPT payload size is clamped")
{
  CHECK(make_opt(100).rclass == 512);
  Message m;
  m.additional.push_back(make_opt(4096));
  CHECK(m.udp_payload_size() == 4096);
}

TEST_CASE("randomized round trip")
{
  testing::Rng rng(42);
  for (int i = 0; i < 300; ++i)
  {
    auto m = testing::random_message(rng);
    auto wire = encode_message(m);
    auto back = decode_message(view(wire));
    REQUIRE(back == m);
    CHECK(encode_message(back) == wire);
    CHECK(decode_message(view(encode_message(m, false))) == m);
    CHECK(encode_message(m, false).size() >= wire.size());
  }
}

TEST_CASE("typed rdata falls back to opaque on malformed bytes")
{
  Bytes bad{1, 2, 3};
  CHECK(std::holds_alternative<OpaqueRdata>(decode_rdata(RType::A, view(bad))));
  Bytes ok{10, 9, 9, 10};
  CHECK(std::holds_alternative<ARdata>(decode_rdata(RType::A, view(ok))));
}
