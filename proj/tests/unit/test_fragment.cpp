#include "doctest.h"

#include "../support/generators.hpp"

#include "pqdns/fragment.hpp"
#include "pqdns/reassembly.hpp"
#include "pqdns/server.hpp"
#include "pqdns/testbed.hpp"

#include <algorithm>
#include <functional>
#include <set>

using namespace pqdns;

namespace
{
  const SuiteRegistry& reg()
  {
    return SuiteRegistry::mock();
  }

  Message reference(const Combo& combo, RType qtype)
  {
    auto tb = make_testbed(reg(), combo);
    NameServer auth(ServerConfig{ServerRole::authoritative, {tb.child}, {}, 65535}, reg());
    auto qname = qtype == RType::DNSKEY ? fixture::child_origin() : Name::parse("test0.socratescrc.");
    return auth.respond(make_query(qname, qtype, 1, 1232));
  }

  Errc error_of(const std::function<void()>& f)
  {
    try
    {
      f();
    }
    catch (const Error& e)
    {
      return e.code();
    }
    FAIL("no error");
    return Errc::network;
  }

  struct Exchange
  {
    FragmentPlan plan;
    FragmentForecast fc;
    std::vector<Message> continuations;
  };

  Exchange exchange(const Message& full, const FragmentConfig& cfg = {})
  {
    auto plan = plan_fragments(full, cfg, reg());
    REQUIRE(plan);
    auto first = decode_message(view(encode_message(plan->first)));
    auto fc = forecast(first, reg(), cfg);
    std::uint16_t id = 100;
    auto qs = fragment_queries(fc, fc.base, fc.qtype, [&] { return ++id; });
    std::vector<Message> conts;
    for (std::size_t i = 0; i < qs.size(); ++i)
      conts.push_back(decode_message(view(encode_message(build_continuation(*plan, i + 2, qs[i])))));
    return {std::move(*plan), std::move(fc), std::move(conts)};
  }
}

TEST_CASE("TTL position encoding")
{
  auto e = encode_ttl(5, 3600);
  CHECK(e == ((5u << 24) | 3600u));
  CHECK(decode_ttl(e) == std::make_pair(std::size_t{5}, std::uint32_t{3600}));
  CHECK(decode_ttl(encode_ttl(255, 0xFFFFFF)) == std::make_pair(std::size_t{255}, std::uint32_t{0xFFFFFF}));
  CHECK(error_of([] { encode_ttl(0, 0x1000000); }) == Errc::ttl_too_large);
  CHECK_THROWS_AS(encode_ttl(256, 1), Error);
}

TEST_CASE("fragment qnames")
{
  auto base = Name::parse("test0.socratescrc.");
  auto q = fragment_qname(base, 2);
  CHECK(q.labels().front() == "?2?test0");
  auto back = parse_fragment_qname(q);
  REQUIRE(back);
  CHECK(back->first == 2);
  CHECK(back->second == base);

  auto root = fragment_qname(Name(), 12);
  CHECK(root.to_string() == "?12?.");
  CHECK(parse_fragment_qname(root)->second.is_root());

  auto long_label = Name({std::string(62, 'x'), "example"});
  auto standalone = fragment_qname(long_label, 3);
  CHECK(standalone.label_count() == 3);
  CHECK(parse_fragment_qname(standalone)->second == long_label);

  CHECK_FALSE(parse_fragment_qname(base));
  CHECK_FALSE(parse_fragment_qname(Name::parse("?0?a.")));
  CHECK_FALSE(parse_fragment_qname(Name::parse("??a.")));
  CHECK_THROWS_AS(fragment_qname(base, 1), Error);
}

TEST_CASE("pack_stream partitions the stream")
{
  auto base = Name::parse("test0.socratescrc.");
  for (std::size_t len : {1u, 100u, 1180u, 5000u, 60000u})
  {
    auto slices = pack_stream(len, base, RType::A, 1232);
    std::size_t at = 0;
    for (std::size_t i = 0; i < slices.size(); ++i)
    {
      CHECK(slices[i].offset == at);
      CHECK(slices[i].length > 0);
      CHECK(slices[i].length <= continuation_capacity(base, RType::A, i + 2, 1232));
      at += slices[i].length;
    }
    CHECK(at == len);
  }
}

TEST_CASE("small responses are not fragmented")
{
  Message m;
  m.header.qr = true;
  m.question.push_back({Name::parse("a."), RType::A, class_in});
  CHECK_FALSE(plan_fragments(m, {}, reg()));
}

TEST_CASE("every fragment fits and the plan reassembles")
{
  FragmentConfig cfg;
  for (const auto& combo : all_combos())
    for (auto qtype : {RType::A, RType::DNSKEY})
    {
      CAPTURE(combo.name());
      CAPTURE(to_string(qtype));
      auto full = reference(combo, qtype);
      auto ex = exchange(full, cfg);
      CHECK(encode_message(ex.plan.first).size() <= cfg.threshold);
      CHECK(ex.plan.first.header.tc);
      for (const auto& c : ex.continuations)
        CHECK(encode_message(c).size() <= cfg.threshold);
      CHECK(ex.fc.n_fragments == ex.plan.n_fragments());
      CHECK(ex.fc.stream_len == ex.plan.stream.size());
      CHECK(ex.fc.slices == ex.plan.slices);
      CHECK(encode_message(reassemble_plan(ex.plan, reg(), cfg)) == encode_message(full));
    }
}

TEST_CASE("reassembly is independent of arrival order")
{
  auto full = reference(Combo{alg::ecdsap256sha256, alg::dilithium2}, RType::DNSKEY);
  auto ex = exchange(full);
  REQUIRE(ex.continuations.size() >= 3);
  testing::Rng rng(3);
  for (int round = 0; round < 10; ++round)
  {
    auto order = ex.continuations;
    std::shuffle(order.begin(), order.end(), rng);
    ReassemblyState st(ex.plan.first, ex.fc);
    CHECK_FALSE(st.complete());
    for (const auto& c : order)
      CHECK(st.accept(c));
    CHECK(st.complete());
    CHECK(st.missing().empty());
    CHECK(st.stream() == ex.plan.stream);
    auto m = st.reassemble();
    CHECK_FALSE(m.header.tc);
    CHECK(m.header.z == 0);
    CHECK(encode_message(m) == encode_message(full));
  }
}

TEST_CASE("duplicate, unexpected and malformed fragments")
{
  auto full = reference(Combo{std::nullopt, alg::falcon512}, RType::DNSKEY);
  auto ex = exchange(full);
  ReassemblyState st(ex.plan.first, ex.fc);
  CHECK(st.accept(ex.continuations[0]));
  CHECK_FALSE(st.accept(ex.continuations[0]));
  CHECK(error_of([&] { st.reassemble(); }) == Errc::incomplete);

  auto beyond = ex.continuations.back();
  auto n = ex.fc.n_fragments + 1;
  beyond.question[0].qname = fragment_qname(ex.fc.base, n);
  beyond.answer[0].name = beyond.question[0].qname;
  beyond.answer[0].ttl = static_cast<std::uint32_t>(n);
  CHECK(error_of([&] { st.accept(beyond); }) == Errc::unexpected_fragment);

  auto other = ex.continuations[0];
  other.question[0].qname = fragment_qname(Name::parse("elsewhere."), 2);
  other.answer[0].name = other.question[0].qname;
  CHECK(error_of([&] { st.accept(other); }) == Errc::unexpected_fragment);

  auto shorter = ex.continuations[0];
  shorter.answer[0].rdata = OpaqueRdata{Bytes(3, 0)};
  CHECK(error_of([&] { st.accept(shorter); }) == Errc::length_mismatch);

  auto refused = ex.continuations[0];
  refused.header.rcode = rcode::servfail;
  CHECK(error_of([&] { st.accept(refused); }) == Errc::fragment_rcode);
}

TEST_CASE("forecast rejects responses that are not fragment 1")
{
  auto full = reference(Combo{alg::ecdsap256sha256, alg::falcon512}, RType::A);
  CHECK(error_of([&] { forecast(full, reg(), {}); }) == Errc::not_truncated);
  auto ex = exchange(full);
  auto first = ex.plan.first;
  first.header.z = 6;
  CHECK(error_of([&] { forecast(first, reg(), {}); }) == Errc::unknown_z_value);
}

TEST_CASE("fragment queries carry distinct ids")
{
  auto ex = exchange(reference(Combo{alg::rsasha256, alg::sphincs_sha256_128s}, RType::A));
  std::uint16_t id = 0xFFF0;
  auto qs = fragment_queries(ex.fc, ex.fc.base, ex.fc.qtype, [&] { return id++; });
  REQUIRE(qs.size() == ex.fc.n_fragments - 1);
  std::set<std::uint16_t> ids;
  for (std::size_t i = 0; i < qs.size(); ++i)
  {
    ids.insert(qs[i].header.id);
    CHECK(parse_fragment_qname(qs[i].question[0].qname)->first == i + 2);
  }
  CHECK(ids.size() == qs.size());
}

TEST_CASE("a too small threshold cannot hold fragment 1")
{
  auto full = reference(Combo{alg::rsasha256, alg::falcon512}, RType::DNSKEY);
  FragmentConfig cfg;
  CHECK(error_of([&] { plan_fragments(full, cfg, reg(), 600); }) == Errc::first_fragment_overflow);
  cfg.threshold = 100;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("pre-quantum portion")
{
  auto full = reference(Combo{alg::rsasha256, alg::falcon512}, RType::DNSKEY);
  auto pre = pre_quantum_portion(full, reg());
  CHECK(pre < encode_message(full).size());
  auto single = reference(Combo{std::nullopt, alg::falcon512}, RType::DNSKEY);
  CHECK(pre_quantum_portion(single, reg()) < pre);
}

TEST_CASE("reordering a record ahead of its pointer target breaks decoding")
{
  // The glue's RRSIG owner is compressed against the NS RDATA in the
  // authority section. Moving that record to the front turns the pointer
  // into a forward reference, which is why reassembly restores the
  // original order before decoding.
  auto tb = make_testbed(reg(), Combo{alg::ecdsap256sha256, alg::falcon512});
  NameServer auth(ServerConfig{ServerRole::authoritative, {tb.child}, {}, 65535}, reg());
  auto full = auth.respond(make_query(Name::parse("test0.socratescrc."), RType::A, 1, 1232));
  auto wire = encode_message(full);
  auto spans = record_spans(view(wire));

  std::vector<Record> flat;
  for (auto s : all_sections)
    flat.insert(flat.end(), full.section(s).begin(), full.section(s).end());
  REQUIRE(flat.size() == spans.size());

  std::size_t glue_sig = spans.size();
  for (std::size_t i = 0; i < spans.size(); ++i)
  {
    const auto& r = flat[i];
    if (spans[i].section == Section::additional && r.type == RType::RRSIG &&
        reg().class_of(r.as<RrsigRdata>()->algorithm) == SigClass::pre_quantum)
      glue_sig = i;
  }
  REQUIRE(glue_sig < spans.size());
  REQUIRE(wire[spans[glue_sig].offset] >= 0xC0);

  Bytes moved(wire.begin(), wire.begin() + static_cast<std::ptrdiff_t>(spans.front().offset));
  auto at = [&](std::size_t off) { return wire.begin() + static_cast<std::ptrdiff_t>(off); };
  moved.insert(moved.end(), at(spans[glue_sig].offset), at(spans[glue_sig].offset + spans[glue_sig].length));
  for (std::size_t i = 0; i < spans.size(); ++i)
    if (i != glue_sig)
      moved.insert(moved.end(), at(spans[i].offset), at(spans[i].offset + spans[i].length));
  auto bump = [&](std::size_t pos, int delta) {
    auto v = static_cast<int>(moved[pos] << 8 | moved[pos + 1]) + delta;
    moved[pos] = static_cast<std::uint8_t>(v >> 8);
    moved[pos + 1] = static_cast<std::uint8_t>(v);
  };
  bump(6, +1);
  bump(10, -1);
  CHECK(error_of([&] { decode_message(view(moved)); }) == Errc::bad_pointer);
}

TEST_CASE("fragment cache: LRU and expiry")
{
  FragmentConfig cfg;
  cfg.cache_cap = 3;
  cfg.cache_ttl = 10;
  FragmentCache cache(cfg);
  auto plan = std::make_shared<const FragmentPlan>();
  auto key = [](int i) { return FragmentCacheKey("c", Name::parse("n" + std::to_string(i) + "."), RType::A, class_in); };
  for (int i = 0; i < 3; ++i)
    cache.put(key(i), plan, 0);
  CHECK(cache.get(key(0), 1));
  cache.put(key(3), plan, 1);
  CHECK(cache.size() == 3);
  CHECK(cache.evictions() == 1);
  CHECK_FALSE(cache.get(key(1), 1));
  CHECK(cache.get(key(0), 1));
  CHECK(cache.get(key(0), 9.999));
  CHECK_FALSE(cache.get(key(0), 10));
  CHECK(cache.get(key(3), 10.5));

  int builds = 0;
  auto built = cache.get_or_build(key(9), 20, [&] {
    ++builds;
    return plan;
  });
  CHECK(built == plan);
  cache.get_or_build(key(9), 21, [&] {
    ++builds;
    return plan;
  });
  CHECK(builds == 1);
  CHECK_FALSE(cache.get_or_build(key(10), 21, [] { return FragmentCache::PlanPtr{}; }));
  CHECK_FALSE(cache.get(key(10), 21));
}

TEST_CASE("fragment cache keys separate clients and normalise case")
{
  FragmentCache cache;
  auto plan = std::make_shared<const FragmentPlan>();
  cache.put(FragmentCacheKey("a", Name::parse("X.example."), RType::A, class_in), plan, 0);
  CHECK(cache.get(FragmentCacheKey("a", Name::parse("x.EXAMPLE."), RType::A, class_in), 0));
  CHECK_FALSE(cache.get(FragmentCacheKey("b", Name::parse("x.example."), RType::A, class_in), 0));
  CHECK_FALSE(cache.get(FragmentCacheKey("a", Name::parse("x.example."), RType::DNSKEY, class_in), 0));
}
