#include "doctest.h"

#include "../oracles/keytag_oracle.hpp"
#include "../oracles/wire_vectors.hpp"
#include "../support/generators.hpp"

#include "pqdns/crypto.hpp"
#include "pqdns/zone.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>

using namespace pqdns;

namespace
{
  constexpr std::uint32_t fixture_now = fixture::epoch;

  std::string lower(std::string s)
  {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  }

  std::vector<Record> a_rrset()
  {
    auto owner = Name::parse("test0.socratescrc.");
    return {{owner, RType::A, class_in, 3600, ARdata::parse("10.9.9.10")},
            {owner, RType::A, class_in, 3600, ARdata::parse("10.9.9.11")}};
  }

  Record dnskey_record(const KeyPair& k)
  {
    return {Name::parse("socratescrc."), RType::DNSKEY, class_in, 3600, k.dnskey()};
  }

  Bytes seed(const char* s)
  {
    return Bytes(s, s + std::strlen(s));
  }
}

TEST_CASE("RFC 4509 key tag and SHA-256 DS")
{
  DnskeyRdata k{DnskeyRdata::zsk_flags, 3, oracle::rfc4509_algorithm, from_base64(oracle::rfc4509_key_base64)};
  auto rd = encode_rdata(k);
  CHECK(key_tag(view(rd)) == oracle::rfc4509_key_tag);
  CHECK(oracle::keytag(rd.data(), static_cast<unsigned>(rd.size())) == oracle::rfc4509_key_tag);
  auto ds = make_ds(Name::parse(oracle::rfc4509_owner), k);
  CHECK(ds.key_tag == oracle::rfc4509_key_tag);
  CHECK(ds.digest_type == 2);
  CHECK(lower(to_hex(view(ds.digest))) == oracle::rfc4509_sha256);
  CHECK(ds_matches(ds, Name::parse("DSKEY.example.com."), k));
}

TEST_CASE("key tag agrees with the reference on random input")
{
  testing::Rng rng(8);
  for (int i = 0; i < 200; ++i)
  {
    auto b = testing::random_bytes(rng, 4 + testing::pick(rng, 2000));
    CHECK(key_tag(view(b)) == oracle::keytag(b.data(), static_cast<unsigned>(b.size())));
  }
}

TEST_CASE("suite table")
{
  const auto& reg = SuiteRegistry::standard();
  CHECK(reg.at(alg::rsasha256).sig_len == 256);
  CHECK(reg.at(alg::rsasha256).pubkey_len == 260);
  CHECK(reg.at(alg::ecdsap256sha256).sig_len == 64);
  CHECK(reg.at(alg::ecdsap256sha256).pubkey_len == 64);
  CHECK(reg.at(alg::falcon512).sig_len == 690);
  CHECK(reg.at(alg::falcon512).pubkey_len == 897);
  CHECK(reg.at(alg::dilithium2).sig_len == 2420);
  CHECK(reg.at(alg::dilithium2).pubkey_len == 1312);
  CHECK(reg.at(alg::sphincs_sha256_128s).sig_len == 7856);
  CHECK(reg.at(alg::sphincs_sha256_128s).pubkey_len == 32);
  CHECK(reg.class_of(alg::falcon512) == SigClass::post_quantum);
  CHECK(reg.class_of(alg::rsasha256) == SigClass::pre_quantum);
  CHECK_FALSE(reg.class_of(99).has_value());
  CHECK(reg.by_name("SPHINCS+").code == alg::sphincs_sha256_128s);
  CHECK(reg.by_name("ecdsap256").code == alg::ecdsap256sha256);
  CHECK_THROWS_AS(reg.at(99), Error);
}

TEST_CASE("sign and verify with every suite")
{
  const auto& reg = SuiteRegistry::standard();
  auto rrset = a_rrset();
  for (auto code : reg.codes())
  {
    CAPTURE(int(code));
    auto key = generate_keypair(reg, code, KeyRole::zsk, view(seed("unit")));
    CHECK(key.public_key.size() == reg.at(code).pubkey_len);
    auto sig = sign_rrset(reg, rrset, key, Name::parse("socratescrc."), ValidityWindow::around(fixture_now));
    const auto* s = sig.as<RrsigRdata>();
    REQUIRE(s);
    CHECK(s->signature.size() == reg.at(code).sig_len);
    CHECK(s->labels == 2);
    CHECK(s->key_tag == key.key_tag);
    CHECK(verify_rrsig(reg, sig, rrset, view(key.public_key), fixture_now));

    std::reverse(rrset.begin(), rrset.end());
    CHECK(verify_rrsig(reg, sig, rrset, view(key.public_key), fixture_now));

    auto changed = rrset;
    changed[0].as<ARdata>()->address[3] ^= 1;
    CHECK_FALSE(verify_rrsig(reg, sig, changed, view(key.public_key), fixture_now));

    CHECK_FALSE(verify_rrsig(reg, sig, rrset, view(key.public_key), s->expiration + 1));
    CHECK_FALSE(verify_rrsig(reg, sig, rrset, view(key.public_key), s->inception - 1));
  }
}

TEST_CASE("RSA and mock key generation are deterministic")
{
  const auto& reg = SuiteRegistry::standard();
  for (auto code : {alg::rsasha256, alg::falcon512})
  {
    auto a = generate_keypair(reg, code, KeyRole::ksk, view(seed("same")));
    auto b = generate_keypair(reg, code, KeyRole::ksk, view(seed("same")));
    auto c = generate_keypair(reg, code, KeyRole::ksk, view(seed("other")));
    CHECK(a.public_key == b.public_key);
    CHECK(a.public_key != c.public_key);
    CHECK(a.dnskey().is_ksk());
  }
}

TEST_CASE("owner names are compared canonically")
{
  const auto& reg = SuiteRegistry::mock();
  auto key = generate_keypair(reg, alg::falcon512, KeyRole::zsk, view(seed("ci")));
  auto rrset = a_rrset();
  auto sig = sign_rrset(reg, rrset, key, Name::parse("socratescrc."), ValidityWindow::around(fixture_now));
  for (auto& r : rrset)
    r.name = Name::parse("TEST0.SocratesCRC.");
  CHECK(verify_rrsig(reg, sig, rrset, view(key.public_key), fixture_now));
}

TEST_CASE("dual verification is conjunctive")
{
  const auto& reg = SuiteRegistry::standard();
  auto pre = generate_keypair(reg, alg::ecdsap256sha256, KeyRole::zsk, view(seed("d1")));
  auto post = generate_keypair(reg, alg::falcon512, KeyRole::zsk, view(seed("d2")));
  auto rrset = a_rrset();
  auto w = ValidityWindow::around(fixture_now);
  auto signer = Name::parse("socratescrc.");
  std::vector<Record> sigs{sign_rrset(reg, rrset, pre, signer, w), sign_rrset(reg, rrset, post, signer, w)};
  std::vector<Record> keys{dnskey_record(pre), dnskey_record(post)};

  auto ok = verify_dual(reg, sigs, rrset, keys, fixture_now);
  CHECK(ok.pre_quantum_tag == pre.key_tag);
  CHECK(ok.post_quantum_tag == post.key_tag);

  auto error_of = [&](const std::vector<Record>& s, const std::vector<SigClass>& req) {
    try
    {
      verify_dual(reg, s, rrset, keys, fixture_now, req);
    }
    catch (const Error& e)
    {
      return std::make_pair(e.code(), e.side());
    }
    return std::make_pair(Errc::network, std::optional<SigClass>{});
  };

  auto r = error_of({sigs[0]}, both_classes);
  CHECK(r.first == Errc::missing_class);
  CHECK(r.second == SigClass::post_quantum);

  auto bad = sigs;
  bad[1].as<RrsigRdata>()->signature[5] ^= 0x40;
  r = error_of(bad, both_classes);
  CHECK(r.first == Errc::no_valid_signature);
  CHECK(r.second == SigClass::post_quantum);

  bad = sigs;
  bad[0].as<RrsigRdata>()->signature[5] ^= 0x40;
  r = error_of(bad, both_classes);
  CHECK(r.first == Errc::no_valid_signature);
  CHECK(r.second == SigClass::pre_quantum);

  CHECK_NOTHROW(verify_dual(reg, {sigs[1]}, rrset, keys, fixture_now, {SigClass::post_quantum}));
}

TEST_CASE("a signature whose key tag matches no key does not count")
{
  const auto& reg = SuiteRegistry::mock();
  auto key = generate_keypair(reg, alg::falcon512, KeyRole::zsk, view(seed("tag")));
  auto rrset = a_rrset();
  auto sig = sign_rrset(reg, rrset, key, Name::parse("socratescrc."), ValidityWindow::around(fixture_now));
  sig.as<RrsigRdata>()->key_tag ^= 1;
  CHECK_THROWS_AS(
    verify_dual(reg, {sig}, rrset, {dnskey_record(key)}, fixture_now, {SigClass::post_quantum}), Error);
}

TEST_CASE("key files round trip")
{
  const auto& reg = SuiteRegistry::standard();
  for (auto code : reg.codes())
  {
    auto key = generate_keypair(reg, code, KeyRole::ksk, view(seed("file")));
    auto text = write_key_file(key, reg);
    auto back = read_key_file(text, reg);
    CHECK(back.algorithm == key.algorithm);
    CHECK(back.role == key.role);
    CHECK(back.public_key == key.public_key);
    CHECK(back.secret == key.secret);
    CHECK(back.key_tag == key.key_tag);
  }
  CHECK_THROWS_AS(read_key_file("garbage", reg), Error);
}

TEST_CASE("hashes")
{
  Bytes abc{'a', 'b', 'c'};
  CHECK(lower(to_hex(view(sha256(view(abc))))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // SHAKE256("") first 32 bytes (FIPS 202 test vector).
  CHECK(lower(to_hex(view(shake256({}, 32)))) ==
        "46b9dd2b0ba88d13233b3feb743eeb243fcd52ea62b81b82b50c27646ed5762f");
}
