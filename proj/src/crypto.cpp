#include "pqdns/crypto.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace pqdns
{
  namespace
  {
    std::string lower(std::string_view s)
    {
      std::string out(s);
      for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      return out;
    }

    void put16(Bytes& b, std::uint16_t v)
    {
      b.push_back(static_cast<std::uint8_t>(v >> 8));
      b.push_back(static_cast<std::uint8_t>(v));
    }

    void put32(Bytes& b, std::uint32_t v)
    {
      put16(b, static_cast<std::uint16_t>(v >> 16));
      put16(b, static_cast<std::uint16_t>(v));
    }

    struct Spec
    {
      std::uint8_t code;
      const char* name;
      SigClass cls;
      std::size_t sig_len;
      std::size_t pub_len;
    };

    constexpr Spec specs[] = {
      {alg::rsasha256, "RSASHA256", SigClass::pre_quantum, 256, 260},
      {alg::ecdsap256sha256, "ECDSAP256SHA256", SigClass::pre_quantum, 64, 64},
      {alg::falcon512, "FALCON512", SigClass::post_quantum, 690, 897},
      {alg::dilithium2, "DILITHIUM2", SigClass::post_quantum, 2420, 1312},
      {alg::sphincs_sha256_128s, "SPHINCS+-SHA256-128S", SigClass::post_quantum, 7856, 32},
    };

    SuiteRegistry build(bool all_mock)
    {
      SuiteRegistry r;
      for (const auto& s : specs)
      {
        std::shared_ptr<const SignatureBackend> backend;
        if (!all_mock && s.code == alg::ecdsap256sha256)
          backend = make_ecdsa_p256_backend();
        else if (!all_mock && s.code == alg::rsasha256)
          backend = make_rsa2048_backend();
        else
          backend = make_mock_backend(s.sig_len, s.pub_len);
        r.add({s.code, s.name, s.cls, s.sig_len, s.pub_len, backend});
      }
      return r;
    }

    void check_rrset(const std::vector<Record>& rrset)
    {
      if (rrset.empty())
        fail(Errc::empty_rrset, "cannot sign or verify an empty RRset");
      const auto& first = rrset.front();
      for (const auto& r : rrset)
        if (
          !r.name.equals_ci(first.name) || r.type != first.type || r.rclass != first.rclass)
          fail(Errc::mixed_rrset, "records differ in owner, type or class");
    }

    std::uint8_t label_count_for_sig(const Name& owner)
    {
      auto n = owner.label_count();
      if (n > 0 && owner.labels().front() == "*")
        --n;
      return static_cast<std::uint8_t>(n);
    }
  }

  const SuiteRegistry& SuiteRegistry::standard()
  {
    static const SuiteRegistry r = build(false);
    return r;
  }

  const SuiteRegistry& SuiteRegistry::mock()
  {
    static const SuiteRegistry r = build(true);
    return r;
  }

  SuiteRegistry& SuiteRegistry::add(SignatureSuite suite)
  {
    auto code = suite.code;
    suites_[code] = std::move(suite);
    return *this;
  }

  const SignatureSuite* SuiteRegistry::find(std::uint8_t code) const
  {
    auto it = suites_.find(code);
    return it == suites_.end() ? nullptr : &it->second;
  }

  const SignatureSuite& SuiteRegistry::at(std::uint8_t code) const
  {
    if (auto* s = find(code))
      return *s;
    fail(Errc::unknown_algorithm, "algorithm " + std::to_string(code) + " is not registered");
  }

  const SignatureSuite& SuiteRegistry::by_name(std::string_view name) const
  {
    static const std::pair<const char*, std::uint8_t> aliases[] = {
      {"rsa", alg::rsasha256},
      {"rsasha256", alg::rsasha256},
      {"ecdsa", alg::ecdsap256sha256},
      {"ecdsap256", alg::ecdsap256sha256},
      {"ecdsa256", alg::ecdsap256sha256},
      {"falcon", alg::falcon512},
      {"falcon512", alg::falcon512},
      {"dilithium", alg::dilithium2},
      {"dilithium2", alg::dilithium2},
      {"sphincs", alg::sphincs_sha256_128s},
      {"sphincs+", alg::sphincs_sha256_128s},
    };
    auto key = lower(name);
    for (const auto& [alias, code] : aliases)
      if (key == alias)
        if (auto* s = find(code))
          return *s;
    for (const auto& [code, s] : suites_)
      if (lower(s.name) == key || std::to_string(code) == key)
        return s;
    fail(Errc::unknown_algorithm, "unknown algorithm name '" + std::string(name) + "'");
  }

  std::optional<SigClass> SuiteRegistry::class_of(std::uint8_t code) const
  {
    if (auto* s = find(code))
      return s->cls;
    return std::nullopt;
  }

  std::vector<std::uint8_t> SuiteRegistry::codes() const
  {
    std::vector<std::uint8_t> out;
    for (const auto& [code, s] : suites_)
      out.push_back(code);
    return out;
  }

  std::string_view to_string(KeyRole r)
  {
    return r == KeyRole::ksk ? "KSK" : "ZSK";
  }

  DnskeyRdata KeyPair::dnskey() const
  {
    DnskeyRdata d;
    d.flags = role == KeyRole::ksk ? DnskeyRdata::ksk_flags : DnskeyRdata::zsk_flags;
    d.protocol = 3;
    d.algorithm = algorithm;
    d.public_key = public_key;
    return d;
  }

  KeyPair generate_keypair(
    const SuiteRegistry& registry, std::uint8_t algorithm, KeyRole role, ByteView seed)
  {
    const auto& suite = registry.at(algorithm);
    if (seed.empty())
      fail(Errc::crypto_failure, "key generation needs a non-empty seed");
    auto km = suite.backend->generate(seed);
    if (km.public_key.size() != suite.pubkey_len)
      fail(Errc::crypto_failure, suite.name + " backend produced a public key of wrong size");
    KeyPair kp;
    kp.algorithm = algorithm;
    kp.role = role;
    kp.secret = std::move(km.secret);
    kp.public_key = std::move(km.public_key);
    kp.key_tag = key_tag(encode_rdata(kp.dnskey()));
    return kp;
  }

  std::uint16_t key_tag(ByteView rdata)
  {
    if (rdata.size() < DnskeyRdata::prefix_length)
      fail(Errc::too_short, "DNSKEY RDATA shorter than 4 bytes");
    std::uint32_t ac = 0;
    for (std::size_t i = 0; i < rdata.size(); ++i)
      ac += (i & 1) ? rdata[i] : static_cast<std::uint32_t>(rdata[i]) << 8;
    ac += (ac >> 16) & 0xFFFF;
    return static_cast<std::uint16_t>(ac & 0xFFFF);
  }

  ValidityWindow ValidityWindow::around(std::uint32_t now)
  {
    return {now - 3600u, now + 30u * 86400u};
  }

  Bytes signing_input(const RrsigRdata& sig, const std::vector<Record>& rrset)
  {
    RrsigRdata prefix = sig;
    prefix.signature.clear();
    Bytes out = encode_rdata(prefix, true);

    std::vector<Bytes> rdatas;
    rdatas.reserve(rrset.size());
    for (const auto& r : rrset)
      rdatas.push_back(encode_rdata(r.rdata, true));
    std::sort(rdatas.begin(), rdatas.end());
    rdatas.erase(std::unique(rdatas.begin(), rdatas.end()), rdatas.end());

    if (rrset.empty())
      return out;
    auto owner = rrset.front().name.canonical_wire();
    for (const auto& rd : rdatas)
    {
      out.insert(out.end(), owner.begin(), owner.end());
      put16(out, static_cast<std::uint16_t>(rrset.front().type));
      put16(out, rrset.front().rclass);
      put32(out, sig.original_ttl);
      put16(out, static_cast<std::uint16_t>(rd.size()));
      out.insert(out.end(), rd.begin(), rd.end());
    }
    return out;
  }

  Record sign_rrset(
    const SuiteRegistry& registry,
    const std::vector<Record>& rrset,
    const KeyPair& key,
    const Name& signer,
    ValidityWindow window)
  {
    check_rrset(rrset);
    const auto& first = rrset.front();
    for (const auto& r : rrset)
      if (r.ttl != first.ttl)
        fail(Errc::mixed_rrset, "records in an RRset must share a TTL");
    if (key.role == KeyRole::ksk && first.type != RType::DNSKEY)
      fail(Errc::role_violation, "a KSK may only sign the DNSKEY RRset");
    const auto& suite = registry.at(key.algorithm);

    RrsigRdata sig;
    sig.type_covered = first.type;
    sig.algorithm = key.algorithm;
    sig.labels = label_count_for_sig(first.name);
    sig.original_ttl = first.ttl;
    sig.expiration = window.expiration;
    sig.inception = window.inception;
    sig.key_tag = key.key_tag;
    sig.signer = signer;
    sig.signature = suite.backend->sign(key.secret, signing_input(sig, rrset));
    if (sig.signature.size() > suite.sig_len)
      fail(Errc::crypto_failure, suite.name + " signature longer than its nominal size");
    // Variable-length schemes are padded to the nominal size so that size
    // forecasts stay exact.
    sig.signature.resize(suite.sig_len, 0);

    Record out;
    out.name = first.name;
    out.type = RType::RRSIG;
    out.rclass = first.rclass;
    out.ttl = first.ttl;
    out.rdata = std::move(sig);
    return out;
  }

  bool verify_rrsig(
    const SuiteRegistry& registry,
    const Record& rrsig,
    const std::vector<Record>& rrset,
    ByteView public_key,
    std::uint32_t now)
  {
    const auto* sig = rrsig.as<RrsigRdata>();
    if (rrsig.type != RType::RRSIG || sig == nullptr)
      return false;
    const auto& suite = registry.at(sig->algorithm);
    check_rrset(rrset);
    const auto& first = rrset.front();
    if (sig->type_covered != first.type || !rrsig.name.equals_ci(first.name))
      return false;
    if (now < sig->inception || now > sig->expiration)
      return false;
    if (sig->signature.size() != suite.sig_len)
      return false;
    return suite.backend->verify(public_key, signing_input(*sig, rrset), sig->signature);
  }

  VerifiedDual verify_dual(
    const SuiteRegistry& registry,
    const std::vector<Record>& rrsigs,
    const std::vector<Record>& rrset,
    const std::vector<Record>& keys,
    std::uint32_t now,
    const std::vector<SigClass>& required)
  {
    check_rrset(rrset);
    bool present[2] = {false, false};
    VerifiedDual out;
    for (const auto& rr : rrsigs)
    {
      const auto* sig = rrsig_covering(rr, rrset.front().type);
      if (sig == nullptr || !rr.name.equals_ci(rrset.front().name))
        continue;
      auto cls = registry.class_of(sig->algorithm);
      if (!cls)
        continue;
      present[static_cast<int>(*cls)] = true;
      auto& slot = *cls == SigClass::pre_quantum ? out.pre_quantum_tag : out.post_quantum_tag;
      if (slot)
        continue;
      for (const auto& k : keys)
      {
        const auto* dk = k.as<DnskeyRdata>();
        if (
          k.type != RType::DNSKEY || dk == nullptr || dk->protocol != 3 ||
          (dk->flags != DnskeyRdata::zsk_flags && dk->flags != DnskeyRdata::ksk_flags) ||
          dk->algorithm != sig->algorithm || !k.name.equals_ci(sig->signer) ||
          key_tag(encode_rdata(*dk)) != sig->key_tag)
          continue;
        if (verify_rrsig(registry, rr, rrset, dk->public_key, now))
        {
          slot = sig->key_tag;
          break;
        }
      }
    }
    for (auto cls : required)
    {
      const auto& slot =
        cls == SigClass::pre_quantum ? out.pre_quantum_tag : out.post_quantum_tag;
      auto what = std::string(to_string(cls)) + " " + to_string(rrset.front().type) +
        " RRset at " + rrset.front().name.to_string();
      if (!present[static_cast<int>(cls)])
        throw Error(
          Errc::missing_class, "MissingClass: no " + what + " signature", cls);
      if (!slot)
        throw Error(
          Errc::no_valid_signature,
          "NoValidSignature: no valid signature over " + what,
          cls);
    }
    return out;
  }

  std::string write_key_file(const KeyPair& key, const SuiteRegistry& registry)
  {
    const auto& suite = registry.at(key.algorithm);
    std::ostringstream os;
    auto wrap = [&os](const std::string& b64) {
      for (std::size_t i = 0; i < b64.size(); i += 64)
        os << b64.substr(i, 64) << '\n';
    };
    os << "; pqdns key file\n";
    os << "Algorithm: " << int(key.algorithm) << " (" << suite.name << ")\n";
    os << "Role: " << to_string(key.role) << '\n';
    os << "Key-Tag: " << key.key_tag << '\n';
    os << "Public:\n";
    wrap(to_base64(key.public_key));
    os << "Secret:\n";
    wrap(to_base64(key.secret));
    return os.str();
  }

  KeyPair read_key_file(std::string_view text, const SuiteRegistry& registry)
  {
    std::optional<int> algorithm;
    std::optional<KeyRole> role;
    std::optional<long> tag;
    std::string pub_b64, sec_b64;
    std::string* section = nullptr;

    std::istringstream is{std::string(text)};
    std::string line;
    while (std::getline(is, line))
    {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
        line.pop_back();
      if (line.empty() || line[0] == ';')
        continue;
      auto colon = line.find(':');
      if (colon == std::string::npos)
      {
        if (section == nullptr)
          fail(Errc::bad_key_file, "unexpected line '" + line + "'");
        *section += line;
        continue;
      }
      auto field = lower(line.substr(0, colon));
      auto value = line.substr(colon + 1);
      value.erase(0, value.find_first_not_of(' '));
      section = nullptr;
      try
      {
        if (field == "algorithm")
          algorithm = std::stoi(value);
        else if (field == "role")
        {
          auto v = lower(value);
          if (v == "ksk")
            role = KeyRole::ksk;
          else if (v == "zsk")
            role = KeyRole::zsk;
          else
            fail(Errc::bad_key_file, "role must be KSK or ZSK");
        }
        else if (field == "key-tag")
          tag = std::stol(value);
        else if (field == "public")
          section = &pub_b64;
        else if (field == "secret")
          section = &sec_b64;
        else
          fail(Errc::bad_key_file, "unknown field '" + field + "'");
      }
      catch (const std::logic_error&)
      {
        fail(Errc::bad_key_file, "malformed value for " + field);
      }
    }
    if (!algorithm || !role || pub_b64.empty() || sec_b64.empty())
      fail(Errc::bad_key_file, "missing Algorithm, Role, Public or Secret");
    if (*algorithm < 0 || *algorithm > 255)
      fail(Errc::bad_key_file, "algorithm out of range");

    KeyPair kp;
    kp.algorithm = static_cast<std::uint8_t>(*algorithm);
    kp.role = *role;
    try
    {
      kp.public_key = from_base64(pub_b64);
      kp.secret = from_base64(sec_b64);
    }
    catch (const Error& e)
    {
      fail(Errc::bad_key_file, e.what());
    }
    const auto& suite = registry.at(kp.algorithm);
    if (kp.public_key.size() != suite.pubkey_len)
      fail(Errc::bad_key_file, "public key size does not match " + suite.name);
    kp.key_tag = key_tag(encode_rdata(kp.dnskey()));
    if (tag && *tag != kp.key_tag)
      fail(Errc::bad_key_file, "Key-Tag does not match the public key");
    return kp;
  }
}
