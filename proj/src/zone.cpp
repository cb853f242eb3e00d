#include "pqdns/zone.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>
#include <sstream>

namespace pqdns
{
  namespace
  {
    struct Line
    {
      std::size_t number;
      bool blank_owner;
      std::vector<std::string> tokens;
    };

    [[noreturn]] void syntax(std::size_t line, const std::string& msg)
    {
      fail(Errc::syntax_error, "line " + std::to_string(line) + ": " + msg);
    }

    /// Splits text into logical lines, joining parenthesised continuations
    /// and dropping comments.
    std::vector<Line> logical_lines(std::string_view text)
    {
      std::vector<Line> out;
      Line cur{1, false, {}};
      std::string tok;
      int depth = 0;
      bool in_comment = false;
      bool at_line_start = true;
      std::size_t number = 1;

      auto flush_token = [&] {
        if (!tok.empty())
          cur.tokens.push_back(std::move(tok));
        tok.clear();
      };
      auto flush_line = [&] {
        flush_token();
        if (!cur.tokens.empty())
          out.push_back(std::move(cur));
        cur = Line{number, false, {}};
      };

      for (std::size_t i = 0; i < text.size(); ++i)
      {
        char c = text[i];
        if (c == '\n')
        {
          ++number;
          in_comment = false;
          if (depth == 0)
          {
            flush_line();
            at_line_start = true;
            continue;
          }
          flush_token();
          continue;
        }
        if (in_comment)
          continue;
        if (at_line_start)
        {
          cur.number = number;
          cur.blank_owner = (c == ' ' || c == '\t');
          at_line_start = false;
        }
        if (c == '\\' && i + 1 < text.size())
        {
          tok.push_back(c);
          tok.push_back(text[++i]);
        }
        else if (c == ';')
        {
          flush_token();
          in_comment = true;
        }
        else if (c == '(')
        {
          flush_token();
          ++depth;
        }
        else if (c == ')')
        {
          flush_token();
          if (--depth < 0)
            syntax(number, "unbalanced ')'");
        }
        else if (std::isspace(static_cast<unsigned char>(c)))
          flush_token();
        else
          tok.push_back(c);
      }
      if (depth != 0)
        syntax(number, "unbalanced '('");
      flush_line();
      return out;
    }

    bool all_digits(std::string_view s)
    {
      return !s.empty() &&
        std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    }

    template <typename T>
    T number(std::size_t line, std::string_view s, const char* what)
    {
      T v{};
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        syntax(line, std::string("bad ") + what + " '" + std::string(s) + "'");
      return v;
    }

    std::uint32_t parse_time(std::size_t line, std::string_view s)
    {
      if (s.size() == 14 && all_digits(s))
      {
        std::tm tm{};
        tm.tm_year = number<int>(line, s.substr(0, 4), "year") - 1900;
        tm.tm_mon = number<int>(line, s.substr(4, 2), "month") - 1;
        tm.tm_mday = number<int>(line, s.substr(6, 2), "day");
        tm.tm_hour = number<int>(line, s.substr(8, 2), "hour");
        tm.tm_min = number<int>(line, s.substr(10, 2), "minute");
        tm.tm_sec = number<int>(line, s.substr(12, 2), "second");
        return static_cast<std::uint32_t>(timegm(&tm));
      }
      return number<std::uint32_t>(line, s, "timestamp");
    }

    std::string join(const std::vector<std::string>& toks, std::size_t from)
    {
      std::string out;
      for (std::size_t i = from; i < toks.size(); ++i)
        out += toks[i];
      return out;
    }

    Rdata parse_rdata(
      std::size_t line, RType type, const std::vector<std::string>& t, const Name& origin)
    {
      auto need = [&](std::size_t n) {
        if (t.size() < n)
          syntax(line, to_string(type) + " needs " + std::to_string(n) + " RDATA fields");
      };
      try
      {
        if (!t.empty() && t[0] == "\\#")
        {
          need(2);
          auto len = number<std::size_t>(line, t[1], "length");
          auto data = from_hex(join(t, 2));
          if (data.size() != len)
            syntax(line, "generic RDATA length does not match its data");
          return decode_rdata(type, data);
        }
        switch (type)
        {
          case RType::A:
            need(1);
            return ARdata::parse(t[0]);
          case RType::NS:
            need(1);
            return NsRdata{Name::parse_relative(t[0], origin)};
          case RType::SOA:
          {
            need(7);
            SoaRdata s;
            s.mname = Name::parse_relative(t[0], origin);
            s.rname = Name::parse_relative(t[1], origin);
            s.serial = number<std::uint32_t>(line, t[2], "serial");
            s.refresh = number<std::uint32_t>(line, t[3], "refresh");
            s.retry = number<std::uint32_t>(line, t[4], "retry");
            s.expire = number<std::uint32_t>(line, t[5], "expire");
            s.minimum = number<std::uint32_t>(line, t[6], "minimum");
            return s;
          }
          case RType::DS:
          {
            need(4);
            DsRdata d;
            d.key_tag = number<std::uint16_t>(line, t[0], "key tag");
            d.algorithm = number<std::uint8_t>(line, t[1], "algorithm");
            d.digest_type = number<std::uint8_t>(line, t[2], "digest type");
            d.digest = from_hex(join(t, 3));
            return d;
          }
          case RType::DNSKEY:
          {
            need(4);
            DnskeyRdata k;
            k.flags = number<std::uint16_t>(line, t[0], "flags");
            k.protocol = number<std::uint8_t>(line, t[1], "protocol");
            k.algorithm = number<std::uint8_t>(line, t[2], "algorithm");
            k.public_key = from_base64(join(t, 3));
            return k;
          }
          case RType::RRSIG:
          {
            need(9);
            RrsigRdata s;
            auto covered = rtype_from_string(t[0]);
            if (!covered)
              syntax(line, "unknown covered type '" + t[0] + "'");
            s.type_covered = *covered;
            s.algorithm = number<std::uint8_t>(line, t[1], "algorithm");
            s.labels = number<std::uint8_t>(line, t[2], "labels");
            s.original_ttl = number<std::uint32_t>(line, t[3], "original TTL");
            s.expiration = parse_time(line, t[4]);
            s.inception = parse_time(line, t[5]);
            s.key_tag = number<std::uint16_t>(line, t[6], "key tag");
            s.signer = Name::parse_relative(t[7], origin);
            s.signature = from_base64(join(t, 8));
            return s;
          }
          default:
            syntax(line, "type " + to_string(type) + " needs the generic \\# form");
        }
      }
      catch (const Error& e)
      {
        if (e.code() == Errc::syntax_error && std::string_view(e.what()).find("line ") != std::string_view::npos)
          throw;
        syntax(line, e.what());
      }
    }

    std::string ttl_token_error(std::string_view s)
    {
      return "bad TTL '" + std::string(s) + "'";
    }

    bool same_rrset(const Record& a, const Name& owner, RType type)
    {
      return a.type == type && a.name.equals_ci(owner);
    }
  }

  // ----------------------------------------------------------------- Zone

  bool Zone::is_signed() const
  {
    return std::any_of(records.begin(), records.end(), [](const Record& r) {
      return r.type == RType::DNSKEY;
    });
  }

  const Record& Zone::soa() const
  {
    for (const auto& r : records)
      if (r.type == RType::SOA && r.name.equals_ci(origin))
        return r;
    fail(Errc::no_soa, "zone " + origin.to_string() + " has no SOA");
  }

  std::vector<Record> Zone::rrset(const Name& owner, RType type) const
  {
    std::vector<Record> out;
    for (const auto& r : records)
      if (same_rrset(r, owner, type))
        out.push_back(r);
    return out;
  }

  std::vector<Record> Zone::rrsigs(const Name& owner, RType covered) const
  {
    std::vector<Record> out;
    for (const auto& r : records)
      if (r.name.equals_ci(owner) && rrsig_covering(r, covered))
        out.push_back(r);
    return out;
  }

  bool Zone::has_owner(const Name& owner) const
  {
    return std::any_of(records.begin(), records.end(), [&](const Record& r) {
      return r.name.equals_ci(owner);
    });
  }

  std::optional<Name> Zone::delegation_for(const Name& name) const
  {
    if (!name.is_subdomain_of(origin))
      return std::nullopt;
    std::optional<Name> best;
    for (const auto& r : records)
      if (
        r.type == RType::NS && !r.name.equals_ci(origin) && name.is_subdomain_of(r.name) &&
        (!best || r.name.label_count() < best->label_count()))
        best = r.name;
    return best;
  }

  bool Zone::is_authoritative(const Name& owner, RType type) const
  {
    auto cut = delegation_for(owner);
    if (!cut)
      return true;
    return type == RType::DS && owner.equals_ci(*cut);
  }

  // --------------------------------------------------------------- parser

  Zone parse_zone_file(std::string_view text, const std::optional<Name>& origin_hint)
  {
    Zone zone;
    std::optional<Name> origin = origin_hint;
    std::optional<std::uint32_t> default_ttl;
    std::optional<Name> last_owner;
    std::optional<std::uint32_t> last_ttl;

    for (const auto& line : logical_lines(text))
    {
      const auto& t = line.tokens;
      if (t[0] == "$ORIGIN")
      {
        if (t.size() != 2)
          syntax(line.number, "$ORIGIN takes one name");
        origin = Name::parse(t[1]);
        continue;
      }
      if (t[0] == "$TTL")
      {
        if (t.size() != 2)
          syntax(line.number, "$TTL takes one value");
        default_ttl = number<std::uint32_t>(line.number, t[1], "TTL");
        if (*default_ttl > max_zone_ttl)
          fail(Errc::ttl_too_large, "line " + std::to_string(line.number) + ": $TTL " + t[1]);
        continue;
      }
      if (!t[0].empty() && t[0][0] == '$')
        syntax(line.number, "unsupported directive " + t[0]);

      std::size_t i = 0;
      Name owner;
      Name base = origin.value_or(Name());
      if (line.blank_owner)
      {
        if (!last_owner)
          syntax(line.number, "record without an owner");
        owner = *last_owner;
      }
      else
      {
        try
        {
          owner = Name::parse_relative(t[i++], base);
        }
        catch (const Error& e)
        {
          syntax(line.number, e.what());
        }
      }

      std::optional<std::uint32_t> ttl;
      std::optional<RType> type;
      for (int k = 0; k < 2 && i < t.size(); ++k)
      {
        if (all_digits(t[i]) && !ttl)
        {
          std::uint64_t v = 0;
          auto [p, ec] = std::from_chars(t[i].data(), t[i].data() + t[i].size(), v);
          if (ec != std::errc())
            syntax(line.number, ttl_token_error(t[i]));
          if (v > max_zone_ttl)
            fail(
              Errc::ttl_too_large,
              "line " + std::to_string(line.number) + ": TTL " + t[i] + " needs more than 24 bits");
          ttl = static_cast<std::uint32_t>(v);
          ++i;
        }
        else if (t[i] == "IN" || t[i] == "in")
          ++i;
        else if (t[i].rfind("CLASS", 0) == 0 || t[i] == "CH" || t[i] == "HS")
          syntax(line.number, "only class IN is supported");
      }
      if (i >= t.size())
        syntax(line.number, "missing record type");
      type = rtype_from_string(t[i]);
      if (!type)
        syntax(line.number, "unknown type '" + t[i] + "'");
      ++i;
      if (*type == RType::OPT)
        syntax(line.number, "OPT does not belong in a zone");

      if (!ttl)
        ttl = default_ttl ? default_ttl : last_ttl;
      if (!ttl)
        syntax(line.number, "no TTL and no $TTL default");

      std::vector<std::string> rd(t.begin() + static_cast<std::ptrdiff_t>(i), t.end());
      Record r;
      r.name = owner;
      r.type = *type;
      r.rclass = class_in;
      r.ttl = *ttl;
      r.rdata = parse_rdata(line.number, *type, rd, base);
      if (!origin && r.type == RType::SOA)
        origin = owner;
      zone.records.push_back(std::move(r));
      last_owner = owner;
      last_ttl = ttl;
    }

    if (!origin)
    {
      fail(Errc::no_soa, "zone has no SOA and no $ORIGIN");
    }
    zone.origin = *origin;
    std::size_t soas = 0;
    for (const auto& r : zone.records)
    {
      if (r.type != RType::SOA)
        continue;
      if (!r.name.equals_ci(zone.origin))
        fail(Errc::syntax_error, "SOA owner " + r.name.to_string() + " is not the zone origin");
      ++soas;
    }
    if (soas == 0)
      fail(Errc::no_soa, "zone " + zone.origin.to_string() + " has no SOA");
    if (soas > 1)
      fail(Errc::syntax_error, "zone " + zone.origin.to_string() + " has more than one SOA");
    return zone;
  }

  std::string print_zone(const Zone& zone)
  {
    std::ostringstream os;
    os << "$ORIGIN " << zone.origin.to_string() << '\n';
    for (const auto& r : zone.records)
      os << to_string(r) << '\n';
    return os.str();
  }

  // -------------------------------------------------------------- signing

  std::vector<KeyPair> make_zone_keys(
    const SuiteRegistry& registry,
    const Name& origin,
    std::optional<std::uint8_t> pre,
    std::optional<std::uint8_t> post,
    ByteView seed)
  {
    if (!pre && !post)
      fail(Errc::class_mismatch, "at least one signature suite is required");
    if (pre && registry.at(*pre).cls != SigClass::pre_quantum)
      fail(Errc::class_mismatch, registry.at(*pre).name + " is not a pre-quantum suite");
    if (post && registry.at(*post).cls != SigClass::post_quantum)
      fail(Errc::class_mismatch, registry.at(*post).name + " is not a post-quantum suite");

    std::vector<KeyPair> keys;
    auto owner = origin.canonical_wire();
    for (auto code : {pre, post})
    {
      if (!code)
        continue;
      for (auto role : {KeyRole::ksk, KeyRole::zsk})
      {
        Bytes s(seed.begin(), seed.end());
        s.insert(s.end(), owner.begin(), owner.end());
        s.push_back(*code);
        s.push_back(static_cast<std::uint8_t>(role));
        keys.push_back(generate_keypair(registry, *code, role, s));
      }
    }
    return keys;
  }

  Zone sign_zone(
    const Zone& zone,
    const SuiteRegistry& registry,
    std::vector<KeyPair> keys,
    std::uint32_t now,
    std::uint32_t dnskey_ttl)
  {
    if (keys.empty())
      fail(Errc::class_mismatch, "no signing keys");
    std::optional<std::uint8_t> per_class[2];
    for (const auto& k : keys)
    {
      auto& slot = per_class[static_cast<int>(registry.at(k.algorithm).cls)];
      if (slot && *slot != k.algorithm)
        fail(Errc::class_mismatch, "two suites of the same class");
      slot = k.algorithm;
    }
    auto ttl_ok = [](std::uint32_t ttl) {
      if (ttl > max_zone_ttl)
        fail(Errc::ttl_too_large, "TTL " + std::to_string(ttl) + " needs more than 24 bits");
    };
    ttl_ok(dnskey_ttl);
    zone.soa();

    Zone out;
    out.origin = zone.origin;
    out.keys = keys;
    for (const auto& r : zone.records)
      if (r.type != RType::DNSKEY && r.type != RType::RRSIG)
      {
        ttl_ok(r.ttl);
        out.records.push_back(r);
      }
    for (const auto& k : keys)
    {
      Record r;
      r.name = zone.origin;
      r.type = RType::DNSKEY;
      r.ttl = dnskey_ttl;
      r.rdata = k.dnskey();
      out.records.push_back(std::move(r));
    }

    // RRsets in order of first appearance.
    std::vector<std::pair<Name, RType>> sets;
    for (const auto& r : out.records)
      if (std::none_of(sets.begin(), sets.end(), [&](const auto& s) {
            return same_rrset(r, s.first, s.second);
          }))
        sets.emplace_back(r.name, r.type);

    auto window = ValidityWindow::around(now);
    std::vector<Record> sigs;
    for (const auto& [owner, type] : sets)
    {
      if (!out.is_authoritative(owner, type))
        continue;
      auto set = out.rrset(owner, type);
      for (const auto& k : keys)
        if (type == RType::DNSKEY || k.role == KeyRole::zsk)
          sigs.push_back(sign_rrset(registry, set, k, zone.origin, window));
    }
    out.records.insert(out.records.end(), sigs.begin(), sigs.end());
    return out;
  }

  Zone sign_zone(
    const Zone& zone,
    const SuiteRegistry& registry,
    std::optional<std::uint8_t> pre,
    std::optional<std::uint8_t> post,
    std::uint32_t now,
    ByteView seed)
  {
    return sign_zone(zone, registry, make_zone_keys(registry, zone.origin, pre, post, seed), now);
  }

  // ------------------------------------------------------------------- DS

  DsRdata make_ds(const Name& owner, const DnskeyRdata& key)
  {
    auto input = owner.canonical_wire();
    auto rd = encode_rdata(key);
    input.insert(input.end(), rd.begin(), rd.end());
    DsRdata ds;
    ds.key_tag = key_tag(rd);
    ds.algorithm = key.algorithm;
    ds.digest_type = 2;
    ds.digest = sha256(input);
    return ds;
  }

  std::vector<Record> make_ds(const Zone& zone)
  {
    if (!zone.is_signed())
      fail(Errc::not_signed, "zone " + zone.origin.to_string() + " has no DNSKEY records");
    std::vector<Record> out;
    for (const auto& r : zone.records)
    {
      const auto* k = r.as<DnskeyRdata>();
      if (r.type != RType::DNSKEY || k == nullptr || !k->is_ksk())
        continue;
      Record ds;
      ds.name = zone.origin;
      ds.type = RType::DS;
      ds.ttl = r.ttl;
      ds.rdata = make_ds(zone.origin, *k);
      out.push_back(std::move(ds));
    }
    if (out.empty())
      fail(Errc::not_signed, "zone " + zone.origin.to_string() + " has no KSK");
    return out;
  }

  bool ds_matches(const DsRdata& ds, const Name& owner, const DnskeyRdata& key)
  {
    if (ds.digest_type != 2 || ds.algorithm != key.algorithm)
      return false;
    return make_ds(owner, key) == ds;
  }

  // ---------------------------------------------------------- TrustAnchor

  TrustAnchor TrustAnchor::from_zone(const Zone& signed_zone)
  {
    TrustAnchor ta;
    ta.zone = signed_zone.origin;
    for (const auto& r : make_ds(signed_zone))
      ta.ds.push_back(*r.as<DsRdata>());
    return ta;
  }

  TrustAnchor TrustAnchor::parse(std::string_view text)
  {
    TrustAnchor ta;
    std::optional<Name> zone;
    for (const auto& line : logical_lines(text))
    {
      const auto& t = line.tokens;
      if (t.size() != 5)
        syntax(line.number, "expected `zone key_tag algorithm digest_type digest`");
      Name n = Name::parse(t[0]);
      if (zone && !zone->equals_ci(n))
        syntax(line.number, "trust anchor lines name different zones");
      zone = n;
      DsRdata ds;
      ds.key_tag = number<std::uint16_t>(line.number, t[1], "key tag");
      ds.algorithm = number<std::uint8_t>(line.number, t[2], "algorithm");
      ds.digest_type = number<std::uint8_t>(line.number, t[3], "digest type");
      if (ds.digest_type != 2)
        syntax(line.number, "only digest type 2 is supported");
      ds.digest = from_hex(t[4]);
      if (ds.digest.size() != 32)
        syntax(line.number, "SHA-256 digest must be 32 bytes");
      ta.ds.push_back(std::move(ds));
    }
    if (!zone)
      fail(Errc::syntax_error, "empty trust anchor");
    ta.zone = *zone;
    return ta;
  }

  std::string TrustAnchor::to_string() const
  {
    std::ostringstream os;
    for (const auto& d : ds)
      os << zone.to_string() << ' ' << d.key_tag << ' ' << int(d.algorithm) << ' '
         << int(d.digest_type) << ' ' << to_hex(d.digest) << '\n';
    return os.str();
  }
}
