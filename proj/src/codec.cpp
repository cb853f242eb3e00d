#include "pqdns/codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <unordered_map>

namespace pqdns
{
  namespace
  {
    char ascii_lower(char c)
    {
      return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c;
    }

    std::string lower(std::string s)
    {
      for (auto& c : s)
        c = ascii_lower(c);
      return s;
    }

    void put16(Bytes& out, std::uint16_t v)
    {
      out.push_back(static_cast<std::uint8_t>(v >> 8));
      out.push_back(static_cast<std::uint8_t>(v));
    }

    void put32(Bytes& out, std::uint32_t v)
    {
      put16(out, static_cast<std::uint16_t>(v >> 16));
      put16(out, static_cast<std::uint16_t>(v));
    }

    void put_name(Bytes& out, const Name& n, bool canonical)
    {
      for (const auto& l : n.labels())
      {
        out.push_back(static_cast<std::uint8_t>(l.size()));
        for (char c : l)
          out.push_back(
            static_cast<std::uint8_t>(canonical ? ascii_lower(c) : c));
      }
      out.push_back(0);
    }

    class Reader
    {
    public:
      explicit Reader(ByteView buf, std::size_t pos = 0) : buf_(buf), pos_(pos)
      {}

      std::size_t pos() const
      {
        return pos_;
      }

      std::size_t remaining() const
      {
        return buf_.size() - pos_;
      }

      void need(std::size_t n) const
      {
        if (remaining() < n)
          fail(Errc::truncated, "need " + std::to_string(n) + " bytes");
      }

      std::uint8_t u8()
      {
        need(1);
        return buf_[pos_++];
      }

      std::uint16_t u16()
      {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] << 8 | buf_[pos_ + 1]);
        pos_ += 2;
        return v;
      }

      std::uint32_t u32()
      {
        std::uint32_t hi = u16();
        return hi << 16 | u16();
      }

      Bytes bytes(std::size_t n)
      {
        need(n);
        Bytes out(buf_.begin() + pos_, buf_.begin() + pos_ + n);
        pos_ += n;
        return out;
      }

      /// Reads a possibly compressed name. Pointers must reference a strictly
      /// earlier offset of `buf_`.
      Name name(bool allow_pointers)
      {
        std::vector<std::string> labels;
        std::size_t p = pos_;
        std::size_t end = 0;
        bool jumped = false;
        std::size_t wire = 1;
        int hops = 0;
        for (;;)
        {
          if (p >= buf_.size())
            fail(Errc::truncated, "name runs past end of message");
          std::uint8_t len = buf_[p];
          if ((len & 0xC0) == 0xC0)
          {
            if (p + 1 >= buf_.size())
              fail(Errc::truncated, "compression pointer cut short");
            if (!allow_pointers)
              fail(Errc::bad_pointer, "compression pointer where none allowed");
            std::size_t target = static_cast<std::size_t>(len & 0x3F) << 8 | buf_[p + 1];
            if (target >= buf_.size())
              fail(Errc::bad_pointer, "pointer past end of message");
            if (target == p || ++hops > 127)
              fail(Errc::pointer_loop, "compression pointer loop");
            if (target > p)
              fail(Errc::bad_pointer, "forward compression pointer");
            if (!jumped)
              end = p + 2;
            jumped = true;
            p = target;
            continue;
          }
          if ((len & 0xC0) != 0)
            fail(Errc::bad_label, "unsupported label type");
          if (len == 0)
          {
            if (!jumped)
              end = p + 1;
            break;
          }
          if (p + 1 + len > buf_.size())
            fail(Errc::truncated, "label runs past end of message");
          wire += 1 + len;
          if (wire > Name::max_wire)
            fail(Errc::name_too_long, "name exceeds 255 bytes");
          labels.emplace_back(
            reinterpret_cast<const char*>(buf_.data() + p + 1), len);
          p += 1 + len;
        }
        pos_ = end;
        return Name(std::move(labels));
      }

    private:
      ByteView buf_;
      std::size_t pos_;
    };

    /// Typed RDATA parse over [start, start+len) of `buf`. Names in NS/SOA
    /// may be compressed against `buf` when `in_message` is set.
    Rdata parse_rdata(
      RType type, ByteView buf, std::size_t start, std::size_t len, bool in_message)
    {
      const std::size_t stop = start + len;
      auto opaque = [&] {
        return Rdata{OpaqueRdata{Bytes(buf.begin() + start, buf.begin() + stop)}};
      };
      try
      {
        // Bound names and fields to the RDATA so a malformed record cannot
        // read into its neighbours.
        ByteView bounded = buf.first(stop);
        Reader r(bounded, start);
        Rdata out;
        switch (type)
        {
          case RType::A:
          {
            if (len != 4)
              return opaque();
            ARdata a;
            for (auto& b : a.address)
              b = r.u8();
            out = a;
            break;
          }
          case RType::NS:
            out = NsRdata{r.name(in_message)};
            break;
          case RType::SOA:
          {
            SoaRdata s;
            s.mname = r.name(in_message);
            s.rname = r.name(in_message);
            s.serial = r.u32();
            s.refresh = r.u32();
            s.retry = r.u32();
            s.expire = r.u32();
            s.minimum = r.u32();
            out = s;
            break;
          }
          case RType::DS:
          {
            DsRdata d;
            d.key_tag = r.u16();
            d.algorithm = r.u8();
            d.digest_type = r.u8();
            d.digest = r.bytes(stop - r.pos());
            out = d;
            break;
          }
          case RType::RRSIG:
          {
            RrsigRdata s;
            s.type_covered = static_cast<RType>(r.u16());
            s.algorithm = r.u8();
            s.labels = r.u8();
            s.original_ttl = r.u32();
            s.expiration = r.u32();
            s.inception = r.u32();
            s.key_tag = r.u16();
            s.signer = r.name(false);
            s.signature = r.bytes(stop - r.pos());
            out = s;
            break;
          }
          case RType::DNSKEY:
          {
            DnskeyRdata k;
            k.flags = r.u16();
            k.protocol = r.u8();
            k.algorithm = r.u8();
            k.public_key = r.bytes(stop - r.pos());
            out = k;
            break;
          }
          default:
            return opaque();
        }
        if (r.pos() != stop)
          return opaque();
        return out;
      }
      catch (const Error&)
      {
        return opaque();
      }
    }

    class Writer
    {
    public:
      explicit Writer(bool compress) : compress_(compress) {}

      Bytes& out()
      {
        return buf_;
      }

      void name(const Name& n, bool compressible)
      {
        const auto& labels = n.labels();
        for (std::size_t i = 0; i < labels.size(); ++i)
        {
          std::string key = suffix_key(labels, i);
          if (compress_ && compressible)
          {
            auto it = table_.find(key);
            if (it != table_.end())
            {
              put16(buf_, static_cast<std::uint16_t>(0xC000 | it->second));
              return;
            }
          }
          if (compressible && buf_.size() < 0x3FFF)
            table_.emplace(std::move(key), static_cast<std::uint16_t>(buf_.size()));
          buf_.push_back(static_cast<std::uint8_t>(labels[i].size()));
          buf_.insert(buf_.end(), labels[i].begin(), labels[i].end());
        }
        buf_.push_back(0);
      }

      void rdata(const Rdata& rd)
      {
        std::visit(
          [this](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NsRdata>)
              name(v.host, true);
            else if constexpr (std::is_same_v<T, SoaRdata>)
            {
              name(v.mname, true);
              name(v.rname, true);
              put32(buf_, v.serial);
              put32(buf_, v.refresh);
              put32(buf_, v.retry);
              put32(buf_, v.expire);
              put32(buf_, v.minimum);
            }
            else
            {
              auto bytes = encode_rdata(v);
              buf_.insert(buf_.end(), bytes.begin(), bytes.end());
            }
          },
          rd);
      }

      void record(const Record& r)
      {
        name(r.name, true);
        put16(buf_, static_cast<std::uint16_t>(r.type));
        put16(buf_, r.rclass);
        put32(buf_, r.ttl);
        std::size_t len_at = buf_.size();
        put16(buf_, 0);
        rdata(r.rdata);
        std::size_t rdlen = buf_.size() - len_at - 2;
        if (rdlen > 0xFFFF)
          fail(Errc::rdata_too_long, "RDATA of " + std::to_string(rdlen) + " bytes");
        buf_[len_at] = static_cast<std::uint8_t>(rdlen >> 8);
        buf_[len_at + 1] = static_cast<std::uint8_t>(rdlen);
      }

    private:
      static std::string suffix_key(const std::vector<std::string>& labels, std::size_t from)
      {
        std::string key;
        for (std::size_t i = from; i < labels.size(); ++i)
        {
          key.push_back(static_cast<char>(labels[i].size()));
          key += labels[i];
        }
        return key;
      }

      bool compress_;
      Bytes buf_;
      std::unordered_map<std::string, std::uint16_t> table_;
    };

    struct Parsed
    {
      Message msg;
      std::vector<RecordSpan> spans;
    };

    Parsed parse_message(ByteView wire)
    {
      if (wire.size() < 12)
        fail(Errc::truncated, "message shorter than header");
      Reader r(wire);
      Parsed p;
      auto id = r.u16();
      p.msg.header = Header::with_flags(id, r.u16());
      std::uint16_t counts[4];
      for (auto& c : counts)
        c = r.u16();
      for (int i = 0; i < counts[0]; ++i)
      {
        Question q;
        q.qname = r.name(true);
        q.qtype = static_cast<RType>(r.u16());
        q.qclass = r.u16();
        p.msg.question.push_back(std::move(q));
      }
      for (std::size_t s = 0; s < 3; ++s)
      {
        auto section = all_sections[s];
        auto& list = p.msg.section(section);
        for (int i = 0; i < counts[s + 1]; ++i)
        {
          std::size_t start = r.pos();
          Record rec;
          rec.name = r.name(true);
          rec.type = static_cast<RType>(r.u16());
          rec.rclass = r.u16();
          rec.ttl = r.u32();
          std::uint16_t rdlen = r.u16();
          r.need(rdlen);
          rec.rdata = parse_rdata(rec.type, wire, r.pos(), rdlen, true);
          r.bytes(rdlen);
          p.spans.push_back({section, start, r.pos() - start});
          list.push_back(std::move(rec));
        }
      }
      if (r.remaining() != 0)
        fail(
          Errc::count_mismatch,
          std::to_string(r.remaining()) + " bytes beyond the counted sections");
      return p;
    }
  }

  // ---------------------------------------------------------------- RType

  std::string to_string(RType t)
  {
    switch (t)
    {
      case RType::A: return "A";
      case RType::NS: return "NS";
      case RType::SOA: return "SOA";
      case RType::OPT: return "OPT";
      case RType::DS: return "DS";
      case RType::RRSIG: return "RRSIG";
      case RType::DNSKEY: return "DNSKEY";
    }
    return "TYPE" + std::to_string(static_cast<unsigned>(t));
  }

  std::optional<RType> rtype_from_string(std::string_view s)
  {
    std::string u;
    for (char c : s)
      u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    for (auto t :
         {RType::A, RType::NS, RType::SOA, RType::OPT, RType::DS, RType::RRSIG, RType::DNSKEY})
      if (u == to_string(t))
        return t;
    if (u.rfind("TYPE", 0) == 0 && u.size() > 4)
    {
      unsigned v = 0;
      auto [ptr, ec] = std::from_chars(u.data() + 4, u.data() + u.size(), v);
      if (ec == std::errc() && ptr == u.data() + u.size() && v <= 0xFFFF)
        return static_cast<RType>(v);
    }
    return std::nullopt;
  }

  // ----------------------------------------------------------------- Name

  Name::Name(std::vector<std::string> labels) : labels_(std::move(labels))
  {
    std::size_t wire = 1;
    for (const auto& l : labels_)
    {
      if (l.empty())
        fail(Errc::bad_label, "empty label");
      if (l.size() > max_label)
        fail(Errc::label_too_long, "label longer than 63 bytes");
      wire += 1 + l.size();
    }
    if (wire > max_wire)
      fail(Errc::name_too_long, "name exceeds 255 bytes");
  }

  Name Name::parse(std::string_view text)
  {
    if (text.empty() || text == ".")
      return Name();
    std::vector<std::string> labels;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i)
    {
      char c = text[i];
      if (c == '\\')
      {
        if (i + 1 >= text.size())
          fail(Errc::syntax_error, "dangling escape in name");
        if (
          i + 3 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])) &&
          std::isdigit(static_cast<unsigned char>(text[i + 2])) &&
          std::isdigit(static_cast<unsigned char>(text[i + 3])))
        {
          int v = (text[i + 1] - '0') * 100 + (text[i + 2] - '0') * 10 + (text[i + 3] - '0');
          if (v > 255)
            fail(Errc::syntax_error, "escape value above 255");
          cur.push_back(static_cast<char>(v));
          i += 3;
        }
        else
        {
          cur.push_back(text[i + 1]);
          i += 1;
        }
      }
      else if (c == '.')
      {
        if (cur.empty())
          fail(Errc::bad_label, "empty label in '" + std::string(text) + "'");
        labels.push_back(std::move(cur));
        cur.clear();
      }
      else
        cur.push_back(c);
    }
    if (!cur.empty())
      labels.push_back(std::move(cur));
    return Name(std::move(labels));
  }

  Name Name::parse_relative(std::string_view text, const Name& origin)
  {
    if (text == "@")
      return origin;
    bool absolute = !text.empty() && text.back() == '.' &&
      !(text.size() >= 2 && text[text.size() - 2] == '\\');
    Name n = parse(text);
    if (absolute || text == ".")
      return n;
    auto labels = n.labels_;
    labels.insert(labels.end(), origin.labels_.begin(), origin.labels_.end());
    return Name(std::move(labels));
  }

  std::size_t Name::wire_length() const
  {
    std::size_t n = 1;
    for (const auto& l : labels_)
      n += 1 + l.size();
    return n;
  }

  std::string Name::to_string() const
  {
    if (labels_.empty())
      return ".";
    std::string out;
    for (const auto& l : labels_)
    {
      for (unsigned char c : l)
      {
        if (c == '.' || c == '\\' || c == ';' || c == '(' || c == ')' || c == '"')
        {
          out.push_back('\\');
          out.push_back(static_cast<char>(c));
        }
        else if (c < 0x21 || c > 0x7E)
        {
          char buf[5];
          std::snprintf(buf, sizeof buf, "\\%03u", static_cast<unsigned>(c));
          out += buf;
        }
        else
          out.push_back(static_cast<char>(c));
      }
      out.push_back('.');
    }
    return out;
  }

  Name Name::lowercase() const
  {
    Name n;
    n.labels_.reserve(labels_.size());
    for (const auto& l : labels_)
      n.labels_.push_back(lower(l));
    return n;
  }

  bool Name::equals_ci(const Name& other) const
  {
    if (labels_.size() != other.labels_.size())
      return false;
    for (std::size_t i = 0; i < labels_.size(); ++i)
    {
      const auto& a = labels_[i];
      const auto& b = other.labels_[i];
      if (a.size() != b.size())
        return false;
      for (std::size_t j = 0; j < a.size(); ++j)
        if (ascii_lower(a[j]) != ascii_lower(b[j]))
          return false;
    }
    return true;
  }

  bool Name::is_subdomain_of(const Name& parent) const
  {
    if (parent.labels_.size() > labels_.size())
      return false;
    std::size_t skip = labels_.size() - parent.labels_.size();
    std::vector<std::string> tail(labels_.begin() + static_cast<std::ptrdiff_t>(skip), labels_.end());
    Name t;
    t.labels_ = std::move(tail);
    return t.equals_ci(parent);
  }

  Name Name::parent() const
  {
    Name n;
    if (!labels_.empty())
      n.labels_.assign(labels_.begin() + 1, labels_.end());
    return n;
  }

  Name Name::prepend(std::string label) const
  {
    auto labels = labels_;
    labels.insert(labels.begin(), std::move(label));
    return Name(std::move(labels));
  }

  Bytes Name::to_wire() const
  {
    Bytes out;
    put_name(out, *this, false);
    return out;
  }

  Bytes Name::canonical_wire() const
  {
    Bytes out;
    put_name(out, *this, true);
    return out;
  }

  std::size_t NameHashCi::operator()(const Name& n) const
  {
    std::size_t h = 1469598103934665603ull;
    for (const auto& l : n.labels())
    {
      for (char c : l)
        h = (h ^ static_cast<unsigned char>(ascii_lower(c))) * 1099511628211ull;
      h = (h ^ 0x2E) * 1099511628211ull;
    }
    return h;
  }

  // --------------------------------------------------------------- Header

  std::uint16_t Header::pack_flags() const
  {
    return static_cast<std::uint16_t>(
      (qr ? 0x8000 : 0) | (opcode & 0xF) << 11 | (aa ? 0x0400 : 0) | (tc ? 0x0200 : 0) |
      (rd ? 0x0100 : 0) | (ra ? 0x0080 : 0) | (z & 0x7) << 4 | (rcode & 0xF));
  }

  Header Header::with_flags(std::uint16_t id, std::uint16_t f)
  {
    Header h;
    h.id = id;
    h.qr = f & 0x8000;
    h.opcode = static_cast<std::uint8_t>(f >> 11 & 0xF);
    h.aa = f & 0x0400;
    h.tc = f & 0x0200;
    h.rd = f & 0x0100;
    h.ra = f & 0x0080;
    h.z = static_cast<std::uint8_t>(f >> 4 & 0x7);
    h.rcode = static_cast<std::uint8_t>(f & 0xF);
    return h;
  }

  // ---------------------------------------------------------------- RDATA

  ARdata ARdata::parse(std::string_view dotted)
  {
    ARdata a;
    std::size_t i = 0;
    for (int part = 0; part < 4; ++part)
    {
      unsigned v = 0;
      auto [ptr, ec] = std::from_chars(dotted.data() + i, dotted.data() + dotted.size(), v);
      if (ec != std::errc() || v > 255)
        fail(Errc::syntax_error, "bad IPv4 address '" + std::string(dotted) + "'");
      a.address[part] = static_cast<std::uint8_t>(v);
      i = static_cast<std::size_t>(ptr - dotted.data());
      if (part < 3)
      {
        if (i >= dotted.size() || dotted[i] != '.')
          fail(Errc::syntax_error, "bad IPv4 address '" + std::string(dotted) + "'");
        ++i;
      }
    }
    if (i != dotted.size())
      fail(Errc::syntax_error, "bad IPv4 address '" + std::string(dotted) + "'");
    return a;
  }

  std::string ARdata::to_string() const
  {
    return std::to_string(address[0]) + "." + std::to_string(address[1]) + "." +
      std::to_string(address[2]) + "." + std::to_string(address[3]);
  }

  Bytes encode_rdata(const Rdata& rdata, bool canonical)
  {
    Bytes out;
    std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, OpaqueRdata>)
          out = v.data;
        else if constexpr (std::is_same_v<T, ARdata>)
          out.assign(v.address.begin(), v.address.end());
        else if constexpr (std::is_same_v<T, NsRdata>)
          put_name(out, v.host, canonical);
        else if constexpr (std::is_same_v<T, SoaRdata>)
        {
          put_name(out, v.mname, canonical);
          put_name(out, v.rname, canonical);
          put32(out, v.serial);
          put32(out, v.refresh);
          put32(out, v.retry);
          put32(out, v.expire);
          put32(out, v.minimum);
        }
        else if constexpr (std::is_same_v<T, DsRdata>)
        {
          put16(out, v.key_tag);
          out.push_back(v.algorithm);
          out.push_back(v.digest_type);
          out.insert(out.end(), v.digest.begin(), v.digest.end());
        }
        else if constexpr (std::is_same_v<T, RrsigRdata>)
        {
          put16(out, static_cast<std::uint16_t>(v.type_covered));
          out.push_back(v.algorithm);
          out.push_back(v.labels);
          put32(out, v.original_ttl);
          put32(out, v.expiration);
          put32(out, v.inception);
          put16(out, v.key_tag);
          put_name(out, v.signer, canonical);
          out.insert(out.end(), v.signature.begin(), v.signature.end());
        }
        else if constexpr (std::is_same_v<T, DnskeyRdata>)
        {
          put16(out, v.flags);
          out.push_back(v.protocol);
          out.push_back(v.algorithm);
          out.insert(out.end(), v.public_key.begin(), v.public_key.end());
        }
      },
      rdata);
    return out;
  }

  Rdata decode_rdata(RType type, ByteView bytes)
  {
    return parse_rdata(type, bytes, 0, bytes.size(), false);
  }

  // --------------------------------------------------------------- Record

  Bytes Record::to_wire() const
  {
    Bytes out;
    put_name(out, name, false);
    put16(out, static_cast<std::uint16_t>(type));
    put16(out, rclass);
    put32(out, ttl);
    auto rd = encode_rdata(rdata);
    if (rd.size() > 0xFFFF)
      fail(Errc::rdata_too_long, "RDATA of " + std::to_string(rd.size()) + " bytes");
    put16(out, static_cast<std::uint16_t>(rd.size()));
    out.insert(out.end(), rd.begin(), rd.end());
    return out;
  }

  bool operator==(const Record& a, const Record& b)
  {
    return a.name == b.name && a.type == b.type && a.rclass == b.rclass && a.ttl == b.ttl &&
      encode_rdata(a.rdata) == encode_rdata(b.rdata);
  }

  const RrsigRdata* rrsig_covering(const Record& r, RType covered)
  {
    if (r.type != RType::RRSIG)
      return nullptr;
    const auto* sig = r.as<RrsigRdata>();
    return sig && sig->type_covered == covered ? sig : nullptr;
  }

  Record decode_standalone_record(ByteView bytes, std::size_t& offset)
  {
    Reader r(bytes, offset);
    Record rec;
    rec.name = r.name(false);
    rec.type = static_cast<RType>(r.u16());
    rec.rclass = r.u16();
    rec.ttl = r.u32();
    std::uint16_t rdlen = r.u16();
    r.need(rdlen);
    rec.rdata = parse_rdata(rec.type, bytes, r.pos(), rdlen, false);
    r.bytes(rdlen);
    offset = r.pos();
    return rec;
  }

  // -------------------------------------------------------------- Message

  std::vector<Record>& Message::section(Section s)
  {
    switch (s)
    {
      case Section::answer: return answer;
      case Section::authority: return authority;
      case Section::additional: break;
    }
    return additional;
  }

  const std::vector<Record>& Message::section(Section s) const
  {
    return const_cast<Message*>(this)->section(s);
  }

  const Record* Message::opt() const
  {
    for (const auto& r : additional)
      if (r.type == RType::OPT)
        return &r;
    return nullptr;
  }

  std::optional<std::uint16_t> Message::udp_payload_size() const
  {
    const auto* o = opt();
    if (!o)
      return std::nullopt;
    return std::max<std::uint16_t>(o->rclass, 512);
  }

  Record make_opt(std::uint16_t udp_size)
  {
    Record r;
    r.type = RType::OPT;
    r.rclass = std::max<std::uint16_t>(udp_size, 512);
    r.ttl = 0;
    r.rdata = OpaqueRdata{};
    return r;
  }

  Bytes encode_message(const Message& msg, bool compress)
  {
    auto count = [](std::size_t n) {
      if (n > 0xFFFF)
        fail(Errc::count_mismatch, "section holds more than 65535 entries");
      return static_cast<std::uint16_t>(n);
    };
    Writer w(compress);
    auto& out = w.out();
    put16(out, msg.header.id);
    put16(out, msg.header.pack_flags());
    put16(out, count(msg.question.size()));
    put16(out, count(msg.answer.size()));
    put16(out, count(msg.authority.size()));
    put16(out, count(msg.additional.size()));
    for (const auto& q : msg.question)
    {
      w.name(q.qname, true);
      put16(out, static_cast<std::uint16_t>(q.qtype));
      put16(out, q.qclass);
    }
    for (auto s : all_sections)
      for (const auto& r : msg.section(s))
        w.record(r);
    return std::move(out);
  }

  Message decode_message(ByteView wire)
  {
    return parse_message(wire).msg;
  }

  std::vector<RecordSpan> record_spans(ByteView wire)
  {
    return parse_message(wire).spans;
  }

  // --------------------------------------------------------------- z bits

  std::uint8_t z_value_for_algorithm(std::optional<std::uint8_t> algorithm)
  {
    if (!algorithm)
      return 0;
    switch (*algorithm)
    {
      case alg::falcon512: return 1;
      case alg::dilithium2: return 2;
      case alg::sphincs_sha256_128s: return 3;
      default:
        fail(
          Errc::unknown_algorithm,
          "algorithm " + std::to_string(*algorithm) + " has no z-bit encoding");
    }
  }

  std::optional<std::uint8_t> algorithm_for_z_value(std::uint8_t z)
  {
    switch (z)
    {
      case 1: return alg::falcon512;
      case 2: return alg::dilithium2;
      case 3: return alg::sphincs_sha256_128s;
      default: return std::nullopt;
    }
  }

  Header set_z_signal(Header h, std::optional<std::uint8_t> algorithm)
  {
    h.z = z_value_for_algorithm(algorithm);
    return h;
  }

  // --------------------------------------------------------- presentation

  std::string rdata_to_string(const Record& r)
  {
    return std::visit(
      [&](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ARdata>)
          return v.to_string();
        else if constexpr (std::is_same_v<T, NsRdata>)
          return v.host.to_string();
        else if constexpr (std::is_same_v<T, SoaRdata>)
          return v.mname.to_string() + " " + v.rname.to_string() + " " +
            std::to_string(v.serial) + " " + std::to_string(v.refresh) + " " +
            std::to_string(v.retry) + " " + std::to_string(v.expire) + " " +
            std::to_string(v.minimum);
        else if constexpr (std::is_same_v<T, DsRdata>)
          return std::to_string(v.key_tag) + " " + std::to_string(v.algorithm) + " " +
            std::to_string(v.digest_type) + " " + to_hex(v.digest);
        else if constexpr (std::is_same_v<T, RrsigRdata>)
          return to_string(v.type_covered) + " " + std::to_string(v.algorithm) + " " +
            std::to_string(v.labels) + " " + std::to_string(v.original_ttl) + " " +
            std::to_string(v.expiration) + " " + std::to_string(v.inception) + " " +
            std::to_string(v.key_tag) + " " + v.signer.to_string() + " " +
            to_base64(v.signature);
        else if constexpr (std::is_same_v<T, DnskeyRdata>)
          return std::to_string(v.flags) + " " + std::to_string(v.protocol) + " " +
            std::to_string(v.algorithm) + " " + to_base64(v.public_key);
        else
          return "\\# " + std::to_string(v.data.size()) +
            (v.data.empty() ? "" : " " + to_hex(v.data));
      },
      r.rdata);
  }

  std::string to_string(const Record& r)
  {
    std::string cls = r.rclass == class_in ? "IN" : "CLASS" + std::to_string(r.rclass);
    return r.name.to_string() + " " + std::to_string(r.ttl) + " " + cls + " " +
      to_string(r.type) + " " + rdata_to_string(r);
  }
}
