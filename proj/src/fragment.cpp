#include "pqdns/fragment.hpp"

#include <algorithm>
#include <charconv>

namespace pqdns
{
  namespace
  {
    std::optional<std::uint8_t> signature_algorithm(const Record& r)
    {
      if (r.type == RType::RRSIG)
        if (const auto* s = r.as<RrsigRdata>())
          return s->algorithm;
      if (r.type == RType::DNSKEY)
        if (const auto* k = r.as<DnskeyRdata>())
          return k->algorithm;
      return std::nullopt;
    }

    std::optional<SigClass> record_class(const Record& r, const SuiteRegistry& registry)
    {
      auto a = signature_algorithm(r);
      return a ? registry.class_of(*a) : std::nullopt;
    }

    /// Signature or key bytes of an RRSIG/DNSKEY record.
    Bytes& body_of(Record& r)
    {
      if (auto* s = r.as<RrsigRdata>())
        return s->signature;
      return r.as<DnskeyRdata>()->public_key;
    }

    struct Slot
    {
      Section section;
      std::size_t index;
    };
  }

  void FragmentConfig::validate() const
  {
    if (threshold < 512 || threshold > 65535)
      fail(Errc::out_of_range, "threshold must lie in [512, 65535]");
    if (cache_cap == 0)
      fail(Errc::out_of_range, "fragment cache capacity must be positive");
  }

  std::uint32_t encode_ttl(std::size_t index, std::uint32_t ttl)
  {
    if (index > 0xFF)
      fail(Errc::out_of_range, "more than 256 records in one section");
    if (ttl > 0xFFFFFF)
      fail(Errc::ttl_too_large, "TTL " + std::to_string(ttl) + " needs more than 24 bits");
    return static_cast<std::uint32_t>(index) << 24 | ttl;
  }

  std::pair<std::size_t, std::uint32_t> decode_ttl(std::uint32_t encoded)
  {
    return {encoded >> 24, encoded & 0xFFFFFF};
  }

  bool is_post_quantum_record(const Record& r, const SuiteRegistry& registry)
  {
    return record_class(r, registry) == SigClass::post_quantum;
  }

  std::size_t pre_quantum_portion(const Message& msg, const SuiteRegistry& registry)
  {
    Message m = msg;
    for (auto s : all_sections)
    {
      auto& v = m.section(s);
      v.erase(
        std::remove_if(v.begin(), v.end(), [&](const Record& r) { return is_post_quantum_record(r, registry); }),
        v.end());
    }
    return encode_message(m).size();
  }

  bool is_pre_quantum_record(const Record& r, const SuiteRegistry& registry)
  {
    return record_class(r, registry) == SigClass::pre_quantum;
  }

  // ------------------------------------------------------------ qnames

  Name fragment_qname(const Name& base, std::size_t n)
  {
    if (n < 2)
      fail(Errc::out_of_range, "fragment numbers start at 2");
    std::string tag = "?" + std::to_string(n) + "?";
    auto labels = base.labels();
    if (labels.empty() || tag.size() + labels.front().size() > Name::max_label)
      labels.insert(labels.begin(), tag);
    else
      labels.front() = tag + labels.front();
    return Name(std::move(labels));
  }

  std::optional<std::pair<std::size_t, Name>> parse_fragment_qname(const Name& qname)
  {
    if (qname.is_root())
      return std::nullopt;
    const auto& first = qname.labels().front();
    if (first.size() < 3 || first[0] != '?')
      return std::nullopt;
    auto close = first.find('?', 1);
    if (close == std::string::npos || close == 1 || close > 6)
      return std::nullopt;
    std::string_view digits(first.data() + 1, close - 1);
    if (digits[0] == '0')
      return std::nullopt;
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || p != digits.data() + digits.size() || n < 2)
      return std::nullopt;

    std::vector<std::string> labels(qname.labels().begin() + 1, qname.labels().end());
    auto rest = first.substr(close + 1);
    if (!rest.empty())
      labels.insert(labels.begin(), rest);
    return std::make_pair(n, Name(std::move(labels)));
  }

  // ----------------------------------------------------------- packing

  std::size_t continuation_capacity(
    const Name& base, RType qtype, std::size_t n, std::size_t threshold)
  {
    Message skeleton;
    skeleton.header.qr = true;
    auto qname = fragment_qname(base, n);
    skeleton.question.push_back({qname, qtype, class_in});
    Record frame;
    frame.name = qname;
    frame.type = qtype;
    frame.ttl = static_cast<std::uint32_t>(n);
    frame.rdata = OpaqueRdata{};
    skeleton.answer.push_back(std::move(frame));
    skeleton.additional.push_back(make_opt(65535));
    auto overhead = encode_message(skeleton).size();
    if (overhead >= threshold)
      fail(Errc::continuation_overflow, "continuation framing alone exceeds the threshold");
    return std::min<std::size_t>(threshold - overhead, 0xFFFF);
  }

  std::vector<Slice> pack_stream(
    std::size_t stream_len, const Name& base, RType qtype, std::size_t threshold)
  {
    std::vector<Slice> out;
    std::size_t offset = 0;
    for (std::size_t n = 2; offset < stream_len; ++n)
    {
      if (n > 0xFFFF)
        fail(Errc::continuation_overflow, "stream needs too many fragments");
      auto take = std::min(continuation_capacity(base, qtype, n, threshold), stream_len - offset);
      out.push_back({offset, take});
      offset += take;
    }
    return out;
  }

  // ---------------------------------------------------------- planning

  ByteView FragmentPlan::slice(std::size_t n) const
  {
    if (n < 2 || n > n_fragments())
      fail(Errc::out_of_range, "fragment " + std::to_string(n) + " outside 2.." + std::to_string(n_fragments()));
    const auto& s = slices[n - 2];
    return ByteView(stream.data() + s.offset, s.length);
  }

  std::optional<FragmentPlan> plan_fragments(
    const Message& original,
    const FragmentConfig& cfg,
    const SuiteRegistry& registry,
    std::optional<std::size_t> threshold_override)
  {
    cfg.validate();
    std::size_t threshold = threshold_override.value_or(cfg.threshold);
    if (threshold < 512 || threshold > 65535)
      fail(Errc::out_of_range, "threshold must lie in [512, 65535]");
    if (encode_message(original).size() <= threshold)
      return std::nullopt;
    if (original.header.tc || original.header.z != 0)
      fail(Errc::out_of_range, "only complete responses (TC=0, z=0) can be fragmented");
    if (original.question.size() != 1)
      fail(Errc::out_of_range, "fragmentation needs exactly one question");
    for (std::size_t i = 0; i < original.additional.size(); ++i)
      if (original.additional[i].type == RType::OPT && i + 1 != original.additional.size())
        fail(Errc::out_of_range, "OPT must be the last additional record");
    for (auto s : {Section::answer, Section::authority})
      for (const auto& r : original.section(s))
        if (r.type == RType::OPT)
          fail(Errc::out_of_range, "OPT outside the additional section");

    // Original with position-encoded TTLs; OPT keeps its TTL (EDNS flags).
    Message enc = original;
    for (auto s : all_sections)
    {
      auto& sec = enc.section(s);
      for (std::size_t i = 0; i < sec.size(); ++i)
        if (sec[i].type != RType::OPT)
          sec[i].ttl = encode_ttl(i, sec[i].ttl);
    }

    std::vector<Slot> pq;
    std::vector<std::vector<bool>> keep(3);
    for (auto s : all_sections)
    {
      const auto& sec = enc.section(s);
      keep[static_cast<int>(s)].resize(sec.size());
      for (std::size_t i = 0; i < sec.size(); ++i)
      {
        bool is_pq = is_post_quantum_record(sec[i], registry);
        keep[static_cast<int>(s)][i] = !is_pq;
        if (is_pq)
          pq.push_back({s, i});
      }
    }

    std::optional<std::pair<Slot, Record>> partial;
    auto assemble = [&] {
      Message m;
      m.header = enc.header;
      m.header.tc = true;
      m.question = enc.question;
      for (auto s : all_sections)
      {
        const auto& src = enc.section(s);
        auto& dst = m.section(s);
        for (std::size_t i = 0; i < src.size(); ++i)
        {
          if (partial && partial->first.section == s && partial->first.index == i)
            dst.push_back(partial->second);
          else if (keep[static_cast<int>(s)][i])
            dst.push_back(src[i]);
        }
      }
      return m;
    };

    if (encode_message(assemble()).size() > threshold)
      fail(
        Errc::first_fragment_overflow,
        "pre-quantum material alone exceeds the " + std::to_string(threshold) + "-byte threshold");

    FragmentPlan plan;
    plan.original = original;
    plan.threshold = threshold;

    std::size_t cut = pq.size();
    for (std::size_t k = 0; k < pq.size(); ++k)
    {
      auto [s, i] = pq[k];
      keep[static_cast<int>(s)][i] = true;
      if (encode_message(assemble()).size() <= threshold)
        continue;
      keep[static_cast<int>(s)][i] = false;
      cut = k;

      Record trimmed = enc.section(s)[i];
      Bytes body = body_of(trimmed);
      body_of(trimmed).clear();
      partial = std::make_pair(Slot{s, i}, trimmed);
      auto base = encode_message(assemble()).size();
      std::size_t avail = base < threshold ? threshold - base : 0;
      if (avail >= cfg.min_useful_slice && avail < body.size())
      {
        body_of(partial->second).assign(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(avail));
        plan.split = SplitInfo{s, i, avail, body.size() - avail};
        plan.stream.assign(body.begin() + static_cast<std::ptrdiff_t>(avail), body.end());
        ++cut;
      }
      else
      {
        partial.reset();
        plan.signalled_algorithm = signature_algorithm(enc.section(s)[i]);
      }
      break;
    }

    for (std::size_t k = cut; k < pq.size(); ++k)
    {
      auto wire = enc.section(pq[k].section)[pq[k].index].to_wire();
      plan.stream.insert(plan.stream.end(), wire.begin(), wire.end());
    }

    plan.first = assemble();
    plan.first.header = set_z_signal(plan.first.header, plan.signalled_algorithm);
    plan.slices = pack_stream(
      plan.stream.size(), original.question[0].qname, original.question[0].qtype, threshold);
    return plan;
  }

  Message build_continuation(const FragmentPlan& plan, std::size_t n, const Message& frag_query)
  {
    auto bytes = plan.slice(n);
    if (frag_query.question.size() != 1)
      fail(Errc::out_of_range, "fragment query needs exactly one question");
    Message m;
    m.header.id = frag_query.header.id;
    m.header.qr = true;
    m.header.aa = plan.original.header.aa;
    m.header.rd = frag_query.header.rd;
    m.question = frag_query.question;
    Record r;
    r.name = frag_query.question[0].qname;
    r.type = plan.original.question[0].qtype;
    r.rclass = class_in;
    r.ttl = static_cast<std::uint32_t>(n);
    r.rdata = OpaqueRdata{Bytes(bytes.begin(), bytes.end())};
    m.answer.push_back(std::move(r));
    const auto* opt = plan.original.opt();
    m.additional.push_back(opt ? *opt : make_opt(65535));
    return m;
  }

  // ------------------------------------------------------------- cache

  FragmentCacheKey::FragmentCacheKey(
    std::string client_, const Name& qname_, RType qtype_, std::uint16_t qclass_) :
    client(std::move(client_)),
    qname(qname_.lowercase()),
    qtype(qtype_),
    qclass(qclass_)
  {}

  std::size_t FragmentCacheKeyHash::operator()(const FragmentCacheKey& k) const
  {
    std::size_t h = std::hash<std::string>{}(k.client);
    h ^= NameHashCi{}(k.qname) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= (static_cast<std::size_t>(k.qtype) << 16 | k.qclass) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
  }

  FragmentCache::FragmentCache(FragmentConfig cfg) : cfg_(cfg)
  {
    cfg_.validate();
  }

  FragmentCache::PlanPtr FragmentCache::lookup_locked(const FragmentCacheKey& key, double now)
  {
    auto it = index_.find(key);
    if (it == index_.end())
      return nullptr;
    if (now - it->second->created >= cfg_.cache_ttl)
    {
      lru_.erase(it->second);
      index_.erase(it);
      return nullptr;
    }
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->plan;
  }

  void FragmentCache::put_locked(const FragmentCacheKey& key, PlanPtr plan, double now)
  {
    if (auto it = index_.find(key); it != index_.end())
    {
      it->second->plan = std::move(plan);
      it->second->created = now;
      lru_.splice(lru_.begin(), lru_, it->second);
      return;
    }
    lru_.push_front({key, std::move(plan), now});
    index_.emplace(key, lru_.begin());
    while (lru_.size() > cfg_.cache_cap)
    {
      index_.erase(lru_.back().key);
      lru_.pop_back();
      ++evictions_;
    }
  }

  void FragmentCache::put(const FragmentCacheKey& key, PlanPtr plan, double now)
  {
    std::lock_guard lock(mutex_);
    put_locked(key, std::move(plan), now);
  }

  FragmentCache::PlanPtr FragmentCache::get(const FragmentCacheKey& key, double now)
  {
    std::lock_guard lock(mutex_);
    return lookup_locked(key, now);
  }

  std::optional<Message> FragmentCache::get(
    const FragmentCacheKey& key, std::size_t n, const Message& frag_query, double now)
  {
    auto plan = get(key, now);
    if (!plan || n < 2 || n > plan->n_fragments())
      return std::nullopt;
    return build_continuation(*plan, n, frag_query);
  }

  FragmentCache::PlanPtr FragmentCache::get_or_build(
    const FragmentCacheKey& key, double now, const std::function<PlanPtr()>& build)
  {
    std::unique_lock lock(mutex_);
    for (;;)
    {
      if (auto p = lookup_locked(key, now))
        return p;
      if (!building_.contains(key))
        break;
      built_.wait(lock);
    }
    building_.insert(key);
    lock.unlock();

    PlanPtr plan;
    try
    {
      plan = build();
    }
    catch (...)
    {
      lock.lock();
      building_.erase(key);
      built_.notify_all();
      throw;
    }
    lock.lock();
    building_.erase(key);
    if (plan)
      put_locked(key, plan, now);
    built_.notify_all();
    return plan;
  }

  std::size_t FragmentCache::size() const
  {
    std::lock_guard lock(mutex_);
    return lru_.size();
  }

  std::uint64_t FragmentCache::evictions() const
  {
    std::lock_guard lock(mutex_);
    return evictions_;
  }
}
