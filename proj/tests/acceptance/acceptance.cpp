// Acceptance gate: one line per criterion, exit status 0 iff the failing
// set equals the --expect-fail list.

#include "../oracles/keytag_oracle.hpp"
#include "../support/generators.hpp"
#include "../support/world.hpp"

#include "pqdns/fragment.hpp"
#include "pqdns/net.hpp"
#include "pqdns/reassembly.hpp"
#include "pqdns/resolver.hpp"
#include "pqdns/server.hpp"
#include "pqdns/simnet.hpp"
#include "pqdns/testbed.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

using namespace pqdns;
using pqdns::testing::Rng;

namespace
{
  struct Outcome
  {
    bool pass = false;
    std::string detail;
  };

  double seconds_since(std::chrono::steady_clock::time_point t0)
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  std::string fmt(const char* f, double v)
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
  }

  Message reference_response(const SuiteRegistry& reg, const Zone& child, RType qtype)
  {
    NameServer auth(ServerConfig{ServerRole::authoritative, {child}, {}, 65535}, reg);
    auto qname = qtype == RType::DNSKEY ? fixture::child_origin() : fixture::query_names().front();
    return auth.respond(make_query(qname, qtype, 1, 1232));
  }

  bool within(double value, double target, double tol)
  {
    return std::abs(value - target) <= tol * target;
  }

  // ------------------------------------------------------------------ 1

  Outcome codec_roundtrip()
  {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(1);
    int failures = 0;
    const int n = 2000;
    std::size_t compressed = 0;
    for (int i = 0; i < n; ++i)
    {
      auto m = testing::random_message(rng);
      auto wire = encode_message(m);
      compressed += wire.size() < encode_message(m, false).size();
      try
      {
        if (!(decode_message(view(wire)) == m))
          ++failures;
      }
      catch (const Error&)
      {
        ++failures;
      }
    }
    double t = seconds_since(t0);
    return {failures == 0 && t < 5.0,
            std::to_string(n) + " messages, " + std::to_string(compressed) + " compressed, " +
              std::to_string(failures) + " failures, " + fmt("%.2f s", t)};
  }

  // ------------------------------------------------------------------ 2, 3

  struct FragmentCorpus
  {
    int reference_cases = 0;
    int random_zones = 0;
    int random_cases = 0;
    int unfragmented = 0;
    int overflow_skipped = 0;
    int identity_failures = 0;
    int forecast_mismatches = 0;
    double seconds = 0;
    std::vector<std::string> notes;
  };

  /// Plans, forecasts and reassembles one response. Returns false when the
  /// response fits without fragmentation.
  bool check_case(
    const Message& full, const SuiteRegistry& reg, std::size_t threshold, FragmentCorpus& out, const std::string& label)
  {
    FragmentConfig cfg;
    auto plan = plan_fragments(full, cfg, reg, threshold);
    if (!plan)
      return false;
    try
    {
      auto m = reassemble_plan(*plan, reg, cfg);
      if (encode_message(m) != encode_message(full))
      {
        ++out.identity_failures;
        out.notes.push_back("identity: " + label);
      }
    }
    catch (const Error& e)
    {
      ++out.identity_failures;
      out.notes.push_back("identity: " + label + ": " + e.what());
    }
    try
    {
      FragmentConfig fcfg;
      fcfg.threshold = plan->threshold;
      auto first = decode_message(view(encode_message(plan->first)));
      auto fc = forecast(first, reg, fcfg);
      if (fc.n_fragments != plan->n_fragments() || fc.stream_len != plan->stream.size())
      {
        ++out.forecast_mismatches;
        out.notes.push_back("forecast: " + label);
      }
    }
    catch (const Error& e)
    {
      ++out.forecast_mismatches;
      out.notes.push_back("forecast: " + label + ": " + e.what());
    }
    return true;
  }

  FragmentCorpus fragment_corpus()
  {
    auto t0 = std::chrono::steady_clock::now();
    FragmentCorpus out;

    const auto& standard = SuiteRegistry::standard();
    for (const auto& combo : all_combos())
    {
      auto tb = make_testbed(standard, combo);
      for (auto qtype : {RType::A, RType::DNSKEY})
      {
        auto full = reference_response(standard, tb.child, qtype);
        if (check_case(full, standard, 1232, out, combo.name() + "/" + to_string(qtype)))
          ++out.reference_cases;
      }
    }

    const auto& mock = SuiteRegistry::mock();
    testing::KeyPool pool(mock);
    Rng rng(2024);
    while (out.random_zones < 1200 || out.random_cases < 1000)
    {
      auto rz = testing::random_signed_zone(rng, mock, pool, fixture::epoch);
      ++out.random_zones;
      NameServer server(ServerConfig{ServerRole::authoritative, {rz.zone}, {}, 65535}, mock);
      for (const auto& q : rz.questions)
      {
        auto query = make_query(q.qname, q.qtype, static_cast<std::uint16_t>(rng()), 1232);
        if (testing::pick(rng, 2))
          query.additional.back().ttl |= opt_do_bit;
        auto full = server.respond(query);
        std::size_t threshold = testing::pick(rng, 2) ? 1232 : 900 + testing::pick(rng, 333);
        auto label = rz.combo.name() + " " + q.qname.to_string() + " " + to_string(q.qtype) + " @" +
          std::to_string(threshold);
        try
        {
          if (check_case(full, mock, threshold, out, label))
            ++out.random_cases;
          else
            ++out.unfragmented;
        }
        catch (const Error& e)
        {
          if (e.code() != Errc::first_fragment_overflow)
            throw;
          ++out.overflow_skipped;
        }
      }
    }
    out.seconds = seconds_since(t0);
    return out;
  }

  Outcome fragmentation_identity(const FragmentCorpus& c)
  {
    std::string detail = std::to_string(c.reference_cases) + " reference + " + std::to_string(c.random_cases) +
      " random fragmented responses from " + std::to_string(c.random_zones) + " zones (" +
      std::to_string(c.unfragmented) + " fit, " + std::to_string(c.overflow_skipped) +
      " below the first-fragment minimum), " + std::to_string(c.identity_failures) + " failures, " +
      fmt("%.2f s", c.seconds);
    for (std::size_t i = 0; i < c.notes.size() && i < 3; ++i)
      detail += "; " + c.notes[i];
    return {c.identity_failures == 0 && c.reference_cases == 18 && c.random_cases >= 1000 && c.seconds < 30.0,
            detail};
  }

  Outcome forecast_equivalence(const FragmentCorpus& c)
  {
    return {c.forecast_mismatches == 0 && c.reference_cases == 18 && c.random_cases >= 1000,
            std::to_string(c.reference_cases + c.random_cases) + " forecasts, " +
              std::to_string(c.forecast_mismatches) + " mismatches"};
  }

  // ------------------------------------------------------------------ 4

  Outcome table_counts()
  {
    const auto& reg = SuiteRegistry::mock();
    struct Row
    {
      const char* name;
      std::size_t a, dnskey;
    };
    const std::vector<Row> expected{
      {"FALCON", 2, 3}, {"FALCON+ECDSA", 3, 4}, {"FALCON+RSA", 3, 4},
      {"DILITHIUM", 7, 7}, {"DILITHIUM+ECDSA", 8, 8}, {"DILITHIUM+RSA", 8, 8},
      {"SPHINCS", 23, 15}, {"SPHINCS+ECDSA", 23, 15}, {"SPHINCS+RSA", 23, 15},
    };
    std::map<std::string, std::pair<std::size_t, std::size_t>> got;
    bool counts_ok = true;
    std::ostringstream table;
    for (const auto& row : expected)
    {
      auto combo = Combo::parse(row.name, reg);
      auto a = count_fragments(reg, combo, RType::A);
      auto k = count_fragments(reg, combo, RType::DNSKEY);
      got[row.name] = {a, k};
      auto near = [](std::size_t x, std::size_t y) { return (x > y ? x - y : y - x) <= 2; };
      counts_ok = counts_ok && near(a, row.a) && near(k, row.dnskey);
      table << row.name << ' ' << a << '/' << k << ' ';
    }

    bool law_ok = true;
    std::ostringstream law;
    for (std::string family : {"FALCON", "DILITHIUM", "SPHINCS"})
    {
      long want = family == "SPHINCS" ? 0 : 1;
      for (std::string cls : {"+ECDSA", "+RSA"})
      {
        auto single = got[family];
        auto dual = got[family + cls];
        long da = static_cast<long>(dual.first) - static_cast<long>(single.first);
        long dk = static_cast<long>(dual.second) - static_cast<long>(single.second);
        if (da != want || dk != want)
        {
          law_ok = false;
          law << family + cls << " delta " << da << '/' << dk << " (want " << want << ") ";
        }
      }
    }
    std::string detail = table.str() + (counts_ok ? "[counts within 2] " : "[counts off] ") +
      (law_ok ? "[delta law holds]" : "[delta law violated: " + law.str() + "]");
    return {counts_ok && law_ok, detail};
  }

  // ------------------------------------------------------------------ 5

  Outcome size_calibration()
  {
    const auto& reg = SuiteRegistry::mock();
    auto rsa = make_testbed(reg, Combo{alg::rsasha256, alg::falcon512});
    auto dnskey = reference_response(reg, rsa.child, RType::DNSKEY);
    auto total = encode_message(dnskey).size();
    auto pre = pre_quantum_portion(dnskey, reg);
    auto ecdsa = make_testbed(reg, Combo{alg::ecdsap256sha256, alg::falcon512});
    auto a = encode_message(reference_response(reg, ecdsa.child, RType::A)).size();
    bool ok = within(double(total), 4462, 0.10) && within(double(pre), 1178, 0.10) && within(double(a), 2500, 0.10);
    return {ok, "RSA+FALCON DNSKEY " + std::to_string(total) + " B (4462), pre-quantum portion " + std::to_string(pre) +
                  " B (1178), ECDSA+FALCON A " + std::to_string(a) + " B (2500), tolerance 10%"};
  }

  // ------------------------------------------------------------------ 6

  struct Target
  {
    bool in_root;
    std::size_t index;
    std::string label;
  };

  Outcome dual_verification()
  {
    auto t0 = std::chrono::steady_clock::now();
    const auto& reg = SuiteRegistry::standard();
    const auto base = make_testbed(reg, Combo{alg::ecdsap256sha256, alg::falcon512});
    const auto owner = fixture::query_names().front();
    const auto origin = fixture::child_origin();

    auto run = [&](const Testbed& tb) {
      testing::World w(reg, tb);
      return w.ask(reg, owner, RType::A);
    };

    auto clean = run(base);
    bool baseline_ok = clean.message.header.rcode == rcode::noerror && clean.authenticated &&
      !clean.message.answer.empty() && clean.message.answer[0].as<ARdata>() &&
      clean.message.answer[0].as<ARdata>()->to_string() == "10.9.9.10";

    std::vector<Target> targets;
    for (std::size_t i = 0; i < base.child.records.size(); ++i)
    {
      const auto& r = base.child.records[i];
      if (r.name.equals_ci(owner) && r.type == RType::A)
        targets.push_back({false, i, "A"});
      if (r.name.equals_ci(owner) && rrsig_covering(r, RType::A))
        targets.push_back({false, i, "RRSIG/" + std::to_string(r.as<RrsigRdata>()->algorithm)});
      if (r.type == RType::DNSKEY)
        targets.push_back({false, i, "child DNSKEY"});
    }
    for (std::size_t i = 0; i < base.root.records.size(); ++i)
    {
      const auto& r = base.root.records[i];
      if (r.type == RType::DNSKEY)
        targets.push_back({true, i, "root DNSKEY"});
      if (r.type == RType::DS && r.name.equals_ci(origin))
        targets.push_back({true, i, "DS"});
    }

    std::size_t runs = 0, escaped = 0, positions = 0;
    std::string first_escape;
    for (const auto& t : targets)
    {
      const auto& rec = (t.in_root ? base.root : base.child).records[t.index];
      auto bytes = encode_rdata(rec.rdata);
      positions += bytes.size();
      for (std::size_t pos = 0; pos < bytes.size(); ++pos)
        for (std::uint8_t mask : {std::uint8_t{0x01}, std::uint8_t{0x80}})
        {
          auto tb = base;
          auto flipped = bytes;
          flipped[pos] ^= mask;
          (t.in_root ? tb.root : tb.child).records[t.index].rdata = decode_rdata(rec.type, view(flipped));
          auto r = run(tb);
          ++runs;
          if (r.message.header.rcode != rcode::servfail)
          {
            ++escaped;
            if (first_escape.empty())
              first_escape = t.label + " byte " + std::to_string(pos);
          }
        }
    }

    auto stripped = base;
    auto& recs = stripped.child.records;
    std::erase_if(recs, [&](const Record& r) {
      const auto* s = rrsig_covering(r, RType::A);
      return s && r.name.equals_ci(owner) && s->algorithm == alg::falcon512;
    });
    bool removal_ok = run(stripped).message.header.rcode == rcode::servfail;

    double t = seconds_since(t0);
    std::string detail = std::to_string(targets.size()) + " records, " + std::to_string(positions) + " positions, " +
      std::to_string(runs) + " corrupted resolutions, " + std::to_string(escaped) + " not SERVFAIL" +
      (first_escape.empty() ? "" : " (first: " + first_escape + ")") + "; post-quantum RRSIG removal " +
      (removal_ok ? "SERVFAIL" : "ACCEPTED") + "; clean baseline " + (baseline_ok ? "secure" : "FAILED") + ", " +
      fmt("%.1f s", t);
    return {escaped == 0 && removal_ok && baseline_ok && runs > 0 && t < 60.0, detail};
  }

  // ------------------------------------------------------------------ 7

  Outcome timing_properties()
  {
    auto t0 = std::chrono::steady_clock::now();
    const auto& reg = SuiteRegistry::mock();
    BenchOptions opts;
    opts.dnskey = false;
    auto first = run_benchmark(reg, all_combos(), opts);
    auto second = run_benchmark(reg, all_combos(), opts);
    bool deterministic = first.size() == second.size();
    for (std::size_t i = 0; deterministic && i < first.size(); ++i)
      deterministic = first[i].times == second[i].times;

    std::map<std::string, double> mean;
    for (const auto& r : first)
      mean[r.combo.name()] = r.mean;

    bool a = true, b = true, c = true;
    double worst = 0;
    for (std::string f : {"FALCON", "DILITHIUM", "SPHINCS"})
      for (std::string cls : {"+ECDSA", "+RSA"})
      {
        double ratio = mean[f + cls] / mean[f];
        worst = std::max(worst, ratio);
        a = a && ratio <= 1.15;
      }
    for (std::string col : {"", "+ECDSA", "+RSA"})
      b = b && mean["FALCON" + col] < mean["DILITHIUM" + col] && mean["DILITHIUM" + col] < mean["SPHINCS" + col];
    for (std::string f : {"FALCON", "DILITHIUM"})
      for (std::string cls : {"+ECDSA", "+RSA"})
        c = c && mean[f + cls] < mean["SPHINCS"];

    double t = seconds_since(t0);
    std::string detail = "means ms FALCON " + fmt("%.2f", mean["FALCON"] * 1e3) + "/" +
      fmt("%.2f", mean["FALCON+ECDSA"] * 1e3) + "/" + fmt("%.2f", mean["FALCON+RSA"] * 1e3) + " DILITHIUM " +
      fmt("%.2f", mean["DILITHIUM"] * 1e3) + "/" + fmt("%.2f", mean["DILITHIUM+ECDSA"] * 1e3) + "/" +
      fmt("%.2f", mean["DILITHIUM+RSA"] * 1e3) + " SPHINCS " + fmt("%.2f", mean["SPHINCS"] * 1e3) + "/" +
      fmt("%.2f", mean["SPHINCS+ECDSA"] * 1e3) + "/" + fmt("%.2f", mean["SPHINCS+RSA"] * 1e3) + "; (a) max ratio " +
      fmt("%.4f", worst) + (a ? " ok" : " FAIL") + ", (b) ordering" + (b ? " ok" : " FAIL") + ", (c)" +
      (c ? " ok" : " FAIL") + ", " + (deterministic ? "deterministic" : "NOT deterministic") + ", " + fmt("%.2f s", t);
    return {a && b && c && deterministic && t < 10.0, detail};
  }

  // ------------------------------------------------------------------ 8

  Outcome key_tags()
  {
    Rng rng(4034);
    int mismatches = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i)
    {
      auto b = testing::random_bytes(rng, 4 + testing::pick(rng, 2400));
      if (key_tag(view(b)) != oracle::keytag(b.data(), static_cast<unsigned>(b.size())))
        ++mismatches;
    }
    return {mismatches == 0, std::to_string(n) + " inputs, " + std::to_string(mismatches) + " mismatches"};
  }

  // ------------------------------------------------------------------ 9

  Outcome fragment_cache()
  {
    FragmentConfig cfg;
    FragmentCache cache(cfg);
    auto plan = std::make_shared<const FragmentPlan>();
    auto key = [](std::size_t i) {
      return FragmentCacheKey("10.0.0." + std::to_string(i % 200), Name::parse("q" + std::to_string(i) + ".example."),
                              RType::A, class_in);
    };
    const std::size_t total = 20000;
    std::size_t max_size = 0;
    bool lru_ok = true;
    for (std::size_t i = 0; i < total; ++i)
    {
      double now = static_cast<double>(i) * 1e-4;
      cache.put(key(i), plan, now);
      // Keep entry 0 hot; it must survive while its neighbours go.
      if (i % 1000 == 999)
        lru_ok = lru_ok && cache.get(key(0), now) != nullptr;
      max_size = std::max(max_size, cache.size());
    }
    double now = static_cast<double>(total) * 1e-4;
    lru_ok = lru_ok && cache.get(key(0), now) && !cache.get(key(1), now) && !cache.get(key(9999), now) &&
      cache.get(key(total - 1), now) && cache.get(key(10001), now);
    bool cap_ok = max_size == cfg.cache_cap && cache.size() == cfg.cache_cap &&
      cache.evictions() == total - cfg.cache_cap;

    FragmentCache timed(cfg);
    auto k = key(1);
    timed.put(k, plan, 100);
    bool expiry_ok = timed.get(k, 100 + cfg.cache_ttl - 1e-6) != nullptr && timed.get(k, 100 + cfg.cache_ttl) == nullptr &&
      timed.get(k, 100 + cfg.cache_ttl + 1) == nullptr;
    // A rebuilt plan replaces an expired one rather than reviving it.
    auto fresh = std::make_shared<const FragmentPlan>();
    auto got = timed.get_or_build(k, 200, [&] { return fresh; });
    expiry_ok = expiry_ok && got == fresh;

    return {cap_ok && lru_ok && expiry_ok,
            std::to_string(total) + " keys, peak size " + std::to_string(max_size) + ", evictions " +
              std::to_string(cache.evictions()) + ", LRU " + (lru_ok ? "ok" : "FAIL") + ", expiry " +
              (expiry_ok ? "ok" : "FAIL")};
  }

  // ------------------------------------------------------------------ 10

  Outcome loopback_walk()
  {
    const auto& reg = SuiteRegistry::standard();
    auto tb = make_testbed(reg, Combo{alg::ecdsap256sha256, alg::falcon512});
    NameServer root(ServerConfig{ServerRole::root, {tb.root}, {}, 65535}, reg);
    NameServer auth(ServerConfig{ServerRole::authoritative, {tb.child}, {}, 65535}, reg);
    UdpServer root_srv([&](ByteView w, const std::string& c, double t) { return root.handle_datagram(w, c, t); },
                       "127.0.0.1:0");
    UdpServer auth_srv([&](ByteView w, const std::string& c, double t) { return auth.handle_datagram(w, c, t); },
                       "127.0.0.1:0");

    UdpTransport upstream;
    ResolverConfig cfg;
    cfg.root = Endpoint{"127.0.0.1", root_srv.port()};
    cfg.anchor = tb.anchor;
    cfg.clock = [] { return fixture::epoch; };
    cfg.query_timeout = 0.5;
    cfg.address_map[fixture::root_address] = Endpoint{"127.0.0.1", root_srv.port()};
    cfg.address_map[fixture::auth_address] = Endpoint{"127.0.0.1", auth_srv.port()};
    Resolver resolver(cfg, upstream, reg);
    ResolverFrontend frontend(resolver, reg);
    UdpServer front_srv(
      [&](ByteView w, const std::string& c, double t) { return frontend.handle_datagram(w, c, t); }, "127.0.0.1:0");

    UdpTransport client;
    auto q = make_query(fixture::query_names().front(), RType::A, 0x4242, 1232);
    q.header.rd = true;
    std::uint16_t id = 0x4242;
    auto t0 = std::chrono::steady_clock::now();
    FetchOptions opts;
    opts.timeout = 0.9;
    FetchResult r;
    std::string error;
    try
    {
      r = fetch(client, Endpoint{"127.0.0.1", front_srv.port()}, q, reg, opts, [&] { return ++id; });
    }
    catch (const std::exception& e)
    {
      error = e.what();
    }
    double t = seconds_since(t0);
    front_srv.stop();
    auth_srv.stop();
    root_srv.stop();

    bool addr = !r.message.answer.empty() && r.message.answer[0].as<ARdata>() &&
      r.message.answer[0].as<ARdata>()->to_string() == "10.9.9.10";
    auto upstream_stats = root.stats().queries + auth.stats().queries;
    bool ok = error.empty() && r.message.header.rcode == rcode::noerror && addr && r.authenticated && t < 1.0;
    return {ok, error.empty() ? "answer " + std::string(addr ? "10.9.9.10" : "missing") + ", secure " +
                                  (r.authenticated ? "true" : "false") + ", " + std::to_string(upstream_stats) +
                                  " upstream datagrams, " + fmt("%.1f ms", t * 1e3)
                              : "error: " + error};
  }
}

int main(int argc, char** argv)
{
  CLI::App app{"acceptance criteria"};
  std::vector<int> expect_fail;
  std::vector<int> only;
  app.add_option("--expect-fail", expect_fail, "criteria known to fail");
  app.add_option("--only", only, "run a subset");
  CLI11_PARSE(app, argc, argv);

  const std::map<int, std::string> titles{
    {1, "codec round trip"},
    {2, "fragmentation identity"},
    {3, "forecast equals planner"},
    {4, "reference fragment counts"},
    {5, "size calibration"},
    {6, "dual verification"},
    {7, "simulated timing"},
    {8, "key tag oracle"},
    {9, "fragment cache"},
    {10, "loopback resolution"},
  };

  std::optional<FragmentCorpus> corpus;
  auto get_corpus = [&]() -> const FragmentCorpus& {
    if (!corpus)
      corpus = fragment_corpus();
    return *corpus;
  };

  std::map<int, std::function<Outcome()>> checks{
    {1, codec_roundtrip},
    {2, [&] { return fragmentation_identity(get_corpus()); }},
    {3, [&] { return forecast_equivalence(get_corpus()); }},
    {4, table_counts},
    {5, size_calibration},
    {6, dual_verification},
    {7, timing_properties},
    {8, key_tags},
    {9, fragment_cache},
    {10, loopback_walk},
  };

  std::set<int> failed;
  std::size_t ran = 0;
  for (const auto& [n, check] : checks)
  {
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end())
      continue;
    Outcome o;
    try
    {
      o = check();
    }
    catch (const std::exception& e)
    {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    if (!o.pass)
      failed.insert(n);
    std::printf("criterion %d %s: %s (%s)\n", n, titles.at(n).c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }

  std::set<int> expected;
  for (int n : expect_fail)
    if (only.empty() || std::find(only.begin(), only.end(), n) != only.end())
      expected.insert(n);
  if (failed != expected)
  {
    std::printf("failing set differs from the expected set\n");
    return 1;
  }
  std::printf("%zu of %zu criteria pass; expected failures: %zu\n", ran - failed.size(), ran, expected.size());
  return 0;
}
