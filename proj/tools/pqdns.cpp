// pqdns: keygen, signzone, sizer, serve, resolve, bench.

#include "pqdns/codec.hpp"
#include "pqdns/crypto.hpp"
#include "pqdns/fragment.hpp"
#include "pqdns/net.hpp"
#include "pqdns/resolver.hpp"
#include "pqdns/server.hpp"
#include "pqdns/simnet.hpp"
#include "pqdns/testbed.hpp"
#include "pqdns/zone.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace pqdns;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace
{
  std::string read_file(const std::string& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      fail(Errc::fixture_error, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write_file(const std::string& path, const std::string& text)
  {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
      fail(Errc::fixture_error, "cannot write " + path);
  }

  void emit(const std::string& path, const std::string& text)
  {
    if (path.empty() || path == "-")
      std::cout << text;
    else
      write_file(path, text);
  }

  const SuiteRegistry& registry_for(bool mock)
  {
    return mock ? SuiteRegistry::mock() : SuiteRegistry::standard();
  }

  std::uint32_t epoch_or_now(std::int64_t v)
  {
    return v >= 0 ? static_cast<std::uint32_t>(v) : static_cast<std::uint32_t>(std::time(nullptr));
  }

  RType parse_type(const std::string& s)
  {
    auto t = rtype_from_string(s);
    if (!t)
      throw CLI::ValidationError("type", "unknown record type '" + s + "'");
    return *t;
  }

  /// "10ms", "0.01s", "250us"; a bare number is milliseconds.
  double parse_duration(const std::string& s)
  {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    auto unit = s.substr(pos);
    if (unit.empty() || unit == "ms")
      return v / 1e3;
    if (unit == "s")
      return v;
    if (unit == "us")
      return v / 1e6;
    throw CLI::ValidationError("delay", "unknown unit in '" + s + "'");
  }

  /// "50mbps", "1gbps", "800kbps", or bits per second.
  double parse_bandwidth(const std::string& s)
  {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    std::string unit = s.substr(pos);
    for (auto& c : unit)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (unit.empty() || unit == "bps")
      return v;
    if (unit == "kbps")
      return v * 1e3;
    if (unit == "mbps")
      return v * 1e6;
    if (unit == "gbps")
      return v * 1e9;
    throw CLI::ValidationError("bw", "unknown unit in '" + s + "'");
  }

  std::map<std::string, Endpoint> parse_addr_map(const std::vector<std::string>& items)
  {
    std::map<std::string, Endpoint> out;
    for (const auto& item : items)
    {
      auto eq = item.find('=');
      if (eq == std::string::npos)
        throw CLI::ValidationError("addr-map", "expected IP=HOST:PORT, got '" + item + "'");
      out[item.substr(0, eq)] = Endpoint::parse(item.substr(eq + 1));
    }
    return out;
  }

  std::vector<KeyPair> read_keys(const std::vector<std::string>& paths, const SuiteRegistry& registry)
  {
    std::vector<KeyPair> keys;
    for (const auto& p : paths)
    {
      if (fs::is_directory(p))
      {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(p))
          if (e.path().extension() == ".private")
            files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
          keys.push_back(read_key_file(read_file(f.string()), registry));
      }
      else
        keys.push_back(read_key_file(read_file(p), registry));
    }
    return keys;
  }

  std::string key_basename(const Name& zone, const KeyPair& key)
  {
    char buf[32];
    std::snprintf(buf, sizeof buf, "+%03u+%05u", key.algorithm, key.key_tag);
    auto z = zone.to_string();
    return "K" + z + buf;
  }

  std::string dnskey_line(const Name& zone, const KeyPair& key, std::uint32_t ttl = 3600)
  {
    Record r{zone, RType::DNSKEY, class_in, ttl, key.dnskey()};
    return to_string(r) + "\n";
  }

  void write_key_pair(const std::string& dir, const Name& zone, const KeyPair& key, const SuiteRegistry& registry, json& report)
  {
    fs::create_directories(dir);
    auto base = (fs::path(dir) / key_basename(zone, key)).string();
    write_file(base + ".key", dnskey_line(zone, key));
    write_file(base + ".private", write_key_file(key, registry));
    report.push_back({
      {"algorithm", key.algorithm},
      {"role", std::string(to_string(key.role))},
      {"key_tag", key.key_tag},
      {"public", base + ".key"},
      {"private", base + ".private"},
    });
  }

  Bytes seed_bytes(const std::string& hex_or_text)
  {
    if (hex_or_text.empty())
    {
      Bytes s(32);
      std::random_device rd;
      for (auto& b : s)
        b = static_cast<std::uint8_t>(rd());
      return s;
    }
    try
    {
      return from_hex(hex_or_text);
    }
    catch (const Error&)
    {
      return Bytes(hex_or_text.begin(), hex_or_text.end());
    }
  }

  Zone load_zone(const std::string& path, const std::string& origin)
  {
    std::optional<Name> o;
    if (!origin.empty())
      o = Name::parse(origin);
    return parse_zone_file(read_file(path), o);
  }

  json record_list(const std::vector<Record>& rs)
  {
    json a = json::array();
    for (const auto& r : rs)
      a.push_back(to_string(r));
    return a;
  }

  // ------------------------------------------------------------ serving

  volatile std::sig_atomic_t g_stop = 0;

  void wait_for_signal(double duration)
  {
    std::signal(SIGINT, [](int) { g_stop = 1; });
    std::signal(SIGTERM, [](int) { g_stop = 1; });
    double end = duration > 0 ? monotonic_seconds() + duration : 0;
    while (!g_stop && (end == 0 || monotonic_seconds() < end))
    {
      struct timespec ts{0, 50'000'000};
      nanosleep(&ts, nullptr);
    }
  }

  void setup_logging()
  {
    auto logger = spdlog::stderr_color_mt("pqdns");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("PQDNS_LOG"))
      spdlog::set_level(spdlog::level::from_str(lvl));
  }
}

int main(int argc, char** argv)
{
  setup_logging();
  CLI::App app{"Double-signed DNSSEC toolchain with application-layer fragmentation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  bool as_json = false;
  bool mock = false;
  app.add_flag("--json", as_json, "Machine-readable output");
  app.add_flag("--mock", mock, "Use mock backends for every suite (deterministic, insecure)");

  // keygen
  auto* keygen = app.add_subcommand("keygen", "Generate a key pair and write .key/.private files");
  std::string kg_algo, kg_role = "zsk", kg_zone = ".", kg_seed, kg_out = ".";
  keygen->add_option("--algo", kg_algo, "Suite name or number (falcon512, ecdsap256, rsasha256, ...)")->required();
  keygen->add_option("--role", kg_role, "ksk or zsk")->check(CLI::IsMember({"ksk", "zsk"}));
  keygen->add_option("--zone", kg_zone, "Owner name of the DNSKEY");
  keygen->add_option("--seed", kg_seed, "Hex seed (random when omitted)");
  keygen->add_option("--out", kg_out, "Output directory");

  // signzone
  auto* signzone = app.add_subcommand("signzone", "Sign a zone with one classical and one post-quantum suite");
  std::string sz_zone, sz_origin, sz_pre, sz_post, sz_seed = "pqdns", sz_out, sz_ds, sz_keys_out;
  std::vector<std::string> sz_keys, sz_add_ds;
  std::int64_t sz_now = -1;
  signzone->add_option("--zone", sz_zone, "Zone file")->required()->check(CLI::ExistingFile);
  signzone->add_option("--origin", sz_origin, "Origin when the file has no $ORIGIN");
  signzone->add_option("--pre", sz_pre, "Classical suite");
  signzone->add_option("--post", sz_post, "Post-quantum suite");
  signzone->add_option("--key", sz_keys, "Key file or directory of .private files (overrides --pre/--post)");
  signzone->add_option("--seed", sz_seed, "Seed for generated keys (hex or text)");
  signzone->add_option("--now", sz_now, "Signing time, epoch seconds");
  signzone->add_option("--add-ds", sz_add_ds, "DS lines (zone tag alg 2 digest) to publish before signing");
  signzone->add_option("--out", sz_out, "Signed zone output (stdout when omitted)");
  signzone->add_option("--ds", sz_ds, "Write DS lines for the signed zone (also usable as a trust anchor)");
  signzone->add_option("--keys-out", sz_keys_out, "Write the generated keys to this directory");

  // sizer
  auto* sizer = app.add_subcommand("sizer", "Report response sizes and the fragment plan");
  std::string si_combo = "falcon512+ecdsap256", si_qtype = "A", si_qname, si_zone, si_origin;
  std::size_t si_threshold = 1232;
  std::int64_t si_now = -1;
  sizer->add_option("--combo", si_combo, "Suites joined by '+', e.g. rsasha256+falcon512");
  sizer->add_option("--qtype", si_qtype, "Query type");
  sizer->add_option("--qname", si_qname, "Query name (test0 or the apex of the fixture by default)");
  sizer->add_option("--zone", si_zone, "Unsigned zone file (the built-in fixture when omitted)")->check(CLI::ExistingFile);
  sizer->add_option("--origin", si_origin, "Origin when the file has no $ORIGIN");
  sizer->add_option("--threshold", si_threshold, "Fragmentation threshold in bytes");
  sizer->add_option("--now", si_now, "Signing time, epoch seconds");

  // serve
  auto* serve = app.add_subcommand("serve", "Run a root, authoritative or resolver endpoint over UDP");
  std::string sv_role = "auth", sv_listen = "127.0.0.1:5300", sv_root, sv_anchor;
  std::vector<std::string> sv_zones, sv_keys, sv_addr_map, sv_required;
  std::size_t sv_threshold = 1232;
  int sv_workers = 4;
  double sv_duration = 0;
  std::int64_t sv_now = -1;
  serve->add_option("--role", sv_role, "root, auth or resolver")->check(CLI::IsMember({"root", "auth", "resolver"}));
  serve->add_option("--zone", sv_zones, "Zone file (signed, or signed on load with --keys)")->check(CLI::ExistingFile);
  serve->add_option("--keys", sv_keys, "Key file or directory used to sign unsigned zones");
  serve->add_option("--listen", sv_listen, "ADDR:PORT");
  serve->add_option("--threshold", sv_threshold, "Fragmentation threshold in bytes");
  serve->add_option("--workers", sv_workers, "Worker threads");
  serve->add_option("--root", sv_root, "Resolver role: root server ADDR:PORT");
  serve->add_option("--anchor", sv_anchor, "Resolver role: trust anchor file (DS lines)")->check(CLI::ExistingFile);
  serve->add_option("--addr-map", sv_addr_map, "Resolver role: rewrite glue IP=HOST:PORT")->delimiter(',');
  serve->add_option("--require", sv_required, "Signature classes required: pre,post")->delimiter(',')->check(CLI::IsMember({"pre", "post"}));
  serve->add_option("--now", sv_now, "Validation time (epoch seconds); signing time for --keys");
  serve->add_option("--duration", sv_duration, "Stop after this many seconds (0 = until signalled)");

  // resolve
  auto* resolve = app.add_subcommand("resolve", "Resolve a name iteratively (with --anchor) or through a resolver");
  std::string rs_name, rs_type = "A", rs_server = "127.0.0.1:5300", rs_anchor;
  std::vector<std::string> rs_addr_map, rs_required;
  bool rs_stub = false, rs_dnssec = false;
  double rs_timeout = 2.0;
  std::int64_t rs_now = -1;
  resolve->add_option("name", rs_name, "Query name")->required();
  resolve->add_option("type", rs_type, "Query type");
  resolve->add_option("--server", rs_server, "Root server (iterative) or resolver (stub) ADDR:PORT");
  resolve->add_option("--anchor", rs_anchor, "Trust anchor file; enables iterative mode")->check(CLI::ExistingFile);
  resolve->add_option("--addr-map", rs_addr_map, "Rewrite glue IP=HOST:PORT")->delimiter(',');
  resolve->add_option("--require", rs_required, "Signature classes required: pre,post")->delimiter(',')->check(CLI::IsMember({"pre", "post"}));
  resolve->add_flag("--stub", rs_stub, "Ask --server as a recursive resolver");
  resolve->add_flag("--dnssec", rs_dnssec, "Stub mode: set DO to receive signatures");
  resolve->add_option("--timeout", rs_timeout, "Per-datagram timeout in seconds");
  resolve->add_option("--now", rs_now, "Validation time, epoch seconds");

  // bench
  auto* bench = app.add_subcommand("bench", "Simulated resolution times per suite combination");
  std::string bn_combos = "all", bn_delay = "10ms", bn_bw = "50mbps", bn_out;
  int bn_reps = 1;
  double bn_loss = 0;
  std::uint64_t bn_seed = 1;
  bool bn_no_dnskey = false;
  bench->add_option("--combos", bn_combos, "all, or combos separated by ',' (e.g. falcon,falcon+ecdsa)");
  bench->add_option("--delay", bn_delay, "One-way delay per link direction (10ms)");
  bench->add_option("--bw", bn_bw, "Link bandwidth (50mbps)");
  bench->add_option("--loss", bn_loss, "Datagram loss probability")->check(CLI::Range(0.0, 0.99));
  bench->add_option("--reps", bn_reps, "Repetitions (cold resolver each)")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bn_seed, "Seed for ids and loss");
  bench->add_flag("--no-dnskey", bn_no_dnskey, "Skip the DNSKEY timing rows");
  bench->add_option("--out", bn_out, "CSV output file (stdout when omitted)");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::CallForHelp& e)
  {
    return app.exit(e);
  }
  catch (const CLI::CallForAllHelp& e)
  {
    return app.exit(e);
  }
  catch (const CLI::ParseError& e)
  {
    app.exit(e);
    return 2;
  }

  try
  {
    const auto& registry = registry_for(mock);

    if (*keygen)
    {
      const auto& suite = registry.by_name(kg_algo);
      auto key = generate_keypair(registry, suite.code, kg_role == "ksk" ? KeyRole::ksk : KeyRole::zsk, seed_bytes(kg_seed));
      json report = json::array();
      write_key_pair(kg_out, Name::parse(kg_zone), key, registry, report);
      if (as_json)
        std::cout << report[0].dump(2) << "\n";
      else
        std::cout << report[0]["public"].get<std::string>() << "\n" << report[0]["private"].get<std::string>() << "\n";
      return 0;
    }

    if (*signzone)
    {
      auto zone = load_zone(sz_zone, sz_origin);
      for (const auto& f : sz_add_ds)
      {
        auto ta = TrustAnchor::parse(read_file(f));
        for (const auto& ds : ta.ds)
          zone.records.push_back(Record{ta.zone, RType::DS, class_in, 86400, ds});
      }
      auto now = epoch_or_now(sz_now);
      Zone signed_zone;
      json keys_report = json::array();
      if (!sz_keys.empty())
        signed_zone = sign_zone(zone, registry, read_keys(sz_keys, registry), now);
      else
      {
        std::optional<std::uint8_t> pre, post;
        if (!sz_pre.empty())
          pre = registry.by_name(sz_pre).code;
        if (!sz_post.empty())
          post = registry.by_name(sz_post).code;
        signed_zone = sign_zone(zone, registry, pre, post, now, seed_bytes(sz_seed));
      }
      if (!sz_keys_out.empty())
        for (const auto& k : signed_zone.keys)
          write_key_pair(sz_keys_out, signed_zone.origin, k, registry, keys_report);
      auto anchor = TrustAnchor::from_zone(signed_zone);
      if (!sz_ds.empty())
        write_file(sz_ds, anchor.to_string());
      emit(sz_out, print_zone(signed_zone));
      if (as_json && !sz_out.empty())
      {
        std::size_t sigs = 0;
        for (const auto& r : signed_zone.records)
          sigs += r.type == RType::RRSIG;
        std::cout << json{
          {"origin", signed_zone.origin.to_string()},
          {"records", signed_zone.records.size()},
          {"rrsigs", sigs},
          {"ds", anchor.to_string()},
          {"keys", keys_report},
        }.dump(2) << "\n";
      }
      return 0;
    }

    if (*sizer)
    {
      auto combo = Combo::parse(si_combo, registry);
      auto now = si_now >= 0 ? static_cast<std::uint32_t>(si_now) : fixture::epoch;
      Zone zone;
      if (si_zone.empty())
        zone = make_testbed(registry, combo, now).child;
      else
        zone = sign_zone(load_zone(si_zone, si_origin), registry, combo.pre, combo.post, now, Bytes{'p', 'q'});
      auto qtype = parse_type(si_qtype);
      Name qname;
      if (!si_qname.empty())
        qname = Name::parse_relative(si_qname, zone.origin);
      else if (qtype == RType::DNSKEY || !si_zone.empty())
        qname = zone.origin;
      else
        qname = fixture::query_names().front();

      FragmentConfig cfg;
      cfg.threshold = si_threshold;
      cfg.validate();
      NameServer server(ServerConfig{ServerRole::authoritative, {zone}, cfg, 65535}, registry);
      auto full = server.respond(make_query(qname, qtype, 1, static_cast<std::uint16_t>(std::min<std::size_t>(si_threshold, 65535))));
      auto wire = encode_message(full);

      std::size_t sections[3] = {0, 0, 0};
      std::size_t records_start = wire.size();
      for (const auto& sp : record_spans(wire))
      {
        sections[static_cast<int>(sp.section)] += sp.length;
        records_start = std::min(records_start, sp.offset);
      }
      std::size_t pre_portion = pre_quantum_portion(full, registry);
      auto plan = plan_fragments(full, cfg, registry);
      std::size_t n = plan ? plan->n_fragments() : 1;
      long leftover = static_cast<long>(si_threshold) - static_cast<long>(pre_portion);

      json j{
        {"combo", combo.name()},
        {"qname", qname.to_string()},
        {"qtype", to_string(qtype)},
        {"header", 12},
        {"question", records_start - 12},
        {"answer", sections[0]},
        {"authority", sections[1]},
        {"additional", sections[2]},
        {"total", wire.size()},
        {"threshold", si_threshold},
        {"pre_quantum_portion", pre_portion},
        {"leftover", leftover},
        {"first_fragment", plan ? encode_message(plan->first).size() : wire.size()},
        {"z", plan ? z_value_for_algorithm(plan->signalled_algorithm) : 0},
        {"split", plan && plan->split.has_value()},
        {"stream", plan ? plan->stream.size() : 0},
        {"fragments", n},
      };
      if (as_json)
        std::cout << j.dump(2) << "\n";
      else
        for (auto it = j.begin(); it != j.end(); ++it)
          std::cout << it.key() << ": " << (it->is_string() ? it->get<std::string>() : it->dump()) << "\n";
      return 0;
    }

    if (*serve)
    {
      FragmentConfig frag;
      frag.threshold = sv_threshold;
      frag.validate();
      std::unique_ptr<NameServer> ns;
      std::unique_ptr<UdpTransport> transport;
      std::unique_ptr<Resolver> resolver;
      std::unique_ptr<ResolverFrontend> frontend;
      DatagramHandler handler;

      if (sv_role == "resolver")
      {
        if (sv_root.empty() || sv_anchor.empty())
          throw CLI::ValidationError("serve", "--role resolver needs --root and --anchor");
        ResolverConfig rc;
        rc.root = Endpoint::parse(sv_root);
        rc.anchor = TrustAnchor::parse(read_file(sv_anchor));
        rc.fragment = frag;
        rc.address_map = parse_addr_map(sv_addr_map);
        if (!sv_required.empty())
        {
          rc.required.clear();
          for (const auto& c : sv_required)
            rc.required.push_back(c == "pre" ? SigClass::pre_quantum : SigClass::post_quantum);
        }
        if (sv_now >= 0)
          rc.clock = [t = static_cast<std::uint32_t>(sv_now)] { return t; };
        transport = std::make_unique<UdpTransport>();
        resolver = std::make_unique<Resolver>(rc, *transport, registry);
        frontend = std::make_unique<ResolverFrontend>(*resolver, registry, frag);
        handler = [&](ByteView w, const std::string& c, double t) { return frontend->handle_datagram(w, c, t); };
      }
      else
      {
        if (sv_zones.empty())
          throw CLI::ValidationError("serve", "--zone is required for root and auth roles");
        ServerConfig sc;
        sc.role = sv_role == "root" ? ServerRole::root : ServerRole::authoritative;
        sc.fragment = frag;
        auto keys = read_keys(sv_keys, registry);
        for (const auto& path : sv_zones)
        {
          auto z = load_zone(path, "");
          if (!z.is_signed() && !keys.empty())
            z = sign_zone(z, registry, keys, epoch_or_now(sv_now));
          sc.zones.push_back(std::move(z));
        }
        ns = std::make_unique<NameServer>(sc, registry);
        handler = [&](ByteView w, const std::string& c, double t) { return ns->handle_datagram(w, c, t); };
      }

      UdpServer server(handler, sv_listen, sv_workers);
      if (as_json)
        std::cout << json{{"role", sv_role}, {"listen", sv_listen}, {"port", server.port()}}.dump() << std::endl;
      else
        std::cout << sv_role << " listening on " << Endpoint::parse(sv_listen).host << ":" << server.port() << std::endl;
      wait_for_signal(sv_duration);
      server.stop();
      return 0;
    }

    if (*resolve)
    {
      auto qname = Name::parse(rs_name);
      auto qtype = parse_type(rs_type);
      UdpTransport transport;
      json j{{"qname", qname.to_string()}, {"qtype", to_string(qtype)}};
      int rc = 0;

      if (rs_stub || rs_anchor.empty())
      {
        auto q = make_query(qname, qtype, static_cast<std::uint16_t>(std::random_device{}()), 1232);
        q.header.rd = true;
        if (rs_dnssec)
          q.additional.back().ttl |= opt_do_bit;
        FragmentConfig frag;
        std::mt19937 rng(std::random_device{}());
        double t0 = transport.now();
        auto r = fetch(transport, Endpoint::parse(rs_server), q, registry, {rs_timeout, 2, frag}, [&] {
          return static_cast<std::uint16_t>(rng());
        });
        double elapsed = transport.now() - t0;
        std::vector<Record> answer;
        for (const auto& rec : r.message.answer)
          answer.push_back(rec);
        j["mode"] = "stub";
        j["rcode"] = r.message.header.rcode;
        j["answer"] = record_list(answer);
        j["secure"] = r.authenticated;
        j["fragments"] = r.fragments;
        j["elapsed_ms"] = elapsed * 1000;
        rc = r.message.header.rcode == rcode::noerror ? 0 : 1;
      }
      else
      {
        ResolverConfig cfg;
        cfg.root = Endpoint::parse(rs_server);
        cfg.anchor = TrustAnchor::parse(read_file(rs_anchor));
        cfg.address_map = parse_addr_map(rs_addr_map);
        cfg.query_timeout = rs_timeout;
        if (!rs_required.empty())
        {
          cfg.required.clear();
          for (const auto& c : rs_required)
            cfg.required.push_back(c == "pre" ? SigClass::pre_quantum : SigClass::post_quantum);
        }
        if (rs_now >= 0)
          cfg.clock = [t = static_cast<std::uint32_t>(rs_now)] { return t; };
        Resolver resolver(cfg, transport, registry);
        j["mode"] = "iterative";
        try
        {
          auto res = resolver.resolve(qname, qtype);
          j["rcode"] = rcode::noerror;
          j["answer"] = record_list(res.rrset);
          j["secure"] = res.secure;
          j["fragments"] = res.fragments;
          j["queries"] = res.queries;
          j["elapsed_ms"] = res.elapsed * 1000;
        }
        catch (const Error& e)
        {
          j["rcode"] = e.code() == Errc::nx_domain ? rcode::nxdomain : rcode::servfail;
          j["answer"] = json::array();
          j["secure"] = false;
          j["error"] = e.what();
          rc = 1;
        }
      }

      if (as_json)
        std::cout << j.dump(2) << "\n";
      else
      {
        for (const auto& a : j["answer"])
          std::cout << a.get<std::string>() << "\n";
        if (j.contains("error"))
          std::cout << "error: " << j["error"].get<std::string>() << "\n";
        std::cout << "rcode: " << j["rcode"].dump() << "\n";
        std::cout << "secure: " << (j["secure"].get<bool>() ? "yes" : "no") << "\n";
        std::cout << "fragments: " << j.value("fragments", 0) << "\n";
        if (j.contains("elapsed_ms"))
        {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.3f", j["elapsed_ms"].get<double>());
          std::cout << "time: " << buf << " ms\n";
        }
      }
      return rc;
    }

    if (*bench)
    {
      std::vector<Combo> combos;
      if (bn_combos == "all")
        combos = all_combos();
      else
      {
        std::stringstream ss(bn_combos);
        std::string item;
        while (std::getline(ss, item, ','))
          combos.push_back(Combo::parse(item, registry));
      }
      BenchOptions opts;
      opts.link.delay = parse_duration(bn_delay);
      opts.link.bandwidth = parse_bandwidth(bn_bw);
      opts.link.loss = bn_loss;
      opts.repetitions = bn_reps;
      opts.seed = bn_seed;
      opts.dnskey = !bn_no_dnskey;
      auto results = run_benchmark(registry, combos, opts);
      if (as_json)
      {
        json a = json::array();
        for (const auto& r : results)
          a.push_back({
            {"combo", r.combo.name()},
            {"qtype", to_string(r.qtype)},
            {"fragments", r.fragments},
            {"mean_ms", r.mean * 1000},
            {"times_ms", [&] {
               json t = json::array();
               for (auto v : r.times)
                 t.push_back(v * 1000);
               return t;
             }()},
          });
        emit(bn_out, a.dump(2) + "\n");
      }
      else
        emit(bn_out, bench_csv(results));
      return 0;
    }
  }
  catch (const CLI::ParseError& e)
  {
    std::cerr << e.what() << "\n";
    return 2;
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
