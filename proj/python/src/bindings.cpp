// Python bindings: wire codec, key tags, sizing and the simulator.

#include "pqdns/codec.hpp"
#include "pqdns/crypto.hpp"
#include "pqdns/fragment.hpp"
#include "pqdns/reassembly.hpp"
#include "pqdns/server.hpp"
#include "pqdns/simnet.hpp"
#include "pqdns/testbed.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pqdns;

namespace
{
  Bytes to_bytes(const py::bytes& b)
  {
    std::string s = b;
    return Bytes(s.begin(), s.end());
  }

  py::bytes from_bytes(const Bytes& b)
  {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
  }

  const SuiteRegistry& registry(bool mock)
  {
    return mock ? SuiteRegistry::mock() : SuiteRegistry::standard();
  }

  RType parse_type(const std::string& s)
  {
    auto t = rtype_from_string(s);
    if (!t)
      throw py::value_error("unknown record type '" + s + "'");
    return *t;
  }

  py::dict describe(const Message& m)
  {
    py::dict d;
    d["id"] = m.header.id;
    d["flags"] = m.header.pack_flags();
    d["tc"] = m.header.tc;
    d["z"] = m.header.z;
    d["rcode"] = m.header.rcode;
    py::list q;
    for (const auto& x : m.question)
      q.append(x.qname.to_string() + " " + to_string(x.qtype));
    d["question"] = q;
    for (auto [s, key] : {std::pair{Section::answer, "answer"}, {Section::authority, "authority"},
                          {Section::additional, "additional"}})
    {
      py::list l;
      for (const auto& r : m.section(s))
        l.append(to_string(r));
      d[key] = l;
    }
    return d;
  }

  Message reference(const SuiteRegistry& reg, const Combo& combo, RType qtype)
  {
    auto tb = make_testbed(reg, combo);
    NameServer auth(ServerConfig{ServerRole::authoritative, {tb.child}, {}, 65535}, reg);
    auto qname = qtype == RType::DNSKEY ? fixture::child_origin() : fixture::query_names().front();
    return auth.respond(make_query(qname, qtype, 1, 1232));
  }
}

PYBIND11_MODULE(_pqdns, m)
{
  m.doc() = "Double-signed DNSSEC with application-layer fragmentation";

  static auto* error = new py::exception<Error>(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try
    {
      if (p)
        std::rethrow_exception(p);
    }
    catch (const Error& e)
    {
      py::object exc = py::handle(error->ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error->ptr(), exc.ptr());
    }
  });

  m.def("key_tag", [](const py::bytes& rdata) { return key_tag(view(to_bytes(rdata))); },
        "RFC 4034 Appendix B key tag of DNSKEY RDATA.");

  m.def("decode", [](const py::bytes& wire) { return describe(decode_message(view(to_bytes(wire)))); },
        "Decode a DNS message into a dict of presentation strings.");

  m.def("roundtrip", [](const py::bytes& wire) {
    return from_bytes(encode_message(decode_message(view(to_bytes(wire)))));
  }, "Decode then re-encode a DNS message.");

  m.def("make_query", [](const std::string& qname, const std::string& qtype, std::uint16_t id, std::uint16_t udp_size,
                         bool dnssec) {
    auto q = make_query(Name::parse(qname), parse_type(qtype), id, udp_size);
    if (dnssec)
      q.additional.back().ttl |= opt_do_bit;
    return from_bytes(encode_message(q));
  }, py::arg("qname"), py::arg("qtype") = "A", py::arg("id") = 1, py::arg("udp_size") = 1232,
     py::arg("dnssec") = false);

  m.def("combos", [] {
    std::vector<std::string> out;
    for (const auto& c : all_combos())
      out.push_back(c.name());
    return out;
  }, "The nine reference suite combinations.");

  m.def("count_fragments", [](const std::string& combo, const std::string& qtype, std::size_t threshold, bool mock) {
    const auto& reg = registry(mock);
    return count_fragments(reg, Combo::parse(combo, reg), parse_type(qtype), threshold);
  }, py::arg("combo"), py::arg("qtype") = "A", py::arg("threshold") = 1232, py::arg("mock") = true);

  m.def("sizes", [](const std::string& combo, const std::string& qtype, std::size_t threshold, bool mock) {
    const auto& reg = registry(mock);
    auto full = reference(reg, Combo::parse(combo, reg), parse_type(qtype));
    FragmentConfig cfg;
    cfg.threshold = threshold;
    auto plan = plan_fragments(full, cfg, reg);
    py::dict d;
    d["total"] = encode_message(full).size();
    d["pre_quantum_portion"] = pre_quantum_portion(full, reg);
    d["fragments"] = plan ? plan->n_fragments() : 1;
    d["stream"] = plan ? plan->stream.size() : 0;
    d["reassembles"] = !plan || encode_message(reassemble_plan(*plan, reg, cfg)) == encode_message(full);
    return d;
  }, py::arg("combo"), py::arg("qtype") = "A", py::arg("threshold") = 1232, py::arg("mock") = true,
     "Reference response size, pre-quantum portion and fragment plan summary.");

  m.def("bench", [](const std::vector<std::string>& combos, double delay, double bandwidth, double loss, int reps,
                    std::uint64_t seed, bool dnskey) {
    const auto& reg = SuiteRegistry::mock();
    std::vector<Combo> cs;
    for (const auto& c : combos)
      cs.push_back(Combo::parse(c, reg));
    if (cs.empty())
      cs = all_combos();
    BenchOptions opts;
    opts.link.delay = delay;
    opts.link.bandwidth = bandwidth;
    opts.link.loss = loss;
    opts.repetitions = reps;
    opts.seed = seed;
    opts.dnskey = dnskey;
    py::list out;
    for (const auto& r : run_benchmark(reg, cs, opts))
    {
      py::dict d;
      d["combo"] = r.combo.name();
      d["qtype"] = to_string(r.qtype);
      d["fragments"] = r.fragments;
      d["mean"] = r.mean;
      d["times"] = r.times;
      out.append(d);
    }
    return out;
  }, py::arg("combos") = std::vector<std::string>{}, py::arg("delay") = 0.010, py::arg("bandwidth") = 50e6,
     py::arg("loss") = 0.0, py::arg("reps") = 1, py::arg("seed") = 1, py::arg("dnskey") = false,
     "Simulated resolution times in seconds of virtual time.");
}
