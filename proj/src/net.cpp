#include "pqdns/net.hpp"

#include <spdlog/spdlog.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cstring>

namespace pqdns
{
  namespace
  {
    sockaddr_in to_sockaddr(const Endpoint& ep)
    {
      sockaddr_in sa{};
      sa.sin_family = AF_INET;
      sa.sin_port = htons(ep.port);
      std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
      if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1)
        fail(Errc::network, "not an IPv4 address: '" + ep.host + "'");
      return sa;
    }

    class Socket
    {
    public:
      Socket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0))
      {
        if (fd_ < 0)
          fail(Errc::network, std::string("socket: ") + std::strerror(errno));
      }
      ~Socket()
      {
        ::close(fd_);
      }
      Socket(const Socket&) = delete;
      Socket& operator=(const Socket&) = delete;

      int fd() const
      {
        return fd_;
      }

    private:
      int fd_;
    };

    std::size_t question_end(ByteView wire)
    {
      std::size_t p = 12;
      while (p < wire.size() && wire[p] != 0)
      {
        if ((wire[p] & 0xC0) != 0)
          return 0;
        p += 1 + wire[p];
      }
      return p + 5 <= wire.size() ? p + 5 : 0;
    }
  }

  Endpoint Endpoint::parse(std::string_view text, std::uint16_t default_port)
  {
    Endpoint ep;
    ep.port = default_port;
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos)
      ep.host = std::string(text);
    else
    {
      ep.host = std::string(text.substr(0, colon));
      auto digits = text.substr(colon + 1);
      unsigned v = 0;
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (ec != std::errc() || p != digits.data() + digits.size() || v > 65535)
        fail(Errc::syntax_error, "bad port in '" + std::string(text) + "'");
      ep.port = static_cast<std::uint16_t>(v);
    }
    if (ep.host.empty())
      fail(Errc::syntax_error, "missing host in '" + std::string(text) + "'");
    return ep;
  }

  std::string Endpoint::to_string() const
  {
    return host + ":" + std::to_string(port);
  }

  double monotonic_seconds()
  {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  }

  // --------------------------------------------------------- transport

  double UdpTransport::now() const
  {
    return monotonic_seconds();
  }

  std::vector<std::optional<Bytes>> UdpTransport::exchange(
    const Endpoint& server, const std::vector<Bytes>& queries, double timeout)
  {
    std::vector<std::optional<Bytes>> out(queries.size());
    if (queries.empty())
      return out;
    Socket sock;
    auto sa = to_sockaddr(server);
    if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
      fail(Errc::network, std::string("connect: ") + std::strerror(errno));
    for (const auto& q : queries)
      if (::send(sock.fd(), q.data(), q.size(), 0) < 0)
        spdlog::debug("send to {} failed: {}", server.to_string(), std::strerror(errno));

    std::size_t pending = queries.size();
    double deadline = now() + timeout;
    std::vector<std::uint8_t> buf(65536);
    while (pending > 0)
    {
      double left = deadline - now();
      if (left <= 0)
        break;
      pollfd pfd{sock.fd(), POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(left * 1000) + 1);
      if (rc <= 0)
        continue;
      auto n = ::recv(sock.fd(), buf.data(), buf.size(), 0);
      if (n < 12)
        continue;
      ByteView resp(buf.data(), static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < queries.size(); ++i)
      {
        const auto& q = queries[i];
        if (out[i] || q[0] != resp[0] || q[1] != resp[1])
          continue;
        auto qend = question_end(q);
        if (qend != 0 && (resp.size() < qend || !std::equal(q.begin() + 12, q.begin() + static_cast<std::ptrdiff_t>(qend), resp.begin() + 12)))
          continue;
        out[i] = Bytes(resp.begin(), resp.end());
        --pending;
        break;
      }
    }
    return out;
  }

  // ------------------------------------------------------------ server

  UdpServer::UdpServer(DatagramHandler handler, const std::string& listen, int workers) :
    handler_(std::move(handler))
  {
    auto ep = Endpoint::parse(listen);
    auto sa = to_sockaddr(ep);
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0)
      fail(Errc::network, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    int rcvbuf = 1 << 20;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
    {
      auto err = std::string(std::strerror(errno));
      ::close(fd_);
      fail(Errc::network, "bind " + listen + ": " + err);
    }
    socklen_t len = sizeof sa;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    port_ = ntohs(sa.sin_port);
    timeval tv{0, 100000};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    for (int i = 0; i < std::max(1, workers); ++i)
      workers_.emplace_back([this] { run(); });
  }

  UdpServer::~UdpServer()
  {
    stop();
  }

  void UdpServer::stop()
  {
    stopping_ = true;
    for (auto& t : workers_)
      if (t.joinable())
        t.join();
    workers_.clear();
    if (fd_ >= 0)
    {
      ::close(fd_);
      fd_ = -1;
    }
  }

  void UdpServer::run()
  {
    std::vector<std::uint8_t> buf(65536);
    while (!stopping_)
    {
      sockaddr_in from{};
      socklen_t len = sizeof from;
      auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
      if (n < 0)
        continue;
      char ip[INET_ADDRSTRLEN] = {};
      ::inet_ntop(AF_INET, &from.sin_addr, ip, sizeof ip);
      std::optional<Bytes> reply;
      try
      {
        reply = handler_(ByteView(buf.data(), static_cast<std::size_t>(n)), ip, monotonic_seconds());
      }
      catch (const std::exception& e)
      {
        spdlog::warn("handler failed for datagram from {}: {}", ip, e.what());
        continue;
      }
      if (reply)
        ::sendto(fd_, reply->data(), reply->size(), 0, reinterpret_cast<sockaddr*>(&from), len);
    }
  }
}
