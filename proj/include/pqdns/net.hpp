#pragma once

#include "pqdns/common.hpp"

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace pqdns
{
  struct Endpoint
  {
    std::string host;
    std::uint16_t port = 53;

    /// "a.b.c.d", "a.b.c.d:port".
    static Endpoint parse(std::string_view text, std::uint16_t default_port = 53);
    std::string to_string() const;

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
    friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
  };

  /// Datagram request/response service used by the resolver.
  class Transport
  {
  public:
    virtual ~Transport() = default;

    /// Sends every query to `server` at once and waits for responses,
    /// matched by message id. Unanswered queries yield nullopt after
    /// `timeout` seconds.
    virtual std::vector<std::optional<Bytes>> exchange(
      const Endpoint& server, const std::vector<Bytes>& queries, double timeout) = 0;

    /// Seconds on the transport's clock (wall or virtual).
    virtual double now() const = 0;
  };

  class UdpTransport final : public Transport
  {
  public:
    std::vector<std::optional<Bytes>> exchange(
      const Endpoint& server, const std::vector<Bytes>& queries, double timeout) override;
    double now() const override;
  };

  using DatagramHandler =
    std::function<std::optional<Bytes>(ByteView wire, const std::string& client, double now)>;

  /// One UDP socket served by a small pool of worker threads.
  class UdpServer
  {
  public:
    /// `listen` is "address:port"; port 0 picks a free port.
    UdpServer(DatagramHandler handler, const std::string& listen, int workers = 2);
    ~UdpServer();

    UdpServer(const UdpServer&) = delete;
    UdpServer& operator=(const UdpServer&) = delete;

    std::uint16_t port() const
    {
      return port_;
    }
    void stop();

  private:
    void run();

    DatagramHandler handler_;
    int fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::vector<std::thread> workers_;
  };

  double monotonic_seconds();
}
