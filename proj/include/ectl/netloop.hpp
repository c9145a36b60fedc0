// Plant/controller split over TCP, one lockstep exchange per sampling
// instant: SENSOR in, ACTUATE out, REENC in, strictly ordered by step index.
//
// Trust model: the plant process owns the secret key, encrypts its output
// and decrypts/re-encrypts the actuation; the controller process holds only
// encrypted parameters and state (the EncryptedController type carries no
// key member and the wire format has no key field).  Transport is plain
// length-prefixed frames; the payload is protected by the homomorphic layer,
// not by the channel.
//
// Frame: magic "ECTL", version u8, msg_type u8, step_index u64le,
// payload_len u32le, payload bytes (8-byte little-endian residues).

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "ectl/controller.hpp"
#include "ectl/plant.hpp"
#include "ectl/sim.hpp"
#include "ectl/zq_lwe.hpp"

namespace ectl::net {

constexpr char kFrameMagic[4] = {'E', 'C', 'T', 'L'};
constexpr std::uint8_t kVersion = 1;

enum class MsgType : std::uint8_t {
  hello = 0,
  sensor = 1,
  actuate = 2,
  reenc = 3,
  bye = 4
};

struct Frame {
  MsgType type = MsgType::bye;
  std::uint64_t step = 0;
  std::vector<std::uint8_t> payload;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept {
    close_fd();
    fd_ = o.fd_;
    o.fd_ = -1;
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close_fd(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void set_recv_timeout(double seconds) const {
    timeval tv{};
    tv.tv_sec = static_cast<long>(seconds);
    tv.tv_usec = static_cast<long>((seconds - tv.tv_sec) * 1e6);
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  }

 private:
  int fd_ = -1;
  void close_fd() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
};

inline void write_all(const Socket& s, const void* data, std::size_t len) {
  const char* p = static_cast<const char*>(data);
  while (len > 0) {
    const ssize_t n = ::send(s.fd(), p, len, MSG_NOSIGNAL);
    if (n <= 0) throw IoError("socket write failed");
    p += n;
    len -= static_cast<std::size_t>(n);
  }
}

inline void read_exact(const Socket& s, void* data, std::size_t len) {
  char* p = static_cast<char*>(data);
  while (len > 0) {
    const ssize_t n = ::recv(s.fd(), p, len, 0);
    if (n == 0) throw IoError("connection closed mid-stream");
    if (n < 0) throw IoError("socket read failed or timed out");
    p += n;
    len -= static_cast<std::size_t>(n);
  }
}

inline void append_u64(std::vector<std::uint8_t>& v, std::uint64_t x) {
  for (int i = 0; i < 8; ++i)
    v.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xFF));
}

inline void append_i64(std::vector<std::uint8_t>& v, std::int64_t x) {
  append_u64(v, static_cast<std::uint64_t>(x));
}

struct Cursor {
  const std::vector<std::uint8_t>* buf;
  std::size_t pos = 0;
  std::uint64_t u64() {
    if (pos + 8 > buf->size()) throw IoError("truncated payload");
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i)
      x |= static_cast<std::uint64_t>((*buf)[pos + i]) << (8 * i);
    pos += 8;
    return x;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  bool done() const { return pos == buf->size(); }
};

inline void send_frame(const Socket& s, const Frame& f) {
  std::vector<std::uint8_t> head;
  head.reserve(18);
  head.insert(head.end(), kFrameMagic, kFrameMagic + 4);
  head.push_back(kVersion);
  head.push_back(static_cast<std::uint8_t>(f.type));
  append_u64(head, f.step);
  const std::uint32_t len = static_cast<std::uint32_t>(f.payload.size());
  for (int i = 0; i < 4; ++i)
    head.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xFF));
  write_all(s, head.data(), head.size());
  if (!f.payload.empty()) write_all(s, f.payload.data(), f.payload.size());
}

inline Frame recv_frame(const Socket& s, std::size_t max_payload = 1u << 30) {
  std::uint8_t head[18];
  read_exact(s, head, sizeof(head));
  if (std::memcmp(head, kFrameMagic, 4) != 0)
    throw IoError("bad frame magic");
  if (head[4] != kVersion) throw IoError("unsupported protocol version");
  Frame f;
  f.type = static_cast<MsgType>(head[5]);
  f.step = 0;
  for (int i = 0; i < 8; ++i)
    f.step |= static_cast<std::uint64_t>(head[6 + i]) << (8 * i);
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i)
    len |= static_cast<std::uint32_t>(head[14 + i]) << (8 * i);
  if (len > max_payload) throw IoError("oversized frame");
  f.payload.resize(len);
  if (len) read_exact(s, f.payload.data(), len);
  return f;
}

// HELLO payload: crypto shape, controller dims, scale exponents, window and
// re-encryption rule; both ends must agree bit-for-bit before step 0.
struct HelloInfo {
  int q0 = 0, nu0 = 0, d = 0, n = 0;
  int n_prime = 0, p = 0, nr = 0, m = 0;
  ScaleSet sc;
  OutputWindow win;
  std::uint8_t reenc_rule = 0;

  std::vector<std::uint8_t> encode() const {
    std::vector<std::uint8_t> v;
    for (int x : {q0, nu0, d, n, n_prime, p, nr, m})
      append_u64(v, static_cast<std::uint64_t>(x));
    for (int x : {sc.r1_exp, sc.r2_exp, sc.s1_exp, sc.s2_exp, sc.L_exp})
      append_i64(v, x);
    append_u64(v, win.q);
    for (std::size_t i = 0; i < win.u_min.size(); ++i) {
      append_i64(v, win.u_min[i]);
      append_i64(v, win.u_max[i]);
    }
    v.push_back(reenc_rule);
    return v;
  }

  static HelloInfo decode(const std::vector<std::uint8_t>& payload, int m_hint) {
    HelloInfo h;
    Cursor c{&payload};
    h.q0 = static_cast<int>(c.u64());
    h.nu0 = static_cast<int>(c.u64());
    h.d = static_cast<int>(c.u64());
    h.n = static_cast<int>(c.u64());
    h.n_prime = static_cast<int>(c.u64());
    h.p = static_cast<int>(c.u64());
    h.nr = static_cast<int>(c.u64());
    h.m = static_cast<int>(c.u64());
    h.sc.r1_exp = static_cast<int>(c.i64());
    h.sc.r2_exp = static_cast<int>(c.i64());
    h.sc.s1_exp = static_cast<int>(c.i64());
    h.sc.s2_exp = static_cast<int>(c.i64());
    h.sc.L_exp = static_cast<int>(c.i64());
    h.win.q = c.u64();
    (void)m_hint;
    for (int i = 0; i < h.m; ++i) {
      h.win.u_min.push_back(c.i64());
      h.win.u_max.push_back(c.i64());
    }
    if (c.pos >= c.buf->size()) throw IoError("truncated HELLO payload");
    h.reenc_rule = (*c.buf)[c.pos];
    return h;
  }

  bool matches(const HelloInfo& o) const {
    return q0 == o.q0 && nu0 == o.nu0 && d == o.d && n == o.n &&
           n_prime == o.n_prime && p == o.p && nr == o.nr && m == o.m &&
           sc.r1_exp == o.sc.r1_exp && sc.r2_exp == o.sc.r2_exp &&
           sc.s1_exp == o.sc.s1_exp && sc.s2_exp == o.sc.s2_exp &&
           sc.L_exp == o.sc.L_exp && win.q == o.win.q &&
           win.u_min == o.win.u_min && win.u_max == o.win.u_max &&
           reenc_rule == o.reenc_rule;
  }
};

inline std::vector<std::uint8_t> pack_ciphertexts(
    const std::vector<Ciphertext>& cts) {
  std::vector<std::uint8_t> v;
  for (const auto& c : cts)
    for (Residue r : c.coeffs) append_u64(v, r);
  return v;
}

inline std::vector<Ciphertext> unpack_ciphertexts(
    const std::vector<std::uint8_t>& payload, int count, const LweParams& p) {
  if (payload.size() != static_cast<std::size_t>(count) * (p.n + 1) * 8)
    throw IoError("ciphertext payload length mismatch");
  Cursor c{&payload};
  std::vector<Ciphertext> out(count);
  for (auto& ct : out) {
    ct.coeffs.resize(p.n + 1);
    for (auto& r : ct.coeffs) {
      r = c.u64();
      if (r >= p.q) throw IoError("residue out of range on the wire");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// controller endpoint (no key material in this process)

struct ControllerSession {
  int steps_served = 0;
};

class ControllerServer {
 public:
  explicit ControllerServer(int port) {
    listener_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listener_.valid()) throw IoError("cannot create listening socket");
    int one = 1;
    ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listener_.fd(), reinterpret_cast<sockaddr*>(&addr),
               sizeof(addr)) != 0)
      throw IoError("bind failed on port " + std::to_string(port));
    if (::listen(listener_.fd(), 1) != 0) throw IoError("listen failed");
    socklen_t len = sizeof(addr);
    ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  int port() const { return port_; }

  // Serves exactly one plant connection to completion.  The state persists
  // across steps for as long as the peer keeps stepping; there is no resume
  // after a disconnect.
  ControllerSession run(EncryptedController& ec, std::uint8_t reenc_rule,
                        double timeout_seconds = 30.0) {
    Socket conn(::accept(listener_.fd(), nullptr, nullptr));
    if (!conn.valid()) throw IoError("accept failed");
    listener_ = Socket();  // single session: stop listening immediately
    conn.set_recv_timeout(timeout_seconds);

    HelloInfo mine = hello_of(ec, reenc_rule);
    const Frame hello = recv_frame(conn);
    if (hello.type != MsgType::hello)
      throw IoError("protocol violation: expected HELLO first");
    HelloInfo theirs = HelloInfo::decode(hello.payload, mine.m);
    theirs.n_prime = mine.n_prime;  // the plant does not know the state dim
    if (!theirs.matches(mine)) {
      send_frame(conn, Frame{MsgType::bye, 0, {}});
      throw ValidationError("HELLO parameter mismatch; refusing session");
    }
    send_frame(conn, Frame{MsgType::hello, 0, mine.encode()});

    ControllerSession session;
    const int p = mine.p, nr = mine.nr, m = mine.m;
    for (std::uint64_t expected = 0;; ++expected) {
      const Frame f = recv_frame(conn);
      if (f.type == MsgType::bye) break;
      if (f.type != MsgType::sensor)
        throw IoError("protocol violation at step " +
                      std::to_string(expected) + ": expected SENSOR");
      if (f.step != expected)
        throw IoError("out-of-order step index " + std::to_string(f.step) +
                      " (expected " + std::to_string(expected) + ")");
      const std::size_t ct_bytes =
          static_cast<std::size_t>(ec.params.n + 1) * 8;
      if (f.payload.size() != (p + nr) * ct_bytes)
        throw IoError("SENSOR payload size mismatch");
      std::vector<std::uint8_t> ybuf(f.payload.begin(),
                                     f.payload.begin() + p * ct_bytes);
      std::vector<std::uint8_t> rbuf(f.payload.begin() + p * ct_bytes,
                                     f.payload.end());
      const auto yE = unpack_ciphertexts(ybuf, p, ec.params);
      const auto rE = unpack_ciphertexts(rbuf, nr, ec.params);

      const auto uE = ec.output(yE, rE);
      send_frame(conn, Frame{MsgType::actuate, f.step, pack_ciphertexts(uE)});

      const Frame re = recv_frame(conn);
      if (re.type != MsgType::reenc || re.step != f.step)
        throw IoError("protocol violation at step " + std::to_string(f.step) +
                      ": expected REENC");
      const auto uE_prime = unpack_ciphertexts(re.payload, m, ec.params);
      ec.update(yE, rE, uE_prime);
      ++session.steps_served;
    }
    return session;
  }

  static HelloInfo hello_of(const EncryptedController& ec,
                            std::uint8_t reenc_rule) {
    HelloInfo h;
    h.q0 = ec.params.q0;
    h.nu0 = ec.params.nu0;
    h.d = ec.params.d;
    h.n = ec.params.n;
    h.n_prime = static_cast<int>(ec.z.size());
    h.p = ec.mode == ParamMode::encrypted_params
              ? static_cast<int>(ec.GpE.empty() ? 0 : ec.GpE[0].size())
              : static_cast<int>(ec.Gp.cols());
    h.nr = ec.mode == ParamMode::encrypted_params
               ? static_cast<int>(ec.PpE.empty() ? 0 : ec.PpE[0].size())
               : static_cast<int>(ec.Pp.cols());
    h.m = static_cast<int>(ec.win.u_min.size());
    h.sc = ec.sc;
    h.win = ec.win;
    h.reenc_rule = reenc_rule;
    return h;
  }

 private:
  Socket listener_;
  int port_ = 0;
};

// ---------------------------------------------------------------------------
// plant endpoint (key holder)

struct PlantNetConfig {
  PlantLti plant;
  Reference ref;
  int horizon = 0;
  ScaleSet sc;
  OutputWindow win;
  LweParams params;
  SecretKey key;
  BackendKind backend_kind = BackendKind::lwe;
  ReencRule rule = ReencRule::paper;
  std::uint64_t rng_seed = 2;
  int nr = 1;
  bool realtime = false;
  double timeout_factor = 5.0;  // receive timeout = factor * Ts
};

inline Trace serve_plant(const std::string& host, int port,
                         const PlantNetConfig& cfg) {
  cfg.plant.validate();
  Socket conn(::socket(AF_INET, SOCK_STREAM, 0));
  if (!conn.valid()) throw IoError("cannot create socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw ConfigError("bad address: " + host);
  if (::connect(conn.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) !=
      0)
    throw IoError("connect failed to " + host + ":" + std::to_string(port));
  int one = 1;
  ::setsockopt(conn.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  conn.set_recv_timeout(std::max(1.0, cfg.timeout_factor * cfg.plant.Ts));

  const Backend be{cfg.backend_kind, cfg.params};
  ActuatorCodec codec{&cfg.key, be, cfg.win, cfg.sc, cfg.rule};
  CounterRng rng(cfg.rng_seed);

  HelloInfo mine;
  mine.q0 = cfg.params.q0;
  mine.nu0 = cfg.params.nu0;
  mine.d = cfg.params.d;
  mine.n = cfg.params.n;
  mine.n_prime = 0;  // filled below from the ack
  mine.p = static_cast<int>(cfg.plant.Cp.rows());
  mine.nr = cfg.nr;
  mine.m = static_cast<int>(cfg.win.u_min.size());
  mine.sc = cfg.sc;
  mine.win = cfg.win;
  mine.reenc_rule = cfg.rule == ReencRule::paper ? 0 : 1;

  // the controller owns n'; mirror it into our HELLO so the comparison is
  // symmetric
  {
    HelloInfo probe = mine;
    probe.n_prime = 0;
    send_frame(conn, Frame{MsgType::hello, 0, probe.encode()});
    const Frame ack = recv_frame(conn);
    if (ack.type == MsgType::bye)
      throw ValidationError("controller refused the session (HELLO mismatch)");
    if (ack.type != MsgType::hello) throw IoError("expected HELLO ack");
    const HelloInfo theirs = HelloInfo::decode(ack.payload, mine.m);
    HelloInfo check = mine;
    check.n_prime = theirs.n_prime;
    if (!theirs.matches(check))
      throw ValidationError("controller HELLO does not match scenario");
  }

  Trace tr;
  tr.mode = Mode::encrypted;
  tr.Ts = cfg.plant.Ts;
  VectorXd xp = cfg.plant.xp0;
  const auto t_start = std::chrono::steady_clock::now();

  for (int t = 0; t < cfg.horizon; ++t) {
    if (cfg.realtime) {
      const auto deadline =
          t_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(t * cfg.plant.Ts));
      std::this_thread::sleep_until(deadline);
    }
    const VectorXd y = cfg.plant.Cp * xp;
    const VectorXd r = cfg.ref.at(t * cfg.plant.Ts);
    const IVec yb = quantize_signal(y, cfg.sc.r1());
    const IVec rb = quantize_signal(r, cfg.sc.r1());
    const auto yE = codec.encrypt_inputs(yb, rng);
    const auto rE = codec.encrypt_inputs(rb, rng);
    std::vector<std::uint8_t> payload = pack_ciphertexts(yE);
    const auto rpart = pack_ciphertexts(rE);
    payload.insert(payload.end(), rpart.begin(), rpart.end());
    send_frame(conn, Frame{MsgType::sensor, static_cast<std::uint64_t>(t),
                           std::move(payload)});

    const Frame act = recv_frame(conn);
    if (act.type != MsgType::actuate ||
        act.step != static_cast<std::uint64_t>(t))
      throw IoError("protocol violation: expected ACTUATE for step " +
                    std::to_string(t));
    const auto uE = unpack_ciphertexts(act.payload, mine.m, cfg.params);
    const ActuatorDecode dec = codec.decode(uE, rng);
    send_frame(conn, Frame{MsgType::reenc, static_cast<std::uint64_t>(t),
                           pack_ciphertexts(dec.reenc)});

    tr.y.push_back(y);
    tr.u.push_back(dec.u_real);
    tr.r.push_back(r);
    tr.u_window.push_back(dec.u_window);
    tr.u_prime.push_back(dec.reenc_value);
    xp = integrate_zoh_rk4(cfg.plant, xp, dec.u_real);
  }
  send_frame(conn, Frame{MsgType::bye, static_cast<std::uint64_t>(cfg.horizon),
                         {}});
  return tr;
}

}  // namespace ectl::net
