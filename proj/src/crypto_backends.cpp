#include "pqdns/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>

#include <map>
#include <memory>
#include <mutex>

namespace pqdns
{
  namespace
  {
    template <auto Fn>
    struct Deleter
    {
      template <typename T>
      void operator()(T* p) const
      {
        Fn(p);
      }
    };

    using BnPtr = std::unique_ptr<BIGNUM, Deleter<BN_free>>;
    using BnCtxPtr = std::unique_ptr<BN_CTX, Deleter<BN_CTX_free>>;
    using PkeyPtr = std::unique_ptr<EVP_PKEY, Deleter<EVP_PKEY_free>>;
    using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, Deleter<EVP_PKEY_CTX_free>>;
    using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, Deleter<EVP_MD_CTX_free>>;
    using ParamBldPtr = std::unique_ptr<OSSL_PARAM_BLD, Deleter<OSSL_PARAM_BLD_free>>;
    using ParamPtr = std::unique_ptr<OSSL_PARAM, Deleter<OSSL_PARAM_free>>;
    using GroupPtr = std::unique_ptr<EC_GROUP, Deleter<EC_GROUP_free>>;
    using PointPtr = std::unique_ptr<EC_POINT, Deleter<EC_POINT_free>>;
    using EcSigPtr = std::unique_ptr<ECDSA_SIG, Deleter<ECDSA_SIG_free>>;

    void check(bool ok, const char* what)
    {
      if (!ok)
        fail(Errc::crypto_failure, what);
    }

    BnPtr bn(ByteView b)
    {
      BnPtr p(BN_bin2bn(b.data(), static_cast<int>(b.size()), nullptr));
      check(p != nullptr, "BN_bin2bn");
      return p;
    }

    Bytes bn_bytes(const BIGNUM* b, std::size_t width)
    {
      Bytes out(width);
      check(
        BN_bn2binpad(b, out.data(), static_cast<int>(width)) == static_cast<int>(width),
        "BN_bn2binpad");
      return out;
    }

    PkeyPtr pkey_from_params(const char* type, OSSL_PARAM_BLD* bld, int selection)
    {
      ParamPtr params(OSSL_PARAM_BLD_to_param(bld));
      if (!params)
        return nullptr;
      PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, type, nullptr));
      if (!ctx || EVP_PKEY_fromdata_init(ctx.get()) != 1)
        return nullptr;
      EVP_PKEY* raw = nullptr;
      if (EVP_PKEY_fromdata(ctx.get(), &raw, selection, params.get()) != 1)
        return nullptr;
      return PkeyPtr(raw);
    }

    Bytes digest_sign(EVP_PKEY* key, ByteView message)
    {
      MdCtxPtr md(EVP_MD_CTX_new());
      check(md != nullptr, "EVP_MD_CTX_new");
      check(
        EVP_DigestSignInit(md.get(), nullptr, EVP_sha256(), nullptr, key) == 1,
        "EVP_DigestSignInit");
      std::size_t len = 0;
      check(
        EVP_DigestSign(md.get(), nullptr, &len, message.data(), message.size()) == 1,
        "EVP_DigestSign");
      Bytes sig(len);
      check(
        EVP_DigestSign(md.get(), sig.data(), &len, message.data(), message.size()) == 1,
        "EVP_DigestSign");
      sig.resize(len);
      return sig;
    }

    bool digest_verify(EVP_PKEY* key, ByteView message, ByteView sig)
    {
      MdCtxPtr md(EVP_MD_CTX_new());
      if (!md || EVP_DigestVerifyInit(md.get(), nullptr, EVP_sha256(), nullptr, key) != 1)
        return false;
      return EVP_DigestVerify(
               md.get(), sig.data(), sig.size(), message.data(), message.size()) == 1;
    }

    Bytes concat(std::initializer_list<ByteView> parts)
    {
      Bytes out;
      for (auto p : parts)
        out.insert(out.end(), p.begin(), p.end());
      return out;
    }

    ByteView text_view(std::string_view s)
    {
      return ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    }

    // ------------------------------------------------------------- mock

    class MockBackend final : public SignatureBackend
    {
    public:
      MockBackend(std::size_t sig_len, std::size_t pub_len) :
        sig_len_(sig_len),
        pub_len_(pub_len)
      {}

      KeyMaterial generate(ByteView seed) const override
      {
        return {Bytes(seed.begin(), seed.end()), shake256(seed, pub_len_)};
      }

      Bytes sign(ByteView secret, ByteView message) const override
      {
        auto pub = shake256(secret, pub_len_);
        return shake256(concat({view(pub), message}), sig_len_);
      }

      bool verify(ByteView pub, ByteView message, ByteView sig) const override
      {
        if (sig.size() != sig_len_ || pub.size() != pub_len_)
          return false;
        auto expect = shake256(concat({pub, message}), sig_len_);
        return std::equal(expect.begin(), expect.end(), sig.begin());
      }

    private:
      std::size_t sig_len_;
      std::size_t pub_len_;
    };

    // ------------------------------------------------------------ ECDSA

    class EcdsaP256Backend final : public SignatureBackend
    {
    public:
      EcdsaP256Backend() : group_(EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1))
      {
        check(group_ != nullptr, "EC_GROUP_new_by_curve_name");
      }

      KeyMaterial generate(ByteView seed) const override
      {
        BnCtxPtr ctx(BN_CTX_new());
        const BIGNUM* order = EC_GROUP_get0_order(group_.get());
        for (std::uint32_t counter = 0;; ++counter)
        {
          std::uint8_t ctr[4] = {
            static_cast<std::uint8_t>(counter >> 24),
            static_cast<std::uint8_t>(counter >> 16),
            static_cast<std::uint8_t>(counter >> 8),
            static_cast<std::uint8_t>(counter)};
          auto candidate = sha256(concat({text_view("ecdsa-p256"), seed, ctr}));
          auto d = bn(candidate);
          if (BN_is_zero(d.get()) || BN_cmp(d.get(), order) >= 0)
            continue;
          return {candidate, public_point(d.get(), ctx.get())};
        }
      }

      Bytes sign(ByteView secret, ByteView message) const override
      {
        if (secret.size() != 32)
          fail(Errc::crypto_failure, "ECDSA secret must be 32 bytes");
        BnCtxPtr ctx(BN_CTX_new());
        auto d = bn(secret);
        auto pub = public_point(d.get(), ctx.get());
        Bytes pub65{0x04};
        pub65.insert(pub65.end(), pub.begin(), pub.end());

        ParamBldPtr bld(OSSL_PARAM_BLD_new());
        check(
          OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0) &&
            OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_PRIV_KEY, d.get()) &&
            OSSL_PARAM_BLD_push_octet_string(
              bld.get(), OSSL_PKEY_PARAM_PUB_KEY, pub65.data(), pub65.size()),
          "ECDSA params");
        auto key = pkey_from_params("EC", bld.get(), EVP_PKEY_KEYPAIR);
        check(key != nullptr, "ECDSA private key");
        auto der = digest_sign(key.get(), message);

        const unsigned char* p = der.data();
        EcSigPtr sig(d2i_ECDSA_SIG(nullptr, &p, static_cast<long>(der.size())));
        check(sig != nullptr, "d2i_ECDSA_SIG");
        const BIGNUM* r = nullptr;
        const BIGNUM* s = nullptr;
        ECDSA_SIG_get0(sig.get(), &r, &s);
        auto out = bn_bytes(r, 32);
        auto sb = bn_bytes(s, 32);
        out.insert(out.end(), sb.begin(), sb.end());
        return out;
      }

      bool verify(ByteView pub, ByteView message, ByteView sig) const override
      {
        if (pub.size() != 64 || sig.size() != 64)
          return false;
        Bytes pub65{0x04};
        pub65.insert(pub65.end(), pub.begin(), pub.end());
        ParamBldPtr bld(OSSL_PARAM_BLD_new());
        if (
          !OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0) ||
          !OSSL_PARAM_BLD_push_octet_string(
            bld.get(), OSSL_PKEY_PARAM_PUB_KEY, pub65.data(), pub65.size()))
          return false;
        auto key = pkey_from_params("EC", bld.get(), EVP_PKEY_PUBLIC_KEY);
        if (!key)
          return false;

        EcSigPtr ec(ECDSA_SIG_new());
        BIGNUM* r = BN_bin2bn(sig.data(), 32, nullptr);
        BIGNUM* s = BN_bin2bn(sig.data() + 32, 32, nullptr);
        if (!ec || !r || !s || ECDSA_SIG_set0(ec.get(), r, s) != 1)
        {
          BN_free(r);
          BN_free(s);
          return false;
        }
        unsigned char* der = nullptr;
        int len = i2d_ECDSA_SIG(ec.get(), &der);
        if (len <= 0)
          return false;
        bool ok = digest_verify(
          key.get(), message, ByteView(der, static_cast<std::size_t>(len)));
        OPENSSL_free(der);
        return ok;
      }

    private:
      Bytes public_point(const BIGNUM* d, BN_CTX* ctx) const
      {
        PointPtr point(EC_POINT_new(group_.get()));
        check(
          point && EC_POINT_mul(group_.get(), point.get(), d, nullptr, nullptr, ctx) == 1,
          "EC_POINT_mul");
        Bytes out(65);
        check(
          EC_POINT_point2oct(
            group_.get(), point.get(), POINT_CONVERSION_UNCOMPRESSED, out.data(), out.size(),
            ctx) == 65,
          "EC_POINT_point2oct");
        return Bytes(out.begin() + 1, out.end());
      }

      GroupPtr group_;
    };

    // -------------------------------------------------------------- RSA

    constexpr std::size_t rsa_prime_bytes = 128;
    constexpr std::size_t rsa_modulus_bytes = 256;

    class Rsa2048Backend final : public SignatureBackend
    {
    public:
      KeyMaterial generate(ByteView seed) const override
      {
        Bytes key(seed.begin(), seed.end());
        {
          std::lock_guard lock(mutex_);
          if (auto it = memo_.find(key); it != memo_.end())
            return it->second;
        }
        BnCtxPtr ctx(BN_CTX_new());
        auto p = prime(seed, "rsa-p", ctx.get());
        auto q = prime(seed, "rsa-q", ctx.get());
        check(BN_cmp(p.get(), q.get()) != 0, "RSA primes collide");
        BnPtr n(BN_new());
        check(BN_mul(n.get(), p.get(), q.get(), ctx.get()) == 1, "BN_mul");
        check(BN_num_bits(n.get()) == 2048, "RSA modulus size");

        KeyMaterial km;
        km.secret = bn_bytes(p.get(), rsa_prime_bytes);
        auto qb = bn_bytes(q.get(), rsa_prime_bytes);
        km.secret.insert(km.secret.end(), qb.begin(), qb.end());
        km.public_key = {0x03, 0x01, 0x00, 0x01};
        auto nb = bn_bytes(n.get(), rsa_modulus_bytes);
        km.public_key.insert(km.public_key.end(), nb.begin(), nb.end());

        std::lock_guard lock(mutex_);
        memo_.emplace(std::move(key), km);
        return km;
      }

      Bytes sign(ByteView secret, ByteView message) const override
      {
        if (secret.size() != 2 * rsa_prime_bytes)
          fail(Errc::crypto_failure, "RSA secret must hold two 1024-bit primes");
        BnCtxPtr ctx(BN_CTX_new());
        auto p = bn(secret.first(rsa_prime_bytes));
        auto q = bn(secret.subspan(rsa_prime_bytes));
        BnPtr n(BN_new()), e(BN_new()), d(BN_new()), phi(BN_new()), p1(BN_new()),
          q1(BN_new()), dp(BN_new()), dq(BN_new()), qinv(BN_new());
        check(
          BN_set_word(e.get(), 65537) && BN_mul(n.get(), p.get(), q.get(), ctx.get()) &&
            BN_sub(p1.get(), p.get(), BN_value_one()) &&
            BN_sub(q1.get(), q.get(), BN_value_one()) &&
            BN_mul(phi.get(), p1.get(), q1.get(), ctx.get()) &&
            BN_mod_inverse(d.get(), e.get(), phi.get(), ctx.get()) &&
            BN_mod(dp.get(), d.get(), p1.get(), ctx.get()) &&
            BN_mod(dq.get(), d.get(), q1.get(), ctx.get()) &&
            BN_mod_inverse(qinv.get(), q.get(), p.get(), ctx.get()),
          "RSA private exponent");

        ParamBldPtr bld(OSSL_PARAM_BLD_new());
        check(
          OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_N, n.get()) &&
            OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_E, e.get()) &&
            OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_D, d.get()) &&
            OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_FACTOR1, p.get()) &&
            OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_FACTOR2, q.get()) &&
            OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_EXPONENT1, dp.get()) &&
            OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_EXPONENT2, dq.get()) &&
            OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_COEFFICIENT1, qinv.get()),
          "RSA params");
        auto key = pkey_from_params("RSA", bld.get(), EVP_PKEY_KEYPAIR);
        check(key != nullptr, "RSA private key");
        return digest_sign(key.get(), message);
      }

      bool verify(ByteView pub, ByteView message, ByteView sig) const override
      {
        // RFC 3110: exponent length (1 byte, or 0 then 2 bytes), exponent, modulus.
        if (pub.size() < 3)
          return false;
        std::size_t pos = 1;
        std::size_t elen = pub[0];
        if (elen == 0)
        {
          elen = static_cast<std::size_t>(pub[1]) << 8 | pub[2];
          pos = 3;
        }
        if (elen == 0 || pos + elen >= pub.size())
          return false;
        auto e = bn(pub.subspan(pos, elen));
        auto n = bn(pub.subspan(pos + elen));
        ParamBldPtr bld(OSSL_PARAM_BLD_new());
        if (
          !OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_N, n.get()) ||
          !OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_E, e.get()))
          return false;
        auto key = pkey_from_params("RSA", bld.get(), EVP_PKEY_PUBLIC_KEY);
        return key && digest_verify(key.get(), message, sig);
      }

    private:
      /// Deterministic 1024-bit prime: SHAKE256-derived start point with the
      /// top two bits set, then an upward search over odd numbers.
      static BnPtr prime(ByteView seed, std::string_view label, BN_CTX* ctx)
      {
        auto start = shake256(concat({text_view(label), seed}), rsa_prime_bytes);
        start[0] |= 0xC0;
        start[rsa_prime_bytes - 1] |= 0x01;
        auto p = bn(start);
        BnPtr p1(BN_new()), e(BN_new()), g(BN_new());
        BN_set_word(e.get(), 65537);
        for (;;)
        {
          if (BN_check_prime(p.get(), ctx, nullptr) == 1)
          {
            BN_sub(p1.get(), p.get(), BN_value_one());
            BN_gcd(g.get(), p1.get(), e.get(), ctx);
            if (BN_is_one(g.get()))
              return p;
          }
          BN_add_word(p.get(), 2);
        }
      }

      mutable std::mutex mutex_;
      mutable std::map<Bytes, KeyMaterial> memo_;
    };
  }

  Bytes sha256(ByteView data)
  {
    Bytes out(32);
    unsigned int len = 0;
    check(
      EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) == 1,
      "SHA-256");
    return out;
  }

  Bytes shake256(ByteView data, std::size_t out_len)
  {
    MdCtxPtr md(EVP_MD_CTX_new());
    Bytes out(out_len);
    check(
      md && EVP_DigestInit_ex(md.get(), EVP_shake256(), nullptr) == 1 &&
        EVP_DigestUpdate(md.get(), data.data(), data.size()) == 1 &&
        EVP_DigestFinalXOF(md.get(), out.data(), out.size()) == 1,
      "SHAKE256");
    return out;
  }

  std::shared_ptr<const SignatureBackend> make_mock_backend(
    std::size_t sig_len, std::size_t pubkey_len)
  {
    return std::make_shared<MockBackend>(sig_len, pubkey_len);
  }

  std::shared_ptr<const SignatureBackend> make_ecdsa_p256_backend()
  {
    return std::make_shared<EcdsaP256Backend>();
  }

  std::shared_ptr<const SignatureBackend> make_rsa2048_backend()
  {
    return std::make_shared<Rsa2048Backend>();
  }
}
