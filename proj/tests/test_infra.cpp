#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <complex>
#include <random>
#include <vector>

#include "fthms/dense_solver.hpp"
#include "fthms/sha256.hpp"
#include "fthms/threadpool.hpp"

using fthms::cplx;
using Catch::Approx;

TEST_CASE("SHA-256 matches published test vectors", "[infra]") {
    CHECK(fthms::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(fthms::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(fthms::sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");

    // Streaming in odd-sized chunks gives the same digest.
    const std::string msg(1000, 'a');
    fthms::Sha256 h;
    h.update(msg.substr(0, 3));
    h.update(msg.substr(3, 700));
    h.update(msg.substr(703));
    CHECK(h.hex_digest() == fthms::sha256_hex(msg));
}

TEST_CASE("Thread pool runs every iteration exactly once", "[infra]") {
    for (int workers : {1, 4}) {
        fthms::ThreadPool pool(workers);
        const int n = 1000;
        std::vector<std::atomic<int>> hits(n);
        pool.parallel_for(n, [&](int i) { hits[i].fetch_add(1); });
        for (int i = 0; i < n; ++i) REQUIRE(hits[i].load() == 1);
    }
}

TEST_CASE("Thread pool propagates exceptions", "[infra]") {
    fthms::ThreadPool pool(3);
    CHECK_THROWS_AS(pool.parallel_for(100,
                                      [](int i) {
                                          if (i == 37) throw std::runtime_error("boom");
                                      }),
                    std::runtime_error);
    // Pool stays usable afterwards.
    std::atomic<int> sum{0};
    pool.parallel_for(10, [&](int i) { sum += i; });
    CHECK(sum.load() == 45);
}

TEST_CASE("Direct solver and GMRES agree on a random complex system", "[infra]") {
    const int n = 60;
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    fthms::MatC a = fthms::MatC::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) += 0.1 * cplx{u(rng), u(rng)};
    fthms::VecC b(n);
    for (int i = 0; i < n; ++i) b(i) = cplx{u(rng), u(rng)};

    fthms::DirectSolver direct(a);
    const fthms::VecC xd = direct.solve(b);
    CHECK((a * xd - b).norm() / b.norm() < 1e-12);

    const auto it = fthms::gmres(a, b, 1e-12, 200);
    CHECK(it.converged);
    CHECK((a * it.x - b).norm() / b.norm() < 1e-10);
    CHECK((it.x - xd).norm() / xd.norm() < 1e-9);
    CHECK(it.iterations > 0);
    CHECK(it.iterations <= n);
}

TEST_CASE("GMRES converges fast for a clustered spectrum", "[infra]") {
    // Identity plus small random perturbation: iteration count should stay
    // far below the dimension, mirroring second-kind integral equations.
    const int n = 300;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    fthms::MatC a = fthms::MatC::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) += (0.02 / n) * cplx{u(rng), u(rng)};
    fthms::VecC b = fthms::VecC::Ones(n);

    const auto it = fthms::gmres(a, b, 1e-10, 100);
    CHECK(it.converged);
    CHECK(it.iterations < 10);
}

TEST_CASE("GMRES handles a zero right-hand side", "[infra]") {
    fthms::MatC a = fthms::MatC::Identity(5, 5);
    const auto it = fthms::gmres(a, fthms::VecC::Zero(5));
    CHECK(it.converged);
    CHECK(it.iterations == 0);
    CHECK(it.x.norm() == 0.0);
}
