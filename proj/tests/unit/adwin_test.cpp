#include <doctest.h>

#include <cmath>
#include <deque>
#include <random>
#include <sstream>

#include "mlhat/adwin.hpp"
#include "mlhat/serialization.hpp"

using namespace mlhat;

TEST_SUITE("drift-adwin") {

TEST_CASE("empty and trivial estimates") {
    Adwin a;
    CHECK(a.empty());
    CHECK(a.width() == 0);
    CHECK(a.estimate() == 0.0);
    a.update(0.0);
    a.update(1.0);
    CHECK(a.estimate() == doctest::Approx(0.5));
    CHECK(a.width() == 2);
}

TEST_CASE("constant stream never warns") {
    Adwin a;
    for (int i = 0; i < 10'000; ++i) CHECK(a.update(0.0) == DetectorSignal::Stable);
    CHECK(a.width() == 10'000);
    CHECK(a.detections() == 0);
}

TEST_CASE("stationary width grows by one per update") {
    Adwin a;
    std::mt19937_64 rng(1);
    std::bernoulli_distribution b(0.5);
    for (int i = 0; i < 100; ++i) a.update(b(rng));
    CHECK(a.width() == 100);
}

TEST_CASE("window mean equals the mean of retained values") {
    // Values are only dropped oldest-first, so the retained window is the suffix of the input.
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    Adwin a;
    std::deque<double> kept;
    for (int i = 0; i < 20'000; ++i) {
        const double x = i < 10'000 ? 0.2 * u(rng) : 0.6 + 0.4 * u(rng);
        a.update(x);
        kept.push_back(x);
        while (kept.size() > a.width()) kept.pop_front();
        if (i % 97 == 0) {
            double s = 0;
            for (double v : kept) s += v;
            CHECK(std::abs(a.estimate() - s / static_cast<double>(kept.size())) <= 1e-9);
        }
    }
}

TEST_CASE("bucket memory is logarithmic") {
    Adwin a(0.05, 5);
    std::mt19937_64 rng(3);
    std::bernoulli_distribution b(0.3);
    for (std::size_t n = 1; n <= 50'000; ++n) {
        a.update(b(rng));
        if (n % 1000 == 0) {
            const double bound = 5.0 * std::ceil(std::log2(static_cast<double>(a.width()) + 1.0)) + 5.0;
            CHECK(static_cast<double>(a.bucket_count()) <= bound);
        }
    }
}

TEST_CASE("shift from 0.1 to 0.9 is detected quickly") {
    int detected = 0;
    int recovered = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::bernoulli_distribution lo(0.1), hi(0.9);
        Adwin a(0.05);
        for (int i = 0; i < 5000; ++i) a.update(lo(rng));
        bool hit = false;
        std::size_t width_before = a.width();
        for (int i = 0; i < 2000; ++i) {
            if (a.update(hi(rng)) == DetectorSignal::Warning && i < 1000) hit = true;
        }
        detected += hit;
        recovered += std::abs(a.estimate() - 0.9) <= 0.05;
        CHECK(a.width() < width_before + 2000);
    }
    CHECK(detected >= 95);
    CHECK(recovered >= 95);
}

TEST_CASE("few false alarms on stationary Bernoulli streams") {
    int alarmed = 0;
    for (std::uint64_t seed = 100; seed < 150; ++seed) {
        std::mt19937_64 rng(seed);
        std::bernoulli_distribution b(0.3);
        Adwin a(0.002);
        bool any = false;
        for (int i = 0; i < 20'000; ++i) any |= a.update(b(rng)) == DetectorSignal::Warning;
        alarmed += any;
    }
    CHECK(alarmed <= 5);
}

TEST_CASE("out of range inputs are clamped and counted") {
    Adwin a;
    a.update(1.5);
    a.update(-0.5);
    CHECK(a.clamped_inputs() == 2);
    CHECK(a.estimate() == doctest::Approx(0.5));
}

TEST_CASE("reset and snapshot") {
    Adwin a(0.01, 4);
    std::mt19937_64 rng(4);
    std::bernoulli_distribution b(0.4);
    for (int i = 0; i < 3000; ++i) a.update(b(rng));
    std::stringstream buf;
    BinaryWriter w(buf);
    a.save(w);
    BinaryReader r(buf);
    Adwin c = Adwin::load(r);
    CHECK(c.width() == a.width());
    CHECK(c.estimate() == a.estimate());
    CHECK(c.bucket_count() == a.bucket_count());
    for (int i = 0; i < 500; ++i) {
        const bool x = b(rng);
        CHECK(a.update(x) == c.update(x));
    }
    CHECK(a.estimate() == c.estimate());
    a.reset();
    CHECK(a.empty());
    CHECK(a.delta() == 0.01);
}

}
