#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rngml/errors.hpp"
#include "rngml/fft.hpp"
#include "rngml/rng.hpp"
#include "rngml/stats.hpp"

using namespace rngml;

namespace {

SampleStream byte_stream(std::vector<std::int16_t> v) {
    SampleStream s;
    s.bit_depth = 8;
    s.unsigned_range = true;
    s.values = std::move(v);
    return s;
}

} // namespace

TEST_CASE("fft wrapper matches a brute-force dft") {
    Rng rng(11);
    for (std::size_t n : {8u, 16u, 64u, 100u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.next_normal();
        auto spec = rfft(x);
        REQUIRE(spec.size() == n / 2 + 1);
        for (std::size_t k = 0; k < spec.size(); ++k) {
            std::complex<double> want(0.0, 0.0);
            for (std::size_t t = 0; t < n; ++t) {
                const double ang = -2.0 * M_PI * double(k) * double(t) / double(n);
                want += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            CHECK(std::abs(spec[k] - want) < 1e-9);
        }
        auto back = irfft(spec, n);
        for (std::size_t t = 0; t < n; ++t)
            CHECK(back[t] == doctest::Approx(x[t]).epsilon(1e-12));
    }
}

TEST_CASE("overlap-save convolution equals schoolbook convolution") {
    Rng rng(12);
    // force the overlap-save path with an input much longer than the block
    std::vector<double> x(70000), h(401);
    for (auto& v : x) v = rng.next_normal();
    for (auto& v : h) v = rng.next_normal();
    auto fast = fft_convolve(x, h);
    auto slow = convolve_direct(x, h);
    REQUIRE(fast.size() == slow.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i)
        worst = std::max(worst, std::abs(fast[i] - slow[i]));
    CHECK(worst < 1e-9);

    // short path too
    auto f2 = fft_convolve({1.0, 2.0, 3.0}, {1.0, -1.0});
    REQUIRE(f2.size() == 4);
    CHECK(f2[0] == doctest::Approx(1.0));
    CHECK(f2[1] == doctest::Approx(1.0));
    CHECK(f2[2] == doctest::Approx(1.0));
    CHECK(f2[3] == doctest::Approx(-3.0));
}

TEST_CASE("histogram covers the declared range and counts correctly") {
    auto s = byte_stream({0, 0, 7, 255});
    auto h = histogram(s);
    CHECK(h.lo == 0);
    REQUIRE(h.counts.size() == 256);
    CHECK(h.counts[0] == 2);
    CHECK(h.counts[7] == 1);
    CHECK(h.counts[255] == 1);
    CHECK(h.counts[1] == 0);
    CHECK(h.total == 4);
    CHECK(h.probability(0) == doctest::Approx(0.5));
    CHECK(h.probability(300) == 0.0);
}

TEST_CASE("guessing probability and min-entropy on exact distributions") {
    // uniform over all 256 symbols
    std::vector<std::int16_t> v;
    for (int rep = 0; rep < 4; ++rep)
        for (int b = 0; b < 256; ++b) v.push_back(std::int16_t(b));
    auto g = guessing_probability(histogram(byte_stream(std::move(v))));
    CHECK(g.p_g == doctest::Approx(1.0 / 256).epsilon(1e-12));
    CHECK(min_entropy(g.p_g) == doctest::Approx(8.0).epsilon(1e-12));

    // degenerate single-symbol stream
    auto g1 = guessing_probability(histogram(byte_stream({42, 42, 42})));
    CHECK(g1.p_g == 1.0);
    CHECK(g1.mode_symbol == 42);
    CHECK(min_entropy(1.0) == 0.0);

    // the worst-case probability seen on a realistic quantum arm
    CHECK(min_entropy(0.0137) == doctest::Approx(6.18968).epsilon(1e-5));
    CHECK(std::abs(min_entropy(0.0137) - 6.19) < 0.01);
}

TEST_CASE("advantage is measured against the wider of two deviations") {
    // static-guess binomial sd at p_g = 1/256 over 1e4 windows
    const double p_g = 1.0 / 256;
    const double binom = std::sqrt(p_g * (1 - p_g) / 1e4);
    // tiny observed spread: binomial sd dominates
    CHECK(advantage_sigma(p_g + 2 * binom, binom / 10, p_g, 10000) ==
          doctest::Approx(2.0).epsilon(1e-9));
    // large observed spread dominates instead
    CHECK(advantage_sigma(p_g + 0.02, 0.01, p_g, 10000) ==
          doctest::Approx(2.0).epsilon(1e-9));
    // no advantage
    CHECK(advantage_sigma(p_g, 0.0, p_g, 10000) == doctest::Approx(0.0));
}

TEST_CASE("welch psd is flat for white noise and satisfies parseval") {
    Rng rng(13);
    std::vector<double> x(1 << 19);
    for (auto& v : x) v = rng.next_normal() * 2.0;
    auto psd = welch_psd(x, 1024);
    REQUIRE(psd.power.size() == 513);

    // parseval: integrated density equals the variance
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= double(x.size());
    double integ = 0.0;
    for (double p : psd.power) integ += p * psd.bin_width;
    CHECK(integ == doctest::Approx(var).epsilon(0.05));

    // flat within +-3 dB of the median over interior bins (DC and Nyquist
    // are not doubled by the one-sided convention, so they sit 3 dB low
    // by construction)
    std::vector<double> sorted(psd.power.begin() + 1, psd.power.end() - 1);
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    for (std::size_t k = 1; k + 1 < psd.power.size(); ++k) {
        CHECK(10.0 * std::log10(psd.power[k] / median) > -3.0);
        CHECK(10.0 * std::log10(psd.power[k] / median) < 3.0);
    }
}

TEST_CASE("welch psd resolves a sinusoid 30 dB above the floor") {
    Rng rng(14);
    const double f = 0.125; // exactly on a bin for segment 1024
    std::vector<double> x(1 << 18);
    for (std::size_t t = 0; t < x.size(); ++t)
        x[t] = 3.0 * std::cos(2.0 * M_PI * f * double(t)) + 0.1 * rng.next_normal();
    auto psd = welch_psd(x, 1024);
    std::size_t peak = 0;
    for (std::size_t k = 1; k < psd.power.size(); ++k)
        if (psd.power[k] > psd.power[peak]) peak = k;
    CHECK(double(peak) * psd.bin_width == doctest::Approx(f).epsilon(1e-9));
    std::vector<double> sorted = psd.power;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    CHECK(10.0 * std::log10(psd.power[peak] / median) > 30.0);
}

TEST_CASE("autocorrelation basics") {
    // r(0) is exactly 1 by normalization
    Rng rng(15);
    std::vector<double> x(5000);
    for (auto& v : x) v = rng.next_normal();
    auto r = autocorrelation(x, 100);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-12));

    // alternating series: r(1) = -1 up to the mean-removal edge effect
    std::vector<double> alt(4096);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = (i % 2 == 0) ? 1.0 : -1.0;
    auto ra = autocorrelation(alt, 4);
    CHECK(ra[1] == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(ra[2] == doctest::Approx(1.0).epsilon(1e-3));

    CHECK(autocorr_band(5000000) == doctest::Approx(4.47e-4).epsilon(1e-2));
}

TEST_CASE("iid samples stay inside the autocorrelation band") {
    Rng rng(16);
    std::vector<double> x(1 << 20);
    for (auto& v : x) v = rng.next_normal();
    auto r = autocorrelation(x, 1000);
    const double band = 3.0 * autocorr_band(x.size());
    std::size_t inside = 0;
    for (std::size_t k = 1; k <= 1000; ++k)
        if (std::abs(r[k]) <= band) ++inside;
    // 3-sigma band: expect ~99.7% inside, demand at least 99%
    CHECK(inside >= 990);
}

TEST_CASE("cross correlation rails and independence") {
    Rng rng(17);
    std::vector<double> x(100000), y(100000), z(100000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.next_normal();
        y[i] = -x[i];
        z[i] = rng.next_normal();
    }
    CHECK(cross_correlation(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cross_correlation(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(cross_correlation(x, z)) < 3.0 / std::sqrt(double(x.size())));
}

TEST_CASE("conditional min-entropy matches an independent reference") {
    // frozen from a high-precision reference implementation
    CHECK(conditional_min_entropy(1.2, 0.35, 16, 4.0, 13) ==
          doctest::Approx(5.320137889573952).epsilon(1e-7));
    CHECK(conditional_min_entropy(1.2, 0.0, 16, 4.0, 13) ==
          doctest::Approx(11.182575641597284).epsilon(1e-7));
    // heavy clipping: the rails soak up most of the mass
    CHECK(conditional_min_entropy(1.2, 0.35, 16, 1.0, 13) ==
          doctest::Approx(0.427947881012741).epsilon(1e-7));
}

TEST_CASE("conditional min-entropy properties") {
    // no classical part: equals the plain discretized-gaussian bound
    const double h0 = conditional_min_entropy(2.0, 0.0, 16, 8.0, 13);
    const double h1 = conditional_min_entropy(2.0, 1e-9, 16, 8.0, 13);
    CHECK(h0 == doctest::Approx(h1).epsilon(1e-6));

    // more classical side information never increases the bound
    const double ha = conditional_min_entropy(2.0, 0.5, 16, 8.0, 13);
    const double hb = conditional_min_entropy(2.0, 1.5, 16, 8.0, 13);
    CHECK(ha <= h0 + 1e-12);
    CHECK(hb <= ha + 1e-12);

    // grid refinement is converged at the default resolution
    const double coarse = conditional_min_entropy(1.2, 0.35, 16, 4.0, 13, 2001);
    const double fine = conditional_min_entropy(1.2, 0.35, 16, 4.0, 13, 4001);
    CHECK(std::abs(coarse - fine) < 1e-3);

    CHECK_THROWS_AS(conditional_min_entropy(1.0, 1.0, 16, 4.0, 13), ContractError);
    CHECK_THROWS_AS(conditional_min_entropy(1.0, 0.1, 16, -4.0, 13), ContractError);
}

TEST_CASE("csv emitters write well-formed tables") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "rngml_stats_tests";
    fs::create_directories(dir);

    auto h = histogram(byte_stream({1, 1, 2}));
    write_histogram_csv(h, (dir / "h.csv").string());
    std::ifstream in(dir / "h.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "symbol,count,probability");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 256);

    write_autocorr_csv({1.0, -0.5}, (dir / "r.csv").string());
    write_psd_csv(Psd{{1.0, 2.0}, 0.5}, (dir / "p.csv").string());
    CHECK(fs::file_size(dir / "r.csv") > 0);
    CHECK(fs::file_size(dir / "p.csv") > 0);
}
