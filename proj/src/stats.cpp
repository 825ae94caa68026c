#include "rngml/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "rngml/errors.hpp"
#include "rngml/fft.hpp"

namespace rngml {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

} // namespace

double Histogram::probability(std::int64_t symbol) const {
    const std::int64_t idx = symbol - lo;
    if (idx < 0 || idx >= std::int64_t(counts.size())) return 0.0;
    require(total > 0, "histogram: empty");
    return double(counts[std::size_t(idx)]) / double(total);
}

Histogram histogram(const SampleStream& s) {
    require(!s.values.empty(), "histogram: empty stream");
    Histogram h;
    h.lo = s.min_value();
    h.counts.assign(std::size_t(s.max_value() - s.min_value() + 1), 0);
    for (auto v : s.values) h.counts[std::size_t(v - h.lo)]++;
    h.total = s.values.size();
    return h;
}

Guess guessing_probability(const Histogram& h) {
    require(h.total > 0, "guessing_probability: empty histogram");
    std::size_t best = 0;
    for (std::size_t i = 1; i < h.counts.size(); ++i)
        if (h.counts[i] > h.counts[best]) best = i;
    return {double(h.counts[best]) / double(h.total),
            h.lo + std::int64_t(best)};
}

double min_entropy(double p_g) {
    require(p_g > 0.0 && p_g <= 1.0, "min_entropy: probability out of (0, 1]");
    return -std::log2(p_g);
}

double advantage_sigma(double p_ml_mean, double p_ml_sd, double p_g,
                       std::uint64_t windows_per_set) {
    require(windows_per_set > 0, "advantage_sigma: empty test sets");
    require(p_g > 0.0 && p_g < 1.0, "advantage_sigma: p_g out of (0, 1)");
    require(p_ml_sd >= 0.0, "advantage_sigma: negative spread");
    const double binom_sd =
        std::sqrt(p_g * (1.0 - p_g) / double(windows_per_set));
    return (p_ml_mean - p_g) / std::max(p_ml_sd, binom_sd);
}

Psd welch_psd(const std::vector<double>& x, std::size_t segment) {
    require(segment >= 8 && (segment & (segment - 1)) == 0,
            "welch_psd: segment must be a power of two, at least 8");
    require(x.size() >= segment, "welch_psd: input shorter than one segment");

    const double mean =
        std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());

    std::vector<double> window(segment);
    double wss = 0.0;
    for (std::size_t i = 0; i < segment; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(segment));
        wss += window[i] * window[i];
    }

    Psd out;
    out.bin_width = 1.0 / double(segment);
    out.power.assign(segment / 2 + 1, 0.0);

    const std::size_t hop = segment / 2;
    std::size_t nseg = 0;
    std::vector<double> buf(segment);
    for (std::size_t start = 0; start + segment <= x.size(); start += hop) {
        for (std::size_t i = 0; i < segment; ++i)
            buf[i] = (x[start + i] - mean) * window[i];
        const auto spec = rfft(buf);
        for (std::size_t k = 0; k < out.power.size(); ++k)
            out.power[k] += std::norm(spec[k]);
        ++nseg;
    }
    // one-sided density: interior bins carry both halves of the spectrum,
    // normalization makes sum(power) * bin_width equal the variance
    const double scale = 1.0 / (wss * double(nseg));
    for (std::size_t k = 0; k < out.power.size(); ++k) {
        const bool edge = (k == 0) || (k == segment / 2);
        out.power[k] *= scale * (edge ? 1.0 : 2.0);
    }
    return out;
}

std::vector<double> autocorrelation(const std::vector<double>& x,
                                    std::size_t max_lag) {
    require(x.size() >= 2, "autocorrelation: need at least two samples");
    require(max_lag < x.size(), "autocorrelation: lag beyond series length");
    const std::size_t n = x.size();
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / double(n);

    const std::size_t m = next_pow2(2 * n);
    std::vector<double> pad(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) pad[i] = x[i] - mean;
    auto spec = rfft(pad);
    for (auto& c : spec) c = std::norm(c);
    auto corr = irfft(spec, m);

    require(corr[0] > 0.0, "autocorrelation: zero-variance input");
    std::vector<double> r(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) r[k] = corr[k] / corr[0];
    return r;
}

double autocorr_band(std::size_t n) {
    require(n > 0, "autocorr_band: empty series");
    return 1.0 / std::sqrt(double(n));
}

double cross_correlation(const std::vector<double>& x,
                         const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2,
            "cross_correlation: need equal-length series");
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    require(sxx > 0.0 && syy > 0.0, "cross_correlation: zero-variance input");
    return sxy / std::sqrt(sxx * syy);
}

double conditional_min_entropy(double sd_m, double sd_e, int bits,
                               double fullscale, int keep_bits,
                               int grid_points) {
    require(sd_m > 0.0 && sd_e >= 0.0, "conditional_min_entropy: bad deviations");
    require(sd_m > sd_e,
            "conditional_min_entropy: total deviation must exceed classical part");
    require(bits >= 2 && bits <= 16, "conditional_min_entropy: bits out of range");
    require(keep_bits >= 1 && keep_bits <= bits,
            "conditional_min_entropy: keep_bits out of range");
    require(fullscale > 0.0, "conditional_min_entropy: fullscale must be positive");
    require(grid_points >= 1, "conditional_min_entropy: empty grid");

    const double sd_q = std::sqrt(sd_m * sd_m - sd_e * sd_e);
    const std::int64_t full = (std::int64_t(1) << (bits - 1)) - 1;
    const double scale = double(full) / fullscale;
    const int shift = bits - keep_bits;
    const std::int64_t tmin = -(std::int64_t(1) << (keep_bits - 1));
    const std::int64_t tmax = (std::int64_t(1) << (keep_bits - 1)) - 1;
    const std::int64_t codes_per_bin = std::int64_t(1) << shift;

    // probability that the quantized, truncated reading lands in bin t,
    // given classical offset e
    auto bin_mass = [&](std::int64_t t, double e) {
        const std::int64_t k_lo = t * codes_per_bin;
        const std::int64_t k_hi = k_lo + codes_per_bin - 1;
        const double xlo = (k_lo <= -full)
                               ? -std::numeric_limits<double>::infinity()
                               : (double(k_lo) - 0.5) / scale;
        const double xhi = (k_hi >= full)
                               ? std::numeric_limits<double>::infinity()
                               : (double(k_hi) + 0.5) / scale;
        return normal_cdf((xhi - e) / sd_q) - normal_cdf((xlo - e) / sd_q);
    };

    double worst = 0.0;
    const int points = (sd_e == 0.0) ? 1 : grid_points;
    for (int gi = 0; gi < points; ++gi) {
        const double e =
            (points == 1)
                ? 0.0
                : -5.0 * sd_e + double(gi) * (10.0 * sd_e / double(points - 1));
        // restrict the bin scan to +-8 quantum deviations around e; mass
        // outside is far below any candidate maximum
        std::int64_t lo_t =
            std::int64_t(std::floor((e - 8.0 * sd_q) * scale)) >> shift;
        std::int64_t hi_t =
            (std::int64_t(std::ceil((e + 8.0 * sd_q) * scale)) >> shift) + 1;
        lo_t = std::max(tmin, lo_t - 1);
        hi_t = std::min(tmax, hi_t);
        for (std::int64_t t = lo_t; t <= hi_t; ++t)
            worst = std::max(worst, bin_mass(t, e));
        // clipped edge bins always considered: they grow as e drifts out
        worst = std::max(worst, bin_mass(tmin, e));
        worst = std::max(worst, bin_mass(tmax, e));
    }
    require(worst > 0.0, "conditional_min_entropy: degenerate distribution");
    return -std::log2(worst);
}

std::vector<double> stream_to_doubles(const SampleStream& s) {
    std::vector<double> out(s.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = double(s.values[i]);
    return out;
}

void write_histogram_csv(const Histogram& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "symbol,count,probability\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << (h.lo + std::int64_t(i)) << "," << h.counts[i] << ","
            << (double(h.counts[i]) / double(h.total)) << "\n";
}

void write_autocorr_csv(const std::vector<double>& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "lag,r\n";
    for (std::size_t k = 0; k < r.size(); ++k) out << k << "," << r[k] << "\n";
}

void write_psd_csv(const Psd& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "freq,power_db\n";
    for (std::size_t k = 0; k < p.power.size(); ++k) {
        const double db = 10.0 * std::log10(std::max(p.power[k], 1e-300));
        out << (double(k) * p.bin_width) << "," << db << "\n";
    }
}

} // namespace rngml
