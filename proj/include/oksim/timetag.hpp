#pragma once
// Sorted picosecond time-tag streams: windowed coincidences, delayed-window accidentals,
// correlation histograms, a pulsed-source generator and the binary tag file.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "oksim/parallel.hpp"
#include "oksim/random.hpp"
#include "oksim/units.hpp"

namespace oksim {

using Picoseconds = std::int64_t;

class TagError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class UnsortedTagsError : public TagError {
public:
    using TagError::TagError;
};
class TagFileError : public TagError {
public:
    using TagError::TagError;
};
class BadMagicError : public TagFileError {
public:
    using TagFileError::TagFileError;
};
class TagVersionError : public TagFileError {
public:
    using TagFileError::TagFileError;
};
class TagCountMismatchError : public TagFileError {
public:
    using TagFileError::TagFileError;
};

struct TimeTagStream {
    std::uint16_t channel = 0;
    std::vector<Picoseconds> tags; // nondecreasing, >= 0

    std::size_t size() const { return tags.size(); }
    bool empty() const { return tags.empty(); }
};

inline void check_sorted(const TimeTagStream& s)
{
    for (std::size_t k = 0; k < s.tags.size(); ++k) {
        if (s.tags[k] < 0)
            throw UnsortedTagsError("channel " + std::to_string(s.channel) + ": negative timestamp at index " +
                                    std::to_string(k));
        if (k > 0 && s.tags[k] < s.tags[k - 1])
            throw UnsortedTagsError("channel " + std::to_string(s.channel) + ": timestamps decrease at index " +
                                    std::to_string(k));
    }
}

/// gate: an a-tag counts once if any b-tag lies in its window.
/// pairs: every (a, b) pair inside the window counts; symmetric under swapping streams with -offset.
enum class CoincidenceMode { gate, pairs };

namespace detail {

// |b - a - offset| <= window / 2, in exact integer arithmetic.
inline bool within(Picoseconds a, Picoseconds b, Picoseconds window, Picoseconds offset)
{
    const Picoseconds d = 2 * (b - a - offset);
    return d >= -window && d <= window;
}

inline std::uint64_t count_range(const std::vector<Picoseconds>& a, std::size_t begin, std::size_t end,
                                 const std::vector<Picoseconds>& b, Picoseconds window, Picoseconds offset,
                                 CoincidenceMode mode)
{
    if (begin >= end || b.empty())
        return 0;
    // First b-tag that could match a[begin]: 2 (b - a - offset) >= -window.
    const auto first = [&](Picoseconds t) {
        return std::lower_bound(b.begin(), b.end(), t, [&](Picoseconds bv, Picoseconds av) {
                   return 2 * (bv - av - offset) < -window;
               }) - b.begin();
    };
    std::size_t lo = static_cast<std::size_t>(first(a[begin]));
    std::size_t hi = lo;
    std::uint64_t n = 0;
    for (std::size_t k = begin; k < end; ++k) {
        const Picoseconds t = a[k];
        while (lo < b.size() && 2 * (b[lo] - t - offset) < -window)
            ++lo;
        if (mode == CoincidenceMode::gate) {
            n += lo < b.size() && 2 * (b[lo] - t - offset) <= window;
        } else {
            hi = std::max(hi, lo);
            while (hi < b.size() && 2 * (b[hi] - t - offset) <= window)
                ++hi;
            n += hi - lo;
        }
    }
    return n;
}

} // namespace detail

/// Single merge pass over both streams; with more than one thread the a-stream is split into
/// contiguous index shards, each starting its b-pointer by binary search, so every a-tag is
/// visited by exactly one shard.
inline std::uint64_t count_coincidences(const TimeTagStream& a, const TimeTagStream& b, Picoseconds window,
                                        Picoseconds offset = 0, CoincidenceMode mode = CoincidenceMode::gate,
                                        Parallelism par = {})
{
    if (window < 0)
        throw DomainError("coincidence window must be >= 0 ps");
    const std::size_t n = a.tags.size();
    const std::size_t shards = std::clamp<std::size_t>(par.threads, 1, std::max<std::size_t>(1, n / 65536));
    std::vector<std::uint64_t> partial(shards, 0);
    parallel_for(shards, {static_cast<unsigned>(shards)}, [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s)
            partial[s] = detail::count_range(a.tags, s * n / shards, (s + 1) * n / shards, b.tags, window, offset, mode);
    });
    std::uint64_t total = 0;
    for (auto v : partial)
        total += v;
    return total;
}

/// Coincidences at one repetition period of electronic delay.
inline std::uint64_t estimate_accidentals(const TimeTagStream& a, const TimeTagStream& b, Picoseconds window,
                                          Picoseconds rep_period = 12500, CoincidenceMode mode = CoincidenceMode::gate,
                                          Parallelism par = {})
{
    return count_coincidences(a, b, window, rep_period, mode, par);
}

/// All-pairs reference count, O(n m).
inline std::uint64_t brute_force_coincidences(const TimeTagStream& a, const TimeTagStream& b, Picoseconds window,
                                              Picoseconds offset = 0, CoincidenceMode mode = CoincidenceMode::gate)
{
    std::uint64_t n = 0;
    for (const Picoseconds t : a.tags) {
        std::uint64_t hits = 0;
        for (const Picoseconds u : b.tags)
            hits += detail::within(t, u, window, offset);
        n += mode == CoincidenceMode::gate ? (hits > 0) : hits;
    }
    return n;
}

struct CorrelationHistogram {
    Picoseconds bin = 0;
    long first_bin = 0;               // bin k is centred at k * bin
    std::vector<std::uint64_t> counts;

    Picoseconds center(std::size_t k) const { return (first_bin + static_cast<long>(k)) * bin; }
    /// Counts in the bin containing delay `t`, zero outside the histogram.
    std::uint64_t at(Picoseconds t) const
    {
        const auto k = static_cast<long>(std::floor(static_cast<double>(t) / static_cast<double>(bin) + 0.5)) - first_bin;
        return k >= 0 && k < static_cast<long>(counts.size()) ? counts[static_cast<std::size_t>(k)] : 0;
    }
};

/// Histogram of b - a over every pair with |b - a| inside the outermost bin edges. Bins are
/// centred on multiples of `bin` from -floor(range/bin) to +floor(range/bin), half-open on the right.
inline CorrelationHistogram correlation_histogram(const TimeTagStream& a, const TimeTagStream& b, Picoseconds range,
                                                  Picoseconds bin)
{
    if (bin <= 0)
        throw DomainError("histogram bin must be > 0 ps");
    if (range < bin)
        throw DomainError("histogram range must be >= bin");
    const long half = static_cast<long>(range / bin);
    CorrelationHistogram h{bin, -half, std::vector<std::uint64_t>(static_cast<std::size_t>(2 * half + 1), 0)};
    // Bin k covers [k bin - bin/2, k bin + bin/2); compare doubled values to stay in integers.
    const Picoseconds lo_edge2 = (2 * -half - 1) * bin;
    const Picoseconds hi_edge2 = (2 * half + 1) * bin;
    std::size_t lo = 0;
    for (const Picoseconds t : a.tags) {
        while (lo < b.tags.size() && 2 * (b.tags[lo] - t) < lo_edge2)
            ++lo;
        for (std::size_t j = lo; j < b.tags.size(); ++j) {
            const Picoseconds d2 = 2 * (b.tags[j] - t);
            if (d2 >= hi_edge2)
                break;
            const long k = static_cast<long>((d2 - lo_edge2) / (2 * bin));
            ++h.counts[static_cast<std::size_t>(k)];
        }
    }
    return h;
}

/// Per-slot joint detection probabilities of a pulsed two-channel source.
struct PulsedSource {
    double rep_rate_hz = 80e6;
    double p_both = 0.0;
    double p_a_only = 0.0;
    double p_b_only = 0.0;

    double p_a() const { return p_both + p_a_only; }
    double p_b() const { return p_both + p_b_only; }

    /// Rates as observed at the detectors: rate_a and rate_b include the paired detections and
    /// pair_rate is the zero-delay coincidence rate. Accidentals at one period are rate_a rate_b / f_rep.
    static PulsedSource from_observed(double rate_a, double rate_b, double pair_rate, double rep_rate_hz)
    {
        check(rate_a, rate_b, pair_rate, rep_rate_hz);
        PulsedSource s;
        s.rep_rate_hz = rep_rate_hz;
        const double pa = rate_a / rep_rate_hz, pb = rate_b / rep_rate_hz, pab = pair_rate / rep_rate_hz;
        if (pab > std::min(pa, pb))
            throw DomainError("pair rate exceeds a singles rate");
        if (pa + pb - pab > 1.0)
            throw DomainError("detection probability per slot exceeds 1");
        s.p_both = pab;
        s.p_a_only = pa - pab;
        s.p_b_only = pb - pab;
        return s;
    }

    /// A pair with probability pair_rate / f_rep superposed on independent uncorrelated singles with
    /// probabilities rate / f_rep per slot.
    static PulsedSource from_pairs(double rate_a, double rate_b, double pair_rate, double rep_rate_hz)
    {
        check(rate_a, rate_b, pair_rate, rep_rate_hz);
        const double q = pair_rate / rep_rate_hz, sa = rate_a / rep_rate_hz, sb = rate_b / rep_rate_hz;
        if (q > 1.0 || sa > 1.0 || sb > 1.0)
            throw DomainError("detection probability per slot exceeds 1");
        PulsedSource s;
        s.rep_rate_hz = rep_rate_hz;
        s.p_both = q + (1.0 - q) * sa * sb;
        s.p_a_only = (1.0 - q) * sa * (1.0 - sb);
        s.p_b_only = (1.0 - q) * (1.0 - sa) * sb;
        return s;
    }

private:
    static void check(double ra, double rb, double rp, double rep)
    {
        if (!(rep > 0.0))
            throw DomainError("rep_rate must be > 0 Hz");
        for (double v : {ra, rb, rp})
            if (!(v >= 0.0) || !std::isfinite(v))
                throw DomainError("rates must be finite and >= 0");
    }
};

struct TagGeneratorOptions {
    double duration_s = 1.0;
    double jitter_a_ps = 0.0; // Gaussian sigma
    double jitter_b_ps = 0.0;
    Picoseconds dead_time_ps = 0;
    std::uint16_t channel_a = 1;
    std::uint16_t channel_b = 2;
    std::uint64_t seed = 1;
};

namespace detail {

inline void apply_dead_time(std::vector<Picoseconds>& tags, Picoseconds dead)
{
    if (dead <= 0 || tags.empty())
        return;
    std::size_t out = 1;
    for (std::size_t k = 1; k < tags.size(); ++k)
        if (tags[k] - tags[out - 1] >= dead)
            tags[out++] = tags[k];
    tags.resize(out);
}

inline void apply_jitter(std::vector<Picoseconds>& tags, double sigma, std::mt19937_64& eng)
{
    if (!(sigma > 0.0))
        return;
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& t : tags)
        t = std::max<Picoseconds>(0, t + static_cast<Picoseconds>(std::llround(n(eng))));
    std::sort(tags.begin(), tags.end());
}

} // namespace detail

/// Slot k emits at k / f_rep (rounded to ps), starting one period after zero. Empty slots are
/// skipped geometrically, so cost scales with the number of detections.
inline std::pair<TimeTagStream, TimeTagStream> generate_timetags(const PulsedSource& src, const TagGeneratorOptions& opt)
{
    if (!(opt.duration_s > 0.0))
        throw DomainError("duration must be > 0 s");
    if (!(opt.jitter_a_ps >= 0.0) || !(opt.jitter_b_ps >= 0.0) || opt.dead_time_ps < 0)
        throw DomainError("jitter and dead time must be >= 0");
    const double p_any = src.p_both + src.p_a_only + src.p_b_only;
    if (p_any > 1.0 + 1e-12 || src.p_both < 0 || src.p_a_only < 0 || src.p_b_only < 0)
        throw DomainError("detection probability per slot exceeds 1");
    const double slots_d = std::floor(opt.duration_s * src.rep_rate_hz);
    if (slots_d * 1e12 / src.rep_rate_hz > 9.0e18)
        throw DomainError("duration exceeds the 64-bit picosecond range");
    const auto slots = static_cast<std::uint64_t>(slots_d);
    const double period_ps = 1e12 / src.rep_rate_hz;

    TimeTagStream a{opt.channel_a, {}}, b{opt.channel_b, {}};
    const double expect = slots_d * p_any;
    a.tags.reserve(static_cast<std::size_t>(expect * 1.05 + 16));
    b.tags.reserve(static_cast<std::size_t>(expect * 1.05 + 16));

    auto eng = rng::engine(opt.seed, 0x7461677300000000ULL, 0);
    if (p_any > 0.0) {
        std::geometric_distribution<std::uint64_t> gap(std::min(p_any, 1.0));
        std::uniform_real_distribution<double> u(0.0, p_any);
        std::uint64_t slot = gap(eng);
        while (slot < slots) {
            const auto t = static_cast<Picoseconds>(std::llround(static_cast<double>(slot + 1) * period_ps));
            const double x = u(eng);
            if (x < src.p_both) {
                a.tags.push_back(t);
                b.tags.push_back(t);
            } else if (x < src.p_both + src.p_a_only) {
                a.tags.push_back(t);
            } else {
                b.tags.push_back(t);
            }
            slot += 1 + gap(eng);
        }
    }
    auto eng_a = rng::engine(opt.seed, 0x7461677300000000ULL, 1);
    auto eng_b = rng::engine(opt.seed, 0x7461677300000000ULL, 2);
    detail::apply_jitter(a.tags, opt.jitter_a_ps, eng_a);
    detail::apply_jitter(b.tags, opt.jitter_b_ps, eng_b);
    detail::apply_dead_time(a.tags, opt.dead_time_ps);
    detail::apply_dead_time(b.tags, opt.dead_time_ps);
    return {std::move(a), std::move(b)};
}

// Binary tag file: "TTAG", u16 version, u16 channel, u64 count, then count u64 timestamps (ps),
// all little-endian.
inline constexpr std::array<char, 4> tag_magic{'T', 'T', 'A', 'G'};
inline constexpr std::uint16_t tag_format_version = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T v)
{
    std::array<char, sizeof(T)> buf{};
    for (std::size_t k = 0; k < sizeof(T); ++k)
        buf[k] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * k)) & 0xff);
    os.write(buf.data(), buf.size());
}

template <class T>
T get_le(const unsigned char* p)
{
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k)
        v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
    return static_cast<T>(v);
}

} // namespace detail

inline void write_tags(const std::filesystem::path& path, const TimeTagStream& s)
{
    check_sorted(s);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw TagFileError("cannot open " + path.string() + " for writing");
    os.write(tag_magic.data(), tag_magic.size());
    detail::put_le<std::uint16_t>(os, tag_format_version);
    detail::put_le<std::uint16_t>(os, s.channel);
    detail::put_le<std::uint64_t>(os, s.tags.size());
    std::vector<char> body(s.tags.size() * 8);
    for (std::size_t k = 0; k < s.tags.size(); ++k)
        for (std::size_t j = 0; j < 8; ++j)
            body[8 * k + j] = static_cast<char>((static_cast<std::uint64_t>(s.tags[k]) >> (8 * j)) & 0xff);
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!os)
        throw TagFileError("write failed: " + path.string());
}

inline TimeTagStream read_tags(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw TagFileError("cannot open " + path.string());
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (data.size() < 4 || !std::equal(tag_magic.begin(), tag_magic.end(), data.begin(),
                                       [](char m, unsigned char d) { return static_cast<unsigned char>(m) == d; }))
        throw BadMagicError(path.string() + ": not a tag file (bad magic)");
    if (data.size() < 16)
        throw TagCountMismatchError(path.string() + ": truncated header");
    const auto version = detail::get_le<std::uint16_t>(data.data() + 4);
    if (version != tag_format_version)
        throw TagVersionError(path.string() + ": unsupported tag format version " + std::to_string(version));
    TimeTagStream s;
    s.channel = detail::get_le<std::uint16_t>(data.data() + 6);
    const auto count = detail::get_le<std::uint64_t>(data.data() + 8);
    const std::size_t body = data.size() - 16;
    if (body % 8 != 0 || body / 8 != count)
        throw TagCountMismatchError(path.string() + ": header declares " + std::to_string(count) + " tags, file holds " +
                                    std::to_string(body / 8) + (body % 8 ? " and a partial record" : ""));
    s.tags.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto v = detail::get_le<std::uint64_t>(data.data() + 16 + 8 * k);
        if (v > static_cast<std::uint64_t>(std::numeric_limits<Picoseconds>::max()))
            throw UnsortedTagsError(path.string() + ": timestamp out of range at index " + std::to_string(k));
        s.tags[k] = static_cast<Picoseconds>(v);
    }
    check_sorted(s);
    return s;
}

} // namespace oksim
