#include "pulsesync/stability.hpp"

#include "pulsesync/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace psync {

namespace {

void validate_series(const PhaseSeries& x) {
    if (!(x.sample_interval_s > 0.0) || !std::isfinite(x.sample_interval_s))
        throw ValidationError("phase series sample interval must be positive");
    for (double v : x.x_s)
        if (!std::isfinite(v))
            throw ValidationError("phase series contains non-finite value");
}

// Maps a requested tau onto an averaging factor m. Taus must land on the
// sampling grid; anything else is a caller error rather than something to
// silently round.
std::size_t averaging_factor(double tau_s, double tau0_s) {
    if (!(tau_s > 0.0) || !std::isfinite(tau_s))
        throw ValidationError("tau must be positive and finite");
    double ratio = tau_s / tau0_s;
    auto m = static_cast<long long>(std::llround(ratio));
    if (m < 1 || std::fabs(ratio - static_cast<double>(m)) > 1e-6 * ratio)
        throw ValidationError("tau is not an integer multiple of the sample interval");
    return static_cast<std::size_t>(m);
}

void finalize(StabilityCurve& curve) {
    curve.degenerate = !curve.values.empty() &&
                       std::all_of(curve.values.begin(), curve.values.end(),
                                   [](double v) { return v == 0.0; });
}

std::string omit_warning(double tau_s, StabilityEstimator e) {
    std::ostringstream os;
    os << estimator_name(e) << ": tau=" << tau_s << " s omitted, series too short";
    return os.str();
}

} // namespace

const char* estimator_name(StabilityEstimator e) {
    switch (e) {
    case StabilityEstimator::MDEV: return "mdev";
    case StabilityEstimator::TDEV: return "tdev";
    case StabilityEstimator::OADEV: return "oadev";
    }
    return "?";
}

const char* noise_class_name(NoiseClass c) {
    switch (c) {
    case NoiseClass::WhitePM: return "white-pm";
    case NoiseClass::FlickerPM: return "flicker-pm";
    case NoiseClass::FlickerFM: return "flicker-fm";
    case NoiseClass::Unclassified: return "unclassified";
    }
    return "?";
}

std::vector<double> default_tau_grid(std::size_t n_samples, double tau0_s) {
    if (!(tau0_s > 0.0))
        throw ValidationError("tau0 must be positive");
    std::vector<double> taus;
    if (n_samples < 4)
        return taus;
    // Largest factor that still leaves at least one mdev term.
    std::size_t m_max = n_samples / 3;
    std::size_t last_m = 0;
    for (int k = 0;; ++k) {
        auto m = static_cast<std::size_t>(std::llround(std::pow(10.0, k / 10.0)));
        if (m > m_max)
            break;
        if (m != last_m) {
            taus.push_back(static_cast<double>(m) * tau0_s);
            last_m = m;
        }
    }
    return taus;
}

StabilityCurve oadev(const PhaseSeries& x, const std::vector<double>& taus_s) {
    validate_series(x);
    StabilityCurve curve;
    curve.estimator = StabilityEstimator::OADEV;
    const std::size_t n = x.x_s.size();
    const double tau0 = x.sample_interval_s;
    const double* d = x.x_s.data();
    for (double tau : taus_s) {
        std::size_t m = averaging_factor(tau, tau0);
        if (n < 2 * m + 1) {
            curve.warnings.push_back(omit_warning(tau, curve.estimator));
            continue;
        }
        const std::size_t terms = n - 2 * m;
        double acc = 0.0;
        for (std::size_t i = 0; i < terms; ++i) {
            double dd = d[i + 2 * m] - 2.0 * d[i + m] + d[i];
            acc += dd * dd;
        }
        double t = static_cast<double>(m) * tau0;
        double var = acc / (2.0 * t * t * static_cast<double>(terms));
        curve.taus_s.push_back(t);
        curve.values.push_back(std::sqrt(var));
    }
    finalize(curve);
    return curve;
}

StabilityCurve mdev(const PhaseSeries& x, const std::vector<double>& taus_s) {
    validate_series(x);
    StabilityCurve curve;
    curve.estimator = StabilityEstimator::MDEV;
    const std::size_t n = x.x_s.size();
    const double tau0 = x.sample_interval_s;
    const double* d = x.x_s.data();
    for (double tau : taus_s) {
        std::size_t m = averaging_factor(tau, tau0);
        if (n < 3 * m) {
            curve.warnings.push_back(omit_warning(tau, curve.estimator));
            continue;
        }
        // Sliding sum of m consecutive second differences: the window sum for
        // j+1 reuses the one for j, so the whole tau costs O(n) not O(n*m).
        const std::size_t windows = n - 3 * m + 1;
        auto second_diff = [&](std::size_t i) {
            return d[i + 2 * m] - 2.0 * d[i + m] + d[i];
        };
        double window_sum = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            window_sum += second_diff(i);
        double acc = window_sum * window_sum;
        for (std::size_t j = 1; j < windows; ++j) {
            window_sum += second_diff(j + m - 1) - second_diff(j - 1);
            acc += window_sum * window_sum;
        }
        double t = static_cast<double>(m) * tau0;
        double var = acc / (2.0 * static_cast<double>(m) * static_cast<double>(m) *
                            t * t * static_cast<double>(windows));
        curve.taus_s.push_back(t);
        curve.values.push_back(std::sqrt(var));
    }
    finalize(curve);
    return curve;
}

StabilityCurve tdev(const PhaseSeries& x, const std::vector<double>& taus_s) {
    StabilityCurve curve = mdev(x, taus_s);
    curve.estimator = StabilityEstimator::TDEV;
    for (std::size_t i = 0; i < curve.values.size(); ++i)
        curve.values[i] *= curve.taus_s[i] / std::sqrt(3.0);
    for (auto& w : curve.warnings) {
        auto pos = w.find("mdev");
        if (pos != std::string::npos)
            w.replace(pos, 4, "tdev");
    }
    finalize(curve);
    return curve;
}

NoiseIdentification identify_noise(const StabilityCurve& curve) {
    std::vector<double> lt, lv;
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
        if (curve.values[i] > 0.0 && curve.taus_s[i] > 0.0) {
            lt.push_back(std::log10(curve.taus_s[i]));
            lv.push_back(std::log10(curve.values[i]));
        }
    }
    if (lt.size() < 4)
        throw ValidationError("noise identification needs at least 4 nonzero points");
    auto [lo, hi] = std::minmax_element(lt.begin(), lt.end());
    if (*hi - *lo < 1.0 - 1e-9)
        throw ValidationError("noise identification needs taus spanning a decade");

    const auto n = static_cast<double>(lt.size());
    double st = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
        st += lt[i];
        sv += lv[i];
    }
    const double mt = st / n, mv = sv / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
        sxx += (lt[i] - mt) * (lt[i] - mt);
        sxy += (lt[i] - mt) * (lv[i] - mv);
        syy += (lv[i] - mv) * (lv[i] - mv);
    }
    NoiseIdentification id;
    id.exponent = sxy / sxx;
    double ss_res = syy - id.exponent * sxy;
    id.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - ss_res / syy) : 1.0;

    if (id.r_squared < 0.5) {
        id.classification = NoiseClass::Unclassified;
        return id;
    }
    struct Candidate {
        double slope;
        NoiseClass cls;
    };
    // MDEV slopes for the phase-noise families this instrument produces.
    static constexpr Candidate kCandidates[] = {
        {0.0, NoiseClass::FlickerFM},
        {-1.0, NoiseClass::FlickerPM},
        {-1.5, NoiseClass::WhitePM},
    };
    double best = 1e300;
    for (const auto& c : kCandidates) {
        double dist = std::fabs(id.exponent - c.slope);
        if (dist < best) {
            best = dist;
            id.classification = c.cls;
        }
    }
    return id;
}

PhaseSeries detrend_linear(const PhaseSeries& x, double* slope_ns_per_s) {
    validate_series(x);
    PhaseSeries out = x;
    const std::size_t n = x.x_s.size();
    if (n < 2) {
        if (slope_ns_per_s)
            *slope_ns_per_s = 0.0;
        return out;
    }
    const double tau0 = x.sample_interval_s;
    double mt = 0.5 * static_cast<double>(n - 1) * tau0;
    double mv = 0.0;
    for (double v : x.x_s)
        mv += v;
    mv /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dt = static_cast<double>(i) * tau0 - mt;
        sxx += dt * dt;
        sxy += dt * (x.x_s[i] - mv);
    }
    double slope = sxy / sxx; // s per s
    if (slope_ns_per_s)
        *slope_ns_per_s = slope * 1e9;
    for (std::size_t i = 0; i < n; ++i)
        out.x_s[i] = x.x_s[i] - (mv + slope * (static_cast<double>(i) * tau0 - mt));
    return out;
}

void write_curve_csv(const StabilityCurve& curve, std::ostream& out) {
    out << "tau_s,value,estimator\n";
    char buf[80];
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%s\n", curve.taus_s[i],
                      curve.values[i], estimator_name(curve.estimator));
        out << buf;
    }
}

PhaseSeries read_offset_csv(std::istream& in, const std::string& label) {
    std::string line;
    if (!std::getline(in, line))
        throw IoError("offset CSV is empty");
    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = s.find(',', start);
            std::string f = s.substr(start, comma - start);
            while (!f.empty() && (f.back() == '\r' || f.back() == ' '))
                f.pop_back();
            while (!f.empty() && f.front() == ' ')
                f.erase(f.begin());
            fields.push_back(f);
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
        return fields;
    };
    auto header = split(line);
    std::size_t time_col = header.size(), offset_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "time_s")
            time_col = i;
        else if (header[i] == "offset_ps")
            offset_col = i;
    }
    if (time_col == header.size() || offset_col == header.size())
        throw IoError("offset CSV needs time_s and offset_ps columns");

    std::vector<double> times, offsets;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        auto fields = split(line);
        if (fields.size() <= std::max(time_col, offset_col))
            throw IoError("offset CSV row has too few columns");
        try {
            times.push_back(std::stod(fields[time_col]));
            offsets.push_back(std::stod(fields[offset_col]));
        } catch (const std::exception&) {
            throw IoError("offset CSV row is not numeric");
        }
    }
    if (times.size() < 2)
        throw ValidationError("offset CSV needs at least 2 rows");

    PhaseSeries series;
    series.label = label;
    series.sample_interval_s = times[1] - times[0];
    if (!(series.sample_interval_s > 0.0))
        throw ValidationError("offset CSV times must be strictly increasing");
    for (std::size_t i = 1; i < times.size(); ++i) {
        double dt = times[i] - times[i - 1];
        if (std::fabs(dt - series.sample_interval_s) > 1e-6 * series.sample_interval_s)
            throw ValidationError("offset CSV must be uniformly sampled");
    }
    series.x_s.reserve(offsets.size());
    for (double o : offsets)
        series.x_s.push_back(o * 1e-12);
    return series;
}

} // namespace psync
