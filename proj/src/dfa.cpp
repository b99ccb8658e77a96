#include <cmath>
#include <set>
#include <vector>

#include "fracnet/eval.hpp"

namespace fracnet {

namespace {

// Mean squared residual of a least-squares line through y[begin, begin + s).
double detrended_variance(const Eigen::VectorXd& y, Index begin, Index s) {
    const double mean_t = 0.5 * double(s - 1);
    double stt = 0.0, sty = 0.0, mean_y = 0.0;
    for (Index i = 0; i < s; ++i)
        mean_y += y(begin + i);
    mean_y /= double(s);
    for (Index i = 0; i < s; ++i) {
        const double dt = double(i) - mean_t;
        stt += dt * dt;
        sty += dt * (y(begin + i) - mean_y);
    }
    const double slope = sty / stt;
    double ss = 0.0;
    for (Index i = 0; i < s; ++i) {
        const double r = y(begin + i) - mean_y - slope * (double(i) - mean_t);
        ss += r * r;
    }
    return ss / double(s);
}

double dfa_exponent(const Eigen::VectorXd& x) {
    const Index L = x.size();
    const Eigen::VectorXd centered = x.array() - x.mean();
    Eigen::VectorXd profile(L);
    double acc = 0.0;
    for (Index i = 0; i < L; ++i) {
        acc += centered(i);
        profile(i) = acc;
    }
    std::set<Index> scales;
    const double smin = 8.0, smax = double(L) / 4.0;
    for (int i = 0; i < 16; ++i)
        scales.insert(Index(std::round(smin * std::pow(smax / smin, double(i) / 15.0))));

    std::vector<double> ls, lf;
    for (Index s : scales) {
        const Index segments = L / s;
        if (segments < 2)
            continue;
        double total = 0.0;
        for (Index k = 0; k < segments; ++k) {
            total += detrended_variance(profile, k * s, s);
            total += detrended_variance(profile, L - (k + 1) * s, s);
        }
        const double f = std::sqrt(total / double(2 * segments));
        if (f > 0.0) {
            ls.push_back(std::log(double(s)));
            lf.push_back(std::log(f));
        }
    }
    if (ls.size() < 2)
        return 0.5;
    const double n = double(ls.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
        mx += ls[i];
        my += lf[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
        sxy += (ls[i] - mx) * (lf[i] - my);
        sxx += (ls[i] - mx) * (ls[i] - mx);
    }
    return sxy / sxx;
}

} // namespace

OrderEstimate estimate_fractional_orders(const Eigen::MatrixXd& series) {
    if (series.cols() < 64)
        throw DataError("estimate_fractional_orders: need at least 64 samples per channel, got "
                        + std::to_string(series.cols()));
    if (!series.allFinite())
        throw DataError("estimate_fractional_orders: non-finite sample");
    OrderEstimate out;
    out.alphas.resize(series.rows());
    out.hurst.resize(series.rows());
    out.degenerate.assign(std::size_t(series.rows()), false);
    for (Index c = 0; c < series.rows(); ++c) {
        const Eigen::VectorXd x = series.row(c).transpose();
        const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
        if (x.maxCoeff() - x.minCoeff() <= 1e-14 * scale) {
            out.degenerate[std::size_t(c)] = true;
            out.hurst(c) = 0.5;
            out.alphas(c) = 0.0;
            continue;
        }
        out.hurst(c) = dfa_exponent(x);
        out.alphas(c) = std::clamp(out.hurst(c) - 0.5, 0.0, 2.0);
    }
    return out;
}

} // namespace fracnet
