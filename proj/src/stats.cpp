#include "msqg/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "msqg/errors.hpp"

namespace msqg::stats {

namespace {

void require_finite(const std::vector<double>& v, const char* who) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw DataError(std::string(who) + ": non-finite value in sample");
        }
    }
}

// 1-based midranks of the pooled sample; tie_term collects sum(t^3 - t)
std::vector<double> pooled_midranks(const std::vector<double>& pooled,
                                    double* tie_term) {
    const size_t n = pooled.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t i, size_t j) { return pooled[i] < pooled[j]; });
    std::vector<double> ranks(n, 0.0);
    double ties = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && pooled[order[j]] == pooled[order[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k) ranks[order[k]] = mid;
        const double t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    if (tie_term != nullptr) *tie_term = ties;
    return ranks;
}

double u_from_rank_sum(double r1, size_t n1) {
    return r1 - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
}

double kolmogorov_q(double lambda) {
    if (lambda < 1e-2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 500; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1) ? term : -term;
        if (term < 1e-14) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

// regularized incomplete beta via Lentz's continued fraction
double beta_cont_frac(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cont_frac(a, b, x) / a;
    }
    return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double student_t_cdf(double t, int dof) {
    if (dof < 1) throw ConfigError("student_t_cdf: dof must be positive");
    const double v = static_cast<double>(dof);
    const double x = v / (v + t * t);
    const double tail = 0.5 * reg_inc_beta(0.5 * v, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, int dof) {
    if (dof < 1) throw ConfigError("student_t_quantile: dof must be positive");
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("student_t_quantile: p must lie in (0,1)");
    }
    if (p == 0.5) return 0.0;
    const bool upper = p > 0.5;
    const double target = upper ? p : 1.0 - p;
    double lo = 0.0;
    double hi = 1.0;
    while (student_t_cdf(hi, dof) < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (student_t_cdf(mid, dof) < target ? lo : hi) = mid;
    }
    const double q = 0.5 * (lo + hi);
    return upper ? q : -q;
}

TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw ConfigError("mann_whitney_u: empty sample");
    require_finite(a, "mann_whitney_u");
    require_finite(b, "mann_whitney_u");
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    double tie_term = 0.0;
    const auto ranks = pooled_midranks(pooled, &tie_term);
    double r1 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) r1 += ranks[i];

    TestResult res;
    res.statistic = u_from_rank_sum(r1, a.size());
    res.n1 = static_cast<int>(a.size());
    res.n2 = static_cast<int>(b.size());
    const double n1 = static_cast<double>(a.size());
    const double n2 = static_cast<double>(b.size());
    const double n = n1 + n2;
    const double mu = 0.5 * n1 * n2;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
        res.z = 0.0;
        res.p_two_sided = 1.0;
        return res;
    }
    const double delta = res.statistic - mu;
    const double shrunk = std::max(0.0, std::abs(delta) - 0.5);
    res.z = (delta < 0.0 ? -shrunk : shrunk) / std::sqrt(var);
    res.p_two_sided =
        std::clamp(std::erfc(std::abs(res.z) / std::sqrt(2.0)), 0.0, 1.0);
    return res;
}

double mann_whitney_exact_p(const std::vector<double>& a,
                            const std::vector<double>& b) {
    if (a.empty() || b.empty()) {
        throw ConfigError("mann_whitney_exact_p: empty sample");
    }
    if (a.size() > 8 || b.size() > 8) {
        throw ConfigError("mann_whitney_exact_p: enumeration capped at 8 per sample");
    }
    require_finite(a, "mann_whitney_exact_p");
    require_finite(b, "mann_whitney_exact_p");
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = pooled_midranks(pooled, nullptr);
    const size_t n1 = a.size();
    const size_t n = pooled.size();
    const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n - n1);
    double r1 = 0.0;
    for (size_t i = 0; i < n1; ++i) r1 += ranks[i];
    const double observed = std::abs(u_from_rank_sum(r1, n1) - mu);

    std::uint64_t hits = 0;
    std::uint64_t total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<size_t>(std::popcount(mask)) != n1) continue;
        ++total;
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) sum += ranks[i];
        }
        if (std::abs(u_from_rank_sum(sum, n1) - mu) >= observed - 1e-9) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

TestResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw ConfigError("ks_two_sample: empty sample");
    require_finite(a, "ks_two_sample");
    require_finite(b, "ks_two_sample");
    std::vector<double> sa = a;
    std::vector<double> sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double n1 = static_cast<double>(sa.size());
    const double n2 = static_cast<double>(sb.size());
    size_t i = 0;
    size_t j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == v) ++i;
        while (j < sb.size() && sb[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n1 -
                                 static_cast<double>(j) / n2));
    }
    // one sample is exhausted; the widest remaining gap is at this point
    d = std::max(d, std::abs(static_cast<double>(i) / n1 -
                             static_cast<double>(j) / n2));

    TestResult res;
    res.statistic = d;
    res.z = 0.0;
    res.n1 = static_cast<int>(sa.size());
    res.n2 = static_cast<int>(sb.size());
    const double effective = n1 * n2 / (n1 + n2);
    res.p_two_sided = kolmogorov_q(std::sqrt(effective) * d);
    return res;
}

OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ConfigError("ols_fit: length mismatch");
    if (x.size() < 3) throw ConfigError("ols_fit: need at least 3 points");
    require_finite(x, "ols_fit");
    require_finite(y, "ols_fit");
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw DataError("ols_fit: predictor has zero variance");

    OlsFit fit;
    fit.n = static_cast<int>(x.size());
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ssr += r * r;
    }
    const int dof = fit.n - 2;
    const double s2 = std::max(0.0, ssr) / static_cast<double>(dof);
    const double se_slope = std::sqrt(s2 / sxx);
    const double se_int = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    const double tq = student_t_quantile(0.975, dof);
    fit.slope_ci_lo = fit.slope - tq * se_slope;
    fit.slope_ci_hi = fit.slope + tq * se_slope;
    if (se_int == 0.0) {
        fit.intercept_p = fit.intercept == 0.0 ? 1.0 : 0.0;
    } else {
        const double t = std::abs(fit.intercept) / se_int;
        fit.intercept_p = std::clamp(2.0 * (1.0 - student_t_cdf(t, dof)), 0.0, 1.0);
    }
    return fit;
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ConfigError("cosine_distance: dimension mismatch");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    const double c = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    return std::max(0.0, 1.0 - c);
}

ClusterResult agglomerative_cluster(const std::vector<std::vector<double>>& vectors,
                                    Linkage linkage, double threshold) {
    const size_t n = vectors.size();
    if (n == 0) throw ConfigError("agglomerative_cluster: no vectors");
    for (const auto& v : vectors) {
        if (v.size() != vectors[0].size()) {
            throw ConfigError("agglomerative_cluster: dimension mismatch");
        }
    }

    ClusterResult out;
    out.dendrogram.linkage = linkage;
    out.assignment.resize(n);
    std::iota(out.assignment.begin(), out.assignment.end(), 0);
    if (n == 1) return out;

    // slot-indexed distance matrix; a merge folds the larger label's slot
    // into the smaller label's slot via Lance-Williams updates
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            d[i][j] = d[j][i] = cosine_distance(vectors[i], vectors[j]);
        }
    }
    std::vector<bool> alive(n, true);
    std::vector<int> size(n, 1);
    bool cutting = true;
    for (size_t step = 0; step + 1 < n; ++step) {
        size_t bi = 0;
        size_t bj = 0;
        double best = std::numeric_limits<double>::infinity();
        bool found = false;
        for (size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (size_t j = i + 1; j < n; ++j) {
                if (!alive[j]) continue;
                // ties go to the lexicographically smallest label pair,
                // which the i < j scan order visits first
                if (!found || d[i][j] < best) {
                    found = true;
                    best = d[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        out.dendrogram.merges.push_back(
            {static_cast<int>(bi), static_cast<int>(bj), best});
        out.count_curve.emplace_back(best, static_cast<int>(n - step - 1));
        if (best > threshold) cutting = false;
        if (cutting) {
            for (size_t p = 0; p < n; ++p) {
                if (out.assignment[p] == static_cast<int>(bj)) {
                    out.assignment[p] = static_cast<int>(bi);
                }
            }
        }
        for (size_t k = 0; k < n; ++k) {
            if (!alive[k] || k == bi || k == bj) continue;
            const double dk = linkage == Linkage::Max
                                  ? std::max(d[bi][k], d[bj][k])
                                  : (size[bi] * d[bi][k] + size[bj] * d[bj][k]) /
                                        static_cast<double>(size[bi] + size[bj]);
            d[bi][k] = d[k][bi] = dk;
        }
        size[bi] += size[bj];
        alive[bj] = false;
    }
    return out;
}

}  // namespace msqg::stats
