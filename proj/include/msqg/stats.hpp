#pragma once

#include <utility>
#include <vector>

namespace msqg::stats {

// two-sample test summary; z is only populated by the Mann-Whitney path
struct TestResult {
    double statistic = 0.0;
    double z = 0.0;
    double p_two_sided = 1.0;
    int n1 = 0;
    int n2 = 0;
};

// U for the first sample via midranks; two-sided p from the normal
// approximation with tie-corrected variance and continuity correction.
// A fully tied pool carries no order information: p = 1 by convention.
TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

// exact two-sided p by enumerating all C(n1+n2, n1) group assignments
// of the pooled values; requires n1, n2 <= 8
double mann_whitney_exact_p(const std::vector<double>& a, const std::vector<double>& b);

// D = sup |F1 - F2|; p from the asymptotic Kolmogorov distribution at
// sqrt(n1*n2/(n1+n2)) * D
TestResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_ci_lo = 0.0;
    double slope_ci_hi = 0.0;
    double intercept_p = 1.0;
    int n = 0;
    bool slope_ci_contains_zero() const {
        return slope_ci_lo <= 0.0 && 0.0 <= slope_ci_hi;
    }
};

// closed-form simple regression; 95% CI and intercept p use Student's t
// with n-2 dof; needs n >= 3 and a predictor with nonzero variance
OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y);

double normal_cdf(double x);
double student_t_cdf(double t, int dof);
double student_t_quantile(double p, int dof);

enum class Linkage { Max, Average };

// clusters are named by their smallest member index throughout
struct Merge {
    int a = 0;
    int b = 0;
    double distance = 0.0;
};

struct Dendrogram {
    Linkage linkage = Linkage::Max;
    std::vector<Merge> merges;
};

struct ClusterResult {
    std::vector<int> assignment;
    Dendrogram dendrogram;
    // (merge distance, cluster count after that merge), one entry per merge
    std::vector<std::pair<double, int>> count_curve;
};

// 1 - cosine similarity, clamped into [0, 2]; a zero vector has no
// direction and sits at distance 1 from everything
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

// bottom-up merging under the linkage; the assignment stops at the first
// merge whose distance exceeds threshold, the dendrogram runs to the root
ClusterResult agglomerative_cluster(const std::vector<std::vector<double>>& vectors,
                                    Linkage linkage, double threshold);

}  // namespace msqg::stats
