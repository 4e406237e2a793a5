#pragma once

// Held-out discrimination metrics: Harrell's C-index and top-fraction
// event-rate lift.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace corecox {

namespace detail {

inline void check_metric_inputs(const Eigen::VectorXd& time, const std::vector<bool>& event,
                                const Eigen::VectorXd& score) {
    if (time.size() != score.size() || event.size() != static_cast<std::size_t>(time.size()))
        throw std::invalid_argument("metric inputs must have equal lengths");
    if (!score.allFinite() || !time.allFinite()) throw std::invalid_argument("metric inputs must be finite");
}

// Fenwick tree of counts over score ranks.
class RankCounter {
public:
    explicit RankCounter(int n) : tree_(static_cast<std::size_t>(n) + 1, 0) {}
    void add(int rank) {
        for (int i = rank + 1; i < static_cast<int>(tree_.size()); i += i & -i) ++tree_[static_cast<std::size_t>(i)];
    }
    // Number of inserted ranks strictly below `rank`.
    std::int64_t below(int rank) const {
        std::int64_t s = 0;
        for (int i = rank; i > 0; i -= i & -i) s += tree_[static_cast<std::size_t>(i)];
        return s;
    }

private:
    std::vector<std::int64_t> tree_;
};

}  // namespace detail

struct ConcordanceCounts {
    std::int64_t comparable = 0;
    std::int64_t concordant = 0;
    std::int64_t tied_score = 0;
};

/// Pair counts for Harrell's C: pair (i, j) is comparable when i has an
/// event and time_i < time_j. Tied times are never comparable.
inline ConcordanceCounts concordance_counts(const Eigen::VectorXd& time, const std::vector<bool>& event,
                                            const Eigen::VectorXd& score) {
    detail::check_metric_inputs(time, event, score);
    const int n = static_cast<int>(time.size());
    // Dense ranks of scores so equal scores share a rank.
    std::vector<int> by_score(static_cast<std::size_t>(n));
    std::iota(by_score.begin(), by_score.end(), 0);
    std::sort(by_score.begin(), by_score.end(), [&](int a, int b) { return score(a) < score(b); });
    std::vector<int> rank(static_cast<std::size_t>(n));
    int r = 0;
    for (int i = 0; i < n; ++i) {
        if (i > 0 && score(by_score[static_cast<std::size_t>(i)]) != score(by_score[static_cast<std::size_t>(i) - 1])) ++r;
        rank[static_cast<std::size_t>(by_score[static_cast<std::size_t>(i)])] = r;
    }
    std::vector<int> by_time(static_cast<std::size_t>(n));
    std::iota(by_time.begin(), by_time.end(), 0);
    std::sort(by_time.begin(), by_time.end(), [&](int a, int b) { return time(a) > time(b); });

    ConcordanceCounts c;
    detail::RankCounter later(r + 1);  // subjects with strictly larger time
    std::int64_t inserted = 0;
    int start = 0;
    while (start < n) {
        int end = start;
        const double t = time(by_time[static_cast<std::size_t>(start)]);
        while (end < n && time(by_time[static_cast<std::size_t>(end)]) == t) ++end;
        for (int idx = start; idx < end; ++idx) {
            const int i = by_time[static_cast<std::size_t>(idx)];
            if (!event[static_cast<std::size_t>(i)]) continue;
            const int ri = rank[static_cast<std::size_t>(i)];
            const std::int64_t lower = later.below(ri);
            const std::int64_t lower_or_equal = later.below(ri + 1);
            c.comparable += inserted;
            c.concordant += lower;
            c.tied_score += lower_or_equal - lower;
        }
        for (int idx = start; idx < end; ++idx) later.add(rank[static_cast<std::size_t>(by_time[static_cast<std::size_t>(idx)])]);
        inserted += end - start;
        start = end;
    }
    return c;
}

/// Harrell's concordance index, no censoring weights. Higher score means
/// higher risk (earlier event). Score ties earn half credit.
inline double harrell_c_index(const Eigen::VectorXd& time, const std::vector<bool>& event,
                              const Eigen::VectorXd& score) {
    const ConcordanceCounts c = concordance_counts(time, event, score);
    if (c.comparable == 0) throw std::domain_error("harrell_c_index: no comparable pairs");
    return (static_cast<double>(c.concordant) + 0.5 * static_cast<double>(c.tied_score)) /
           static_cast<double>(c.comparable);
}

/// Number of subjects in the top `fraction` of n: ceil(fraction * n), guarded
/// against representation error (0.15 * 20 must give 3, not 4).
inline int top_count(int n, double fraction) {
    const double raw = fraction * n;
    const double nearest = std::round(raw);
    const double v = std::abs(raw - nearest) < 1e-9 * std::max(1.0, raw) ? nearest : std::ceil(raw);
    return std::max(1, static_cast<int>(v));
}

/// Event proportion among the ceil(fraction * n) highest scores divided by
/// the overall event proportion. Score ties are broken by subject index.
inline double top_k_lift(const Eigen::VectorXd& time, const std::vector<bool>& event,
                         const Eigen::VectorXd& score, double fraction) {
    detail::check_metric_inputs(time, event, score);
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("top_k_lift: fraction must be in (0, 1)");
    const int n = static_cast<int>(score.size());
    const auto total_events = std::count(event.begin(), event.end(), true);
    if (total_events == 0) throw std::domain_error("top_k_lift: no events in evaluation set");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return score(a) > score(b); });
    const int m = top_count(n, fraction);
    std::int64_t top_events = 0;
    for (int i = 0; i < m; ++i) top_events += event[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] ? 1 : 0;
    const double top_rate = static_cast<double>(top_events) / m;
    const double base_rate = static_cast<double>(total_events) / n;
    return top_rate / base_rate;
}

}  // namespace corecox
