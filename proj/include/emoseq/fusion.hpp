#pragma once

// Decision-level fusion of two prediction tracks by a convex weighted
// average, with the weight chosen by exhaustive search on a dev subset.

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "emoseq/csv.hpp"
#include "emoseq/error.hpp"
#include "emoseq/metrics.hpp"

namespace emoseq {

struct PredictionTrack {
    std::string conversation_id;
    std::vector<double> values;
    std::string source;
};

struct FusionWeights {
    double w_a = 0.0;
    double w_b = 0.0;
    double dev_ccc = 0.0;
};

/// Weight grid in thousandths, inclusive of both ends.
struct WeightGrid {
    int first_permille = 100;
    int last_permille = 900;
    int step_permille = 10;

    std::vector<double> points() const {
        if (step_permille <= 0 || first_permille < 0 || last_permille > 1000 || first_permille > last_permille) {
            throw InvalidArgument("weight grid must satisfy 0 <= first <= last <= 1000 with a positive step");
        }
        std::vector<double> w;
        for (int k = first_permille; k <= last_permille; k += step_permille) {
            w.push_back(k / 1000.0);
        }
        return w;
    }
};

namespace detail {

inline void check_fusable(const PredictionTrack& a, const PredictionTrack& b) {
    if (a.conversation_id != b.conversation_id) {
        throw InvalidArgument("fuse: tracks belong to different conversations (" + a.conversation_id + ", " +
                              b.conversation_id + ")");
    }
    if (a.values.size() != b.values.size()) {
        throw InvalidArgument("fuse: conversation " + a.conversation_id + " has tracks of length " +
                              std::to_string(a.values.size()) + " and " + std::to_string(b.values.size()));
    }
}

/// w a + (1 - w) b written as b + w (a - b), which is exact when a == b.
inline double blend(double a, double b, double w) {
    if (w == 1.0) {
        return a;
    }
    if (w == 0.0) {
        return b;
    }
    return b + w * (a - b);
}

}  // namespace detail

inline PredictionTrack fuse(const PredictionTrack& a, const PredictionTrack& b, double w_a) {
    detail::check_fusable(a, b);
    if (!(w_a >= 0.0 && w_a <= 1.0)) {
        throw InvalidArgument("fuse: weight must lie in [0, 1]");
    }
    PredictionTrack out{a.conversation_id, std::vector<double>(a.values.size()), "fusion(" + a.source + "," + b.source + ")"};
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        out.values[i] = detail::blend(a.values[i], b.values[i], w_a);
    }
    return out;
}

struct GridPoint {
    double w_a = 0.0;
    double w_b = 0.0;
    double dev_ccc = 0.0;
};

struct FusionSearch {
    std::vector<GridPoint> grid;
    FusionWeights best;
};

/// Scores every grid weight by the CCC of the fused dev tracks, concatenated
/// in conversation-id order, and keeps the first maximum (smallest w_a).
/// Tracks are matched by conversation id; `gold` maps ids to gold values.
inline FusionSearch grid_search_weights(std::span<const PredictionTrack> preds_a,
                                        std::span<const PredictionTrack> preds_b,
                                        const std::map<std::string, std::vector<double>>& gold,
                                        const WeightGrid& grid = {}) {
    if (preds_a.empty() || gold.empty()) {
        throw InvalidArgument("grid_search_weights: empty dev set");
    }
    std::map<std::string, const PredictionTrack*> by_a, by_b;
    for (const auto& t : preds_a) by_a[t.conversation_id] = &t;
    for (const auto& t : preds_b) by_b[t.conversation_id] = &t;
    std::vector<std::string> missing;
    for (const auto& [id, g] : gold) {
        if (!by_a.count(id)) missing.push_back(id + " (a)");
        if (!by_b.count(id)) missing.push_back(id + " (b)");
    }
    if (by_a.size() != gold.size() || by_b.size() != gold.size() || !missing.empty()) {
        std::string msg = "grid_search_weights: prediction sets do not cover the dev conversations";
        for (const auto& m : missing) msg += " " + m;
        throw InvalidArgument(msg);
    }
    std::vector<double> a, b, g;
    for (const auto& [id, values] : gold) {
        detail::check_fusable(*by_a[id], *by_b[id]);
        if (by_a[id]->values.size() != values.size()) {
            throw InvalidArgument("grid_search_weights: conversation " + id + " has " +
                                  std::to_string(by_a[id]->values.size()) + " predictions but " +
                                  std::to_string(values.size()) + " gold values");
        }
        a.insert(a.end(), by_a[id]->values.begin(), by_a[id]->values.end());
        b.insert(b.end(), by_b[id]->values.begin(), by_b[id]->values.end());
        g.insert(g.end(), values.begin(), values.end());
    }
    FusionSearch out;
    std::vector<double> fused(a.size());
    bool first = true;
    for (double w : grid.points()) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            fused[i] = detail::blend(a[i], b[i], w);
        }
        const GridPoint p{w, 1.0 - w, ccc(fused, g)};
        out.grid.push_back(p);
        if (first || p.dev_ccc > out.best.dev_ccc) {
            out.best = FusionWeights{p.w_a, p.w_b, p.dev_ccc};
            first = false;
        }
    }
    return out;
}

/// "w_a,w_b,dev_ccc" rows for every grid point, then a "# best ..." line.
inline std::string format_fusion_report(const FusionSearch& s) {
    std::string out = "w_a,w_b,dev_ccc\n";
    for (const auto& p : s.grid) {
        out += csv::format_fixed(p.w_a, 3) + "," + csv::format_fixed(p.w_b, 3) + "," + csv::format_double(p.dev_ccc) +
               "\n";
    }
    out += "# best w_a=" + csv::format_fixed(s.best.w_a, 3) + " w_b=" + csv::format_fixed(s.best.w_b, 3) +
           " dev_ccc=" + csv::format_double(s.best.dev_ccc) + "\n";
    return out;
}

}  // namespace emoseq
