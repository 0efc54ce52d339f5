#pragma once

// Concordance correlation coefficient in covariance form,
//
//   ccc(x, y) = 2 cov(x, y) / (var(x) + var(y) + (mean(x) - mean(y))^2),
//
// with population (1/N) moments, the 1 - ccc training loss and its exact
// gradient with respect to the predictions.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emoseq/csv.hpp"
#include "emoseq/error.hpp"

namespace emoseq {

namespace detail {

struct Moments {
    double mean_x = 0, mean_y = 0;
    double var_x = 0, var_y = 0, cov = 0;
    double n = 0;

    double denominator() const {
        const double d = mean_x - mean_y;
        return var_x + var_y + d * d;
    }
};

inline bool is_constant(std::span<const double> v) {
    for (double a : v) {
        if (a != v[0]) {
            return false;
        }
    }
    return true;
}

inline void check_pair(std::span<const double> x, std::span<const double> y, const char* who) {
    if (x.size() != y.size()) {
        throw InvalidArgument(std::string(who) + ": length mismatch (" + std::to_string(x.size()) +
                              " vs " + std::to_string(y.size()) + ")");
    }
    if (x.size() < 2) {
        throw InvalidArgument(std::string(who) + ": need at least 2 values, got " + std::to_string(x.size()));
    }
}

/// Two-pass moments. A constant sequence gets exactly its value as mean and
/// exactly zero variance so the degenerate cases are detected reliably.
inline Moments moments(std::span<const double> x, std::span<const double> y) {
    Moments m;
    m.n = static_cast<double>(x.size());
    const bool cx = is_constant(x);
    const bool cy = is_constant(y);
    if (cx) {
        m.mean_x = x[0];
    } else {
        for (double a : x) m.mean_x += a;
        m.mean_x /= m.n;
    }
    if (cy) {
        m.mean_y = y[0];
    } else {
        for (double b : y) m.mean_y += b;
        m.mean_y /= m.n;
    }
    if (cx || cy) {
        // cov is identically zero; only the non-constant variance remains.
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!cx) m.var_x += (x[i] - m.mean_x) * (x[i] - m.mean_x);
            if (!cy) m.var_y += (y[i] - m.mean_y) * (y[i] - m.mean_y);
        }
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double dx = x[i] - m.mean_x;
            const double dy = y[i] - m.mean_y;
            m.var_x += dx * dx;
            m.var_y += dy * dy;
            m.cov += dx * dy;
        }
    }
    m.var_x /= m.n;
    m.var_y /= m.n;
    m.cov /= m.n;
    return m;
}

}  // namespace detail

/// Both sequences constant with equal values score 1; a constant sequence
/// against a varying one scores 0.
inline double ccc(std::span<const double> x, std::span<const double> y) {
    detail::check_pair(x, y, "ccc");
    const auto m = detail::moments(x, y);
    const double den = m.denominator();
    if (den == 0.0) {
        return 1.0;
    }
    return 2.0 * m.cov / den;
}

inline double ccc_loss(std::span<const double> pred, std::span<const double> gold) {
    return 1.0 - ccc(pred, gold);
}

/// d(1 - ccc)/d pred_i with gold held constant:
///
///   -(2/N) [ (g_i - mean_g) * den - 2 cov * ((p_i - mean_p) + (mean_p - mean_g)) ] / den^2
///
/// Zero when the denominator vanishes.
inline std::vector<double> ccc_loss_grad(std::span<const double> pred, std::span<const double> gold) {
    detail::check_pair(pred, gold, "ccc_loss_grad");
    const auto m = detail::moments(pred, gold);
    const double den = m.denominator();
    std::vector<double> grad(pred.size(), 0.0);
    if (den == 0.0) {
        return grad;
    }
    const double scale = -2.0 / (m.n * den * den);
    const double shift = m.mean_x - m.mean_y;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        grad[i] = scale * ((gold[i] - m.mean_y) * den - 2.0 * m.cov * ((pred[i] - m.mean_x) + shift));
    }
    return grad;
}

/// Mean of per-conversation losses.
inline double batch_ccc_loss(std::span<const std::pair<std::span<const double>, std::span<const double>>> pairs) {
    if (pairs.empty()) {
        throw InvalidArgument("batch_ccc_loss: empty batch");
    }
    double sum = 0.0;
    for (const auto& [p, g] : pairs) {
        sum += ccc_loss(p, g);
    }
    return sum / static_cast<double>(pairs.size());
}

/// Scores of one subset: the CCC over all conversations concatenated, and
/// one CCC per conversation.
struct ScoreReport {
    std::string dimension;
    double ccc_concat = 0.0;
    std::vector<std::pair<std::string, double>> ccc_per_conv;
};

/// Conversations whose length is below 2 get no per-conversation score.
inline ScoreReport score_subset(const std::string& dimension, std::span<const std::string> ids,
                                std::span<const std::vector<double>> preds,
                                std::span<const std::vector<double>> golds) {
    if (ids.size() != preds.size() || ids.size() != golds.size()) {
        throw InvalidArgument("score_subset: mismatched conversation counts");
    }
    if (ids.empty()) {
        throw InvalidArgument("score_subset: empty subset");
    }
    ScoreReport rep;
    rep.dimension = dimension;
    std::vector<double> all_p, all_g;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (preds[i].size() != golds[i].size()) {
            throw InvalidArgument("score_subset: '" + ids[i] + "' has " + std::to_string(preds[i].size()) +
                                  " predictions for " + std::to_string(golds[i].size()) + " targets");
        }
        all_p.insert(all_p.end(), preds[i].begin(), preds[i].end());
        all_g.insert(all_g.end(), golds[i].begin(), golds[i].end());
        if (preds[i].size() >= 2) {
            rep.ccc_per_conv.emplace_back(ids[i], ccc(preds[i], golds[i]));
        }
    }
    rep.ccc_concat = ccc(all_p, all_g);
    return rep;
}

/// "scope,id,ccc" with one concat row followed by one row per conversation.
inline std::string format_score_report(const ScoreReport& rep) {
    std::string out = "scope,id,ccc\n";
    out += "concat," + rep.dimension + "," + csv::format_double(rep.ccc_concat) + "\n";
    for (const auto& [id, v] : rep.ccc_per_conv) {
        out += "conv," + id + "," + csv::format_double(v) + "\n";
    }
    return out;
}

}  // namespace emoseq
