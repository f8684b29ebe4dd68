#include "kite/evaluation.hpp"

#include "kite/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace kite {

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

double quantile_sorted(const std::vector<double> &sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) raise(ErrorCode::ShapeMismatch, "series differ in length");
    if (x.size() < 3) raise(ErrorCode::TooFewItems, "pearson needs at least 3 items");
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
    };
    if (constant(x) || constant(y)) raise(ErrorCode::ConstantSeries, "series has zero variance");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) raise(ErrorCode::ConstantSeries, "series has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> descending_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start + 1;
        while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
        const double avg = static_cast<double>(start + end - 1) / 2.0;
        for (std::size_t t = start; t < end; ++t) ranks[order[t]] = avg;
        start = end;
    }
    return ranks;
}

double weighted_kendall_tau(std::span<const double> scores, std::span<const double> truth) {
    if (scores.size() != truth.size()) raise(ErrorCode::ShapeMismatch, "series differ in length");
    if (scores.size() < 2) raise(ErrorCode::TooFewItems, "weighted tau needs at least 2 items");
    const auto ranks = descending_ranks(truth);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t j = i + 1; j < scores.size(); ++j) {
            const int ds = sign(scores[i] - scores[j]);
            const int dt = sign(truth[i] - truth[j]);
            if (ds == 0 && dt == 0) continue;
            const double w = 1.0 / (1.0 + ranks[i]) + 1.0 / (1.0 + ranks[j]);
            num += w * static_cast<double>(ds * dt);
            den += w;
        }
    }
    if (!(den > 0.0)) raise(ErrorCode::ConstantSeries, "every pair is tied in both series");
    return num / den;
}

std::string to_string(AccuracyUnit unit) {
    return unit == AccuracyUnit::percent ? "percent" : "fraction";
}

void ScoreTable::add(ScoreRow row) {
    auto key = std::make_pair(row.model_id, row.target_id);
    if (index_.count(key)) {
        raise(ErrorCode::SchemaError, "duplicate row (" + row.model_id + ", " + row.target_id + ")");
    }
    index_.emplace(std::move(key), rows_.size());
    rows_.push_back(std::move(row));
}

std::vector<std::string> ScoreTable::targets() const {
    std::set<std::string> ids;
    for (const auto &r : rows_) ids.insert(r.target_id);
    return {ids.begin(), ids.end()};
}

std::vector<const ScoreRow *> ScoreTable::rows_for(const std::string &target_id) const {
    std::vector<const ScoreRow *> out;
    for (const auto &[key, idx] : index_) {
        if (key.second == target_id) out.push_back(&rows_[idx]);
    }
    return out;  // index_ is ordered by model_id first
}

EvalReport te_aggregate(const ScoreTable &table, const std::string &estimator) {
    EvalReport report;
    report.estimator = estimator;
    report.unit = table.unit();
    report.metadata["tau_scheme"] = kTauScheme;
    report.metadata["accuracy_unit"] = to_string(table.unit());

    double pc_sum = 0.0;
    double tau_sum = 0.0;
    for (const auto &target : table.targets()) {
        const auto rows = table.rows_for(target);
        TargetResult result;
        result.target_id = target;
        result.num_models = rows.size();
        if (rows.size() < 3) {
            raise(ErrorCode::TooFewItems, "target '" + target + "' has " + std::to_string(rows.size()) +
                                              " models, need >= 3");
        }
        std::vector<double> scores;
        std::vector<double> truth;
        for (const auto *row : rows) {
            const auto it = row->scores.find(estimator);
            if (it == row->scores.end()) {
                raise(ErrorCode::SchemaError, "no '" + estimator + "' score for (" + row->model_id + ", " +
                                                  target + ")");
            }
            scores.push_back(it->second);
            truth.push_back(row->accuracy);
        }
        try {
            result.pc = pearson(scores, truth);
            result.tau = weighted_kendall_tau(scores, truth);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::ConstantSeries) throw;
            result.pc.reset();
            result.tau.reset();
            result.status = std::string("excluded: ") + e.what();
            report.warnings.push_back("target '" + target + "' excluded from the mean: " + e.what());
        }
        if (result.pc) {
            pc_sum += *result.pc;
            tau_sum += *result.tau;
            ++report.num_included;
        }
        report.targets.push_back(std::move(result));
    }
    if (report.num_included == 0) raise(ErrorCode::ConstantSeries, "no target yielded a correlation");
    report.mean_pc = pc_sum / static_cast<double>(report.num_included);
    report.mean_tau = tau_sum / static_cast<double>(report.num_included);
    return report;
}

nlohmann::json report_to_json(const EvalReport &report) {
    nlohmann::json j;
    j["estimator"] = report.estimator;
    j["accuracy_unit"] = to_string(report.unit);
    j["mean_pc"] = report.mean_pc;
    j["mean_tau"] = report.mean_tau;
    j["num_targets_included"] = report.num_included;
    auto &targets = j["targets"] = nlohmann::json::array();
    for (const auto &t : report.targets) {
        nlohmann::json row{{"target_id", t.target_id}, {"num_models", t.num_models}, {"status", t.status}};
        row["pc"] = t.pc ? nlohmann::json(*t.pc) : nlohmann::json(nullptr);
        row["tau"] = t.tau ? nlohmann::json(*t.tau) : nlohmann::json(nullptr);
        targets.push_back(std::move(row));
    }
    j["warnings"] = report.warnings;
    j["metadata"] = report.metadata;
    return j;
}

std::string report_to_csv(const EvalReport &report) {
    std::ostringstream out;
    out << "target_id,num_models,pc,tau,status\n";
    for (const auto &t : report.targets) {
        out << t.target_id << ',' << t.num_models << ',' << (t.pc ? format_double(*t.pc) : "") << ','
            << (t.tau ? format_double(*t.tau) : "") << ',' << (t.pc ? "ok" : "excluded") << '\n';
    }
    out << "MEAN," << report.num_included << ',' << format_double(report.mean_pc) << ','
        << format_double(report.mean_tau) << ",ok\n";
    return out.str();
}

double ta_ra_correlation(std::span<const std::pair<double, double>> ta_ra) {
    std::vector<double> ta;
    std::vector<double> ra;
    for (const auto &[t, r] : ta_ra) {
        ta.push_back(t);
        ra.push_back(r);
    }
    return pearson(ta, ra);
}

KernelHistogram kernel_value_histogram(const KernelMatrix &k, int bins) {
    if (bins < 2) raise(ErrorCode::ConfigError, "histogram needs at least 2 bins");
    const Eigen::Index n = k.n();
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n * (n - 1)));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) values.push_back(k.data(i, j));
        }
    }
    KernelHistogram h;
    const auto nb = static_cast<std::size_t>(bins);
    h.counts.assign(nb, 0);
    if (values.empty()) {
        h.edges.assign(nb + 1, 0.0);
        return h;
    }
    std::sort(values.begin(), values.end());
    double lo = values.front();
    double hi = values.back();
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b <= nb; ++b) h.edges.push_back(lo + width * static_cast<double>(b));
    h.edges.back() = hi;
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        ++h.counts[std::min(b, nb - 1)];
    }
    h.q1 = quantile_sorted(values, 0.25);
    h.q3 = quantile_sorted(values, 0.75);
    return h;
}

}  // namespace kite
