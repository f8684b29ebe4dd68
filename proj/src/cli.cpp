#include "kite/cli.hpp"

#include "kite/error.hpp"
#include "kite/io.hpp"
#include "kite/preprocess.hpp"
#include "kite/rng.hpp"
#include "kite/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#ifndef KITE_VERSION_STRING
#define KITE_VERSION_STRING "unknown"
#endif

namespace kite::cli {

namespace fs = std::filesystem;

namespace {

// Runs fn(0..count-1) on up to `jobs` threads. fn must not throw.
template <class F>
void parallel_for(std::size_t count, int jobs, F &&fn) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    }
    for (auto &t : pool) t.join();
}

struct Failure {
    std::string what;
    std::optional<ErrorCode> code;
};

template <class F>
std::optional<Failure> capture(F &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return Failure{e.what(), e.code()};
    } catch (const std::exception &e) {
        return Failure{e.what(), std::nullopt};
    }
    return std::nullopt;
}

void require_path(const std::string &value, const char *flag) {
    if (value.empty()) raise(ErrorCode::ConfigError, std::string(flag) + " is required");
}

bool any_needs_random(const std::vector<std::string> &estimators) {
    return std::any_of(estimators.begin(), estimators.end(),
                       [](const std::string &e) { return make_estimator(e)->needs().random; });
}

std::string file_stem_for(const std::string &estimator) {
    std::string s = estimator;
    for (char &c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) c = '_';
    }
    return s;
}

ScoreRequest make_request(const std::string &estimator, const FeatureMatrix &pretrained, const FeatureMatrix *random,
                          const LabelVector &labels, const KernelKind &kernel, const ModelMeta &meta) {
    const auto needs = make_estimator(estimator)->needs();
    ScoreRequest req;
    req.kernel = kernel;
    if (needs.pretrained) req.pretrained = pretrained;
    if (needs.labels) req.labels = labels;
    if (needs.random && random != nullptr) req.random = *random;
    if (needs.meta) req.meta = meta;
    return req;
}

struct TargetData {
    LabelVector labels;
    std::optional<FeatureMatrix> raw;
};

TargetData load_target(const fs::path &features, const std::optional<fs::path> &labels, bool need_raw) {
    TargetData t;
    auto file = io::read_features(features, Provenance::raw);
    if (labels) {
        t.labels = io::read_labels(*labels);
    } else if (file.labels) {
        t.labels = *file.labels;
    } else {
        raise(ErrorCode::ConfigError, "target labels required: " + features.string() + " has none");
    }
    if (t.labels.size() != static_cast<std::size_t>(file.features.n())) {
        raise(ErrorCode::ShapeMismatch, "target labels and features differ in length");
    }
    if (need_raw) t.raw = std::move(file.features);
    return t;
}

FeatureMatrix load_probe_rows(const fs::path &path, std::size_t pool_size, const std::vector<std::size_t> &rows,
                              Provenance provenance) {
    auto file = io::read_features(path, provenance);
    if (static_cast<std::size_t>(file.features.n()) != pool_size) {
        raise(ErrorCode::ShapeMismatch, path.string() + " has " + std::to_string(file.features.n()) +
                                            " rows, the target has " + std::to_string(pool_size));
    }
    return file.features.select_rows(rows);
}

// Scores of every model on one target probe. results[m][e] is either a score
// or a failure message.
struct ModelScores {
    std::vector<std::optional<double>> score;
    std::vector<std::string> error;
    std::vector<std::optional<ErrorCode>> code;
};

std::vector<ModelScores> score_models(const RunConfig &config, const std::vector<std::string> &estimators,
                                      const std::vector<io::ManifestEntry> &models, const std::string &target_id,
                                      const TargetData &target, long long target_size,
                                      const std::vector<std::size_t> &probe, std::uint64_t seed,
                                      const std::optional<fs::path> &random_file) {
    const std::size_t nm = models.size();
    const std::size_t ne = estimators.size();
    const std::size_t pool = target.labels.size();
    const LabelVector labels = target.labels.select(probe);
    const bool need_random = any_needs_random(estimators);

    std::vector<ModelScores> results(nm);
    for (auto &r : results) {
        r.score.assign(ne, std::nullopt);
        r.error.assign(ne, std::string());
        r.code.assign(ne, std::nullopt);
    }
    auto fail_all = [&](std::size_t m, const Failure &f) {
        for (std::size_t e = 0; e < ne; ++e) {
            results[m].error[e] = f.what;
            results[m].code[e] = f.code;
        }
    };

    std::vector<std::optional<FeatureMatrix>> prepared(nm);
    std::vector<Eigen::Index> width(nm, 0);
    parallel_for(nm, config.jobs, [&](std::size_t m) {
        if (auto f = capture([&] {
                const auto rows = load_probe_rows(models[m].features_for(target_id), pool, probe, Provenance::pretrained);
                width[m] = rows.d();
                prepared[m] = reduce_dim(rows, config.pca_dim);
            })) {
            fail_all(m, *f);
        }
    });

    // One random reference per distinct pretrained width.
    std::map<Eigen::Index, std::optional<FeatureMatrix>> references;
    std::map<Eigen::Index, Failure> reference_errors;
    if (need_random) {
        std::optional<FeatureMatrix> provided;
        if (random_file) {
            if (auto f = capture([&] {
                    provided = reduce_dim(load_probe_rows(*random_file, pool, probe, Provenance::random), config.pca_dim);
                })) {
                for (std::size_t m = 0; m < nm; ++m) {
                    if (prepared[m]) reference_errors[width[m]] = *f;
                }
            }
        }
        std::vector<Eigen::Index> dims;
        for (std::size_t m = 0; m < nm; ++m) {
            if (prepared[m]) dims.push_back(width[m]);
        }
        std::sort(dims.begin(), dims.end());
        dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
        for (auto d : dims) references[d];
        if (provided) {
            for (auto d : dims) references[d] = provided;
        } else if (!random_file) {
            std::optional<FeatureMatrix> raw_probe;
            if (!target.raw) raise(ErrorCode::ConfigError, "random features required: give --random or target features");
            raw_probe = target.raw->select_rows(probe);
            std::vector<std::optional<Failure>> errs(dims.size());
            std::vector<std::optional<FeatureMatrix>> built(dims.size());
            parallel_for(dims.size(), config.jobs, [&](std::size_t i) {
                errs[i] = capture([&] { built[i] = random_reference(*raw_probe, dims[i], config, seed, target_id); });
            });
            for (std::size_t i = 0; i < dims.size(); ++i) {
                if (errs[i]) reference_errors[dims[i]] = *errs[i];
                else references[dims[i]] = std::move(built[i]);
            }
        }
    }

    parallel_for(nm, config.jobs, [&](std::size_t m) {
        if (!prepared[m]) return;
        const ModelMeta meta{models[m].layers, models[m].source_size, target_size};
        const FeatureMatrix *reference = nullptr;
        if (need_random) {
            const auto it = references.find(width[m]);
            if (it != references.end() && it->second) reference = &*it->second;
        }
        for (std::size_t e = 0; e < ne; ++e) {
            if (need_random && reference == nullptr && make_estimator(estimators[e])->needs().random) {
                const auto it = reference_errors.find(width[m]);
                results[m].error[e] = it != reference_errors.end() ? it->second.what : "random features unavailable";
                results[m].code[e] = it != reference_errors.end() ? it->second.code : std::nullopt;
                continue;
            }
            if (auto f = capture([&] {
                    results[m].score[e] = score(estimators[e], make_request(estimators[e], *prepared[m], reference, labels,
                                                                             config.kernel, meta));
                })) {
                results[m].error[e] = f->what;
                results[m].code[e] = f->code;
            }
        }
    });
    return results;
}

double mean_of(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double std_of(const std::vector<double> &v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string dump(const nlohmann::json &j) { return j.dump(2) + "\n"; }

}  // namespace

std::string version() { return KITE_VERSION_STRING; }

void RunConfig::validate() const {
    if (pca_dim < 0) raise(ErrorCode::ConfigError, "--pca-dim must be >= 0");
    if (probe_size < 2) raise(ErrorCode::ConfigError, "--probe-size must be >= 2");
    if (estimators.empty()) raise(ErrorCode::ConfigError, "at least one estimator is required");
    if (k < 1) raise(ErrorCode::ConfigError, "--k must be >= 1");
    if (!std::isfinite(lambda)) raise(ErrorCode::ConfigError, "--lambda must be finite");
    for (auto w : hidden_widths) {
        if (w < 1) raise(ErrorCode::ConfigError, "hidden widths must be >= 1");
    }
    if (random_seeds < 1) raise(ErrorCode::ConfigError, "--random-seeds must be >= 1");
    if (seeds.empty()) raise(ErrorCode::ConfigError, "at least one seed is required");
    if (jobs < 1) raise(ErrorCode::ConfigError, "--jobs must be >= 1");
    for (const auto &e : resolved_estimators()) (void)make_estimator(e);
}

std::vector<std::string> RunConfig::resolved_estimators() const {
    std::vector<std::string> out;
    for (const auto &name : estimators) {
        if (name == "combo") {
            EstimatorSpec s;
            s.kind = EstimatorKind::linear_combo;
            s.lambda = lambda;
            out.push_back(s.to_string());
        } else if (name == "knn") {
            EstimatorSpec s;
            s.kind = EstimatorKind::knn_cv;
            s.k = k;
            out.push_back(s.to_string());
        } else {
            out.push_back(name);
        }
    }
    return out;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["kernel"] = kernel.to_string();
    j["pca_dim"] = pca_dim;
    j["pca_applied_to"] = {"pretrained", "random"};
    j["probe_size"] = probe_size;
    j["estimators"] = resolved_estimators();
    j["lambda"] = lambda;
    j["k"] = k;
    j["random_net"] = {{"hidden_widths", hidden_widths},
                       {"init", to_string(init)},
                       {"num_seeds", random_seeds},
                       {"activation", "relu"},
                       {"bias", "zero"}};
    j["seeds"] = seeds;
    nlohmann::json paths = nlohmann::json::object();
    auto put = [&](const char *key, const std::string &value) {
        if (!value.empty()) paths[key] = value;
    };
    put("features", features);
    put("labels", labels);
    put("random", random);
    put("manifest", manifest);
    put("target_features", target_features);
    put("target_labels", target_labels);
    put("targets", targets);
    put("ground_truth", ground_truth);
    put("out", out);
    j["paths"] = paths;
    j["target_id"] = target_id;
    if (layers > 0 || source_size > 0) j["model_meta"] = {{"layers", layers}, {"source_size", source_size}};
    return j;
}

FeatureMatrix reduce_dim(const FeatureMatrix &features, long long pca_dim) {
    if (pca_dim <= 0 || features.d() <= pca_dim) return features;
    const Eigen::Index k = std::min<Eigen::Index>(pca_dim, features.n() - 1);
    if (k < 1) raise(ErrorCode::TooFewSamples, "PCA needs at least 2 samples");
    const auto model = pca_fit(features, k);
    return pca_transform(model, features);
}

std::vector<std::size_t> probe_indices(const LabelVector &labels, long long probe_size, std::uint64_t seed,
                                       const std::string &target_id, std::vector<std::string> *warnings) {
    return sample_probe_indices(labels, static_cast<std::size_t>(probe_size),
                                derive_seed(seed, "cli.probe/" + target_id), warnings);
}

FeatureMatrix random_reference(const FeatureMatrix &raw_probe, Eigen::Index output_dim, const RunConfig &config,
                               std::uint64_t seed, const std::string &target_id) {
    RandomNetSpec spec;
    spec.input_dim = raw_probe.d();
    spec.hidden_widths.assign(config.hidden_widths.begin(), config.hidden_widths.end());
    spec.output_dim = output_dim;
    spec.init = config.init;
    spec.num_seeds = config.random_seeds;
    spec.base_seed = derive_seed(seed, "cli.random/" + target_id);
    return reduce_dim(random_mlp_features(raw_probe, spec), config.pca_dim);
}

std::string format_score(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    std::string s(buf, res.ptr);
    if (std::isfinite(value) && s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

int cmd_score(const RunConfig &config, std::ostream &out, std::ostream &) {
    config.validate();
    require_path(config.features, "--features");
    const auto estimators = config.resolved_estimators();
    if (estimators.size() != 1) raise(ErrorCode::ConfigError, "score takes exactly one estimator");
    const std::string &name = estimators.front();
    const auto needs = make_estimator(name)->needs();
    if (needs.random && config.random.empty()) raise(ErrorCode::ConfigError, "random features required (--random)");
    if (needs.meta && (config.layers < 1 || config.source_size < 1)) {
        raise(ErrorCode::ConfigError, "model metadata required (--layers, --source-size)");
    }

    auto file = io::read_features(config.features);
    LabelVector labels;
    if (!config.labels.empty()) {
        labels = io::read_labels(config.labels);
    } else if (file.labels) {
        labels = *file.labels;
    } else if (needs.labels) {
        raise(ErrorCode::ConfigError, "labels required (--labels)");
    }
    const std::size_t n = static_cast<std::size_t>(file.features.n());
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    std::vector<std::string> warnings;
    if (labels.size() > 0) {
        if (labels.size() != n) raise(ErrorCode::ShapeMismatch, "labels and features differ in length");
        rows = probe_indices(labels, config.probe_size, config.seeds.front(), config.target_id, &warnings);
    } else if (n > static_cast<std::size_t>(config.probe_size)) {
        rows.resize(static_cast<std::size_t>(config.probe_size));
    }
    std::optional<FeatureMatrix> random;
    if (needs.random) random = load_probe_rows(config.random, n, rows, Provenance::random);
    const FeatureMatrix probe = file.features.select_rows(rows);
    const LabelVector probe_labels = labels.size() > 0 ? labels.select(rows) : LabelVector();

    const auto start = std::chrono::steady_clock::now();
    const FeatureMatrix pre = reduce_dim(probe, config.pca_dim);
    std::optional<FeatureMatrix> ref;
    if (random) ref = reduce_dim(*random, config.pca_dim);
    const ModelMeta meta{config.layers, config.source_size, static_cast<long long>(n)};
    const double value = score(name, make_request(name, pre, ref ? &*ref : nullptr, probe_labels, config.kernel, meta));
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json record{{"estimator", name},      {"score", value},
                          {"time_ms", ms},          {"probe_size", rows.size()},
                          {"feature_dim", pre.d()}, {"warnings", warnings},
                          {"version", version()},   {"config", config.to_json()}};
    out << format_score(value) << '\n' << record.dump() << '\n';
    return kExitOk;
}

int cmd_rank(const RunConfig &config, std::ostream &out, std::ostream &err) {
    config.validate();
    require_path(config.manifest, "--manifest");
    const auto estimators = config.resolved_estimators();
    if (estimators.size() != 1) raise(ErrorCode::ConfigError, "rank takes exactly one estimator");
    const bool need_random = any_needs_random(estimators);
    const auto manifest = io::load_manifest(config.manifest);

    std::optional<fs::path> labels_path;
    if (!config.target_labels.empty()) labels_path = config.target_labels;
    TargetData target;
    if (!config.target_features.empty()) {
        target = load_target(config.target_features, labels_path, need_random && config.random.empty());
    } else if (labels_path) {
        target.labels = io::read_labels(*labels_path);
    } else {
        raise(ErrorCode::ConfigError, "--target-labels or --target-features is required");
    }
    if (need_random && config.random.empty() && !target.raw) {
        raise(ErrorCode::ConfigError, "random features required (--random or --target-features)");
    }
    std::vector<std::string> warnings;
    const auto probe = probe_indices(target.labels, config.probe_size, config.seeds.front(), config.target_id, &warnings);
    std::optional<fs::path> random_file;
    if (!config.random.empty()) random_file = config.random;
    const auto results = score_models(config, estimators, manifest.models, config.target_id, target,
                                      static_cast<long long>(target.labels.size()), probe, config.seeds.front(), random_file);

    std::vector<std::pair<std::string, double>> ranked;
    bool failed = false;
    bool degenerate = false;
    for (std::size_t m = 0; m < results.size(); ++m) {
        if (results[m].score[0]) {
            ranked.emplace_back(manifest.models[m].model_id, *results[m].score[0]);
        } else {
            failed = true;
            degenerate = degenerate || (results[m].code[0] && is_degenerate_input(*results[m].code[0]));
            err << "model " << manifest.models[m].model_id << ": " << results[m].error[0] << '\n';
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto &w : warnings) err << "warning: " << w << '\n';
    std::ostringstream table;
    table << "rank,model_id,score\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        table << i + 1 << ',' << ranked[i].first << ',' << format_score(ranked[i].second) << '\n';
    }
    out << table.str();
    if (!config.out.empty()) io::write_text(config.out, table.str());
    if (!failed) return kExitOk;
    return ranked.empty() && degenerate ? kExitDegenerate : kExitPartial;
}

int cmd_eval(const RunConfig &config, std::ostream &out, std::ostream &err) {
    config.validate();
    require_path(config.manifest, "--manifest");
    require_path(config.targets, "--targets");
    require_path(config.ground_truth, "--ground-truth");
    const auto estimators = config.resolved_estimators();
    const bool need_random = any_needs_random(estimators);
    const auto manifest = io::load_manifest(config.manifest);
    const auto targets = io::load_targets(config.targets);
    const auto truth = io::load_score_table(config.ground_truth);

    std::map<std::pair<std::string, std::string>, double> accuracy;
    for (const auto &row : truth.rows()) accuracy[{row.model_id, row.target_id}] = row.accuracy;
    for (const auto &t : targets) {
        for (const auto &m : manifest.models) {
            if (!accuracy.count({m.model_id, t.target_id})) {
                raise(ErrorCode::SchemaError,
                      "ground truth missing for (" + m.model_id + ", " + t.target_id + ")");
            }
        }
    }
    if (targets.empty()) raise(ErrorCode::SchemaError, "targets file lists no targets");

    bool partial = false;
    nlohmann::json summary;
    summary["version"] = version();
    summary["config"] = config.to_json();
    summary["tau_scheme"] = kTauScheme;
    summary["accuracy_unit"] = to_string(truth.unit());
    std::map<std::string, std::vector<double>> pcs;
    std::map<std::string, std::vector<double>> taus;
    nlohmann::json per_seed = nlohmann::json::array();
    std::vector<std::string> run_warnings;

    for (const auto seed : config.seeds) {
        std::map<std::string, ScoreTable> tables;
        for (const auto &e : estimators) tables.emplace(e, ScoreTable(truth.unit()));
        std::vector<std::string> seed_warnings;

        for (const auto &t : targets) {
            const auto target = load_target(t.features, t.labels, need_random);
            std::vector<std::string> probe_warnings;
            const auto probe = probe_indices(target.labels, config.probe_size, seed, t.target_id, &probe_warnings);
            for (const auto &w : probe_warnings) seed_warnings.push_back("target '" + t.target_id + "': " + w);
            const long long target_size = t.size.value_or(static_cast<long long>(target.labels.size()));
            const auto results = score_models(config, estimators, manifest.models, t.target_id, target, target_size,
                                              probe, seed, std::nullopt);
            for (std::size_t m = 0; m < results.size(); ++m) {
                const auto &id = manifest.models[m].model_id;
                for (std::size_t e = 0; e < estimators.size(); ++e) {
                    if (results[m].score[e]) {
                        tables.at(estimators[e]).add(
                            {id, t.target_id, {{estimators[e], *results[m].score[e]}}, accuracy.at({id, t.target_id})});
                    } else {
                        partial = true;
                        seed_warnings.push_back(estimators[e] + " failed on (" + id + ", " + t.target_id +
                                                "): " + results[m].error[e]);
                    }
                }
            }
        }

        nlohmann::json seed_entry{{"seed", seed}, {"estimators", nlohmann::json::object()}};
        for (const auto &e : estimators) {
            const fs::path dir = fs::path(config.out) / ("seed_" + std::to_string(seed));
            std::optional<EvalReport> report;
            if (auto f = capture([&] { report = te_aggregate(tables.at(e), e); })) {
                partial = true;
                seed_warnings.push_back(e + ": no report: " + f->what);
                seed_entry["estimators"][e] = {{"status", f->what}};
                continue;
            }
            for (const auto &w : seed_warnings) report->warnings.push_back(w);
            report->metadata["config"] = config.to_json();
            report->metadata["version"] = version();
            report->metadata["seed"] = seed;
            pcs[e].push_back(report->mean_pc);
            taus[e].push_back(report->mean_tau);
            seed_entry["estimators"][e] = {{"mean_pc", report->mean_pc},
                                           {"mean_tau", report->mean_tau},
                                           {"num_targets", report->num_included}};
            if (!config.out.empty()) {
                io::write_text(dir / (file_stem_for(e) + ".json"), dump(report_to_json(*report)));
                io::write_text(dir / (file_stem_for(e) + ".csv"), report_to_csv(*report));
            }
        }
        per_seed.push_back(seed_entry);
        for (const auto &w : seed_warnings) run_warnings.push_back("seed " + std::to_string(seed) + ": " + w);
    }

    std::ostringstream csv;
    csv << "estimator,num_seeds,mean_pc,mean_pc_std,mean_tau,mean_tau_std\n";
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &e : estimators) {
        const auto &p = pcs[e];
        const auto &t = taus[e];
        if (p.empty()) {
            csv << e << ",0,,,,\n";
            rows.push_back({{"estimator", e}, {"num_seeds", 0}});
            continue;
        }
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%zu,%.17g,%.17g,%.17g,%.17g\n", e.c_str(), p.size(), mean_of(p),
                      std_of(p), mean_of(t), std_of(t));
        csv << line;
        rows.push_back({{"estimator", e},
                        {"num_seeds", p.size()},
                        {"mean_pc", mean_of(p)},
                        {"mean_pc_std", std_of(p)},
                        {"mean_tau", mean_of(t)},
                        {"mean_tau_std", std_of(t)}});
    }
    summary["per_seed"] = per_seed;
    summary["summary"] = rows;
    summary["warnings"] = run_warnings;
    if (!config.out.empty()) {
        io::write_text(fs::path(config.out) / "summary.json", dump(summary));
        io::write_text(fs::path(config.out) / "summary.csv", csv.str());
    }
    out << csv.str();
    for (const auto &w : run_warnings) err << "warning: " << w << '\n';
    return partial ? kExitPartial : kExitOk;
}

void SynthConfig::validate() const {
    if (out.empty()) raise(ErrorCode::ConfigError, "--out is required");
    if (mode == "gaussian") {
        if (!(separation >= 0.0) || !std::isfinite(separation)) raise(ErrorCode::ConfigError, "--sep must be >= 0");
        if (n < 4 || n % 2 != 0) raise(ErrorCode::ConfigError, "--n must be even and >= 4");
        if (dim < 2) raise(ErrorCode::ConfigError, "--dim must be >= 2");
    } else if (mode == "zoo" || mode == "hard") {
        if (models < 1) raise(ErrorCode::ConfigError, "--models must be >= 1");
        if (feature_dim < 1) raise(ErrorCode::ConfigError, "--feature-dim must be >= 1");
        if (mode == "zoo" && suite != "easy" && suite != "hard" && suite != "mixed") {
            raise(ErrorCode::ConfigError, "--suite must be easy, hard or mixed");
        }
        if (mode == "hard" && (classes < 2 || !(hard_separation >= 0.0))) {
            raise(ErrorCode::ConfigError, "hard task needs --classes >= 2 and --sep >= 0");
        }
    } else {
        raise(ErrorCode::ConfigError, "unknown synth mode '" + mode + "'");
    }
}

nlohmann::json SynthConfig::to_json() const {
    nlohmann::json j{{"command", "synth"}, {"mode", mode}, {"seed", seed}, {"out", out}};
    if (mode == "gaussian") {
        j["sep"] = separation;
        j["n"] = n;
        j["dim"] = dim;
    } else {
        j["models"] = models;
        j["feature_dim"] = feature_dim;
        if (mode == "zoo") j["suite"] = suite;
        if (mode == "hard") {
            j["classes"] = classes;
            j["sep"] = hard_separation;
        }
    }
    return j;
}

int cmd_synth(const SynthConfig &config, std::ostream &out, std::ostream &) {
    config.validate();
    const fs::path dir = config.out;
    if (config.mode == "gaussian") {
        const auto spec = synth::two_gaussians(config.separation, config.dim, static_cast<int>(config.n / 2),
                                               derive_seed(config.seed, "synth.gaussian"));
        const auto data = synth::gen_gaussian_mixture(spec);
        io::write_features(dir / "gaussian.kfea", data.features, data.labels);
        io::write_text(dir / "synth.json", dump({{"version", version()}, {"config", config.to_json()}}));
        out << "gaussian: " << data.features.n() << " samples, d=" << data.features.d() << ", separation "
            << config.separation << " -> " << (dir / "gaussian.kfea").string() << '\n';
        return kExitOk;
    }

    std::vector<std::pair<std::string, synth::TaskSpec>> tasks;
    if (config.mode == "hard") {
        synth::TaskSpec t = synth::hard_task_spec(derive_seed(config.seed, "synth.task", {1}));
        t.num_classes = config.classes;
        t.separation = config.hard_separation;
        t.dim = std::max<Eigen::Index>(t.dim, config.classes);
        tasks.emplace_back("hard", t);
    } else {
        if (config.suite != "hard") tasks.emplace_back("easy", synth::easy_task_spec(derive_seed(config.seed, "synth.task", {0})));
        if (config.suite != "easy") tasks.emplace_back("hard", synth::hard_task_spec(derive_seed(config.seed, "synth.task", {1})));
    }

    synth::SyntheticZooSpec zs;
    zs.feature_dim = config.feature_dim;
    zs.qualities = synth::quality_grid(config.models);
    zs.seed = derive_seed(config.seed, "synth.zoo");

    io::ModelManifest manifest;
    std::vector<io::TargetEntry> target_entries;
    std::vector<ScoreRow> truth;
    nlohmann::json meta_models = nlohmann::json::array();
    for (std::size_t m = 0; m < zs.qualities.size(); ++m) manifest.models.emplace_back();
    for (const auto &[tid, task] : tasks) {
        const auto data = synth::gen_hard_task(task);
        const auto zoo = synth::gen_synthetic_zoo(zs, data);
        const fs::path target_file = dir / "targets" / (tid + ".kfea");
        io::write_features(target_file, zoo.pool.features, zoo.pool.labels);
        target_entries.push_back({tid, target_file, std::nullopt, static_cast<long long>(zoo.pool.features.n())});
        for (std::size_t m = 0; m < zoo.models.size(); ++m) {
            const auto &model = zoo.models[m];
            auto &entry = manifest.models[m];
            const fs::path file = dir / "models" / model.model_id / (tid + ".kfea");
            io::write_features(file, model.features, zoo.pool.labels);
            entry.model_id = model.model_id;
            entry.feature_files[tid] = file;
            entry.architecture = "synthetic";
            entry.layers = 1;
            entry.source_name = "synthetic";
            entry.source_size = data.features.n();
            truth.push_back({model.model_id, tid, {}, model.ground_truth_accuracy});
        }
    }
    for (std::size_t m = 0; m < zs.qualities.size(); ++m) {
        meta_models.push_back({{"model_id", manifest.models[m].model_id}, {"quality", zs.qualities[m]}});
    }
    nlohmann::json meta_tasks = nlohmann::json::array();
    for (const auto &[tid, task] : tasks) {
        meta_tasks.push_back({{"target_id", tid},
                              {"classes", task.num_classes},
                              {"separation", task.separation},
                              {"dim", task.dim},
                              {"n_per_class", task.n_per_class}});
    }
    io::write_manifest(dir / "manifest.json", manifest);
    io::write_targets(dir / "targets.json", target_entries);
    io::write_text(dir / "ground_truth.csv", io::format_ground_truth(truth, AccuracyUnit::fraction));
    io::write_text(dir / "synth.json", dump({{"version", version()},
                                             {"config", config.to_json()},
                                             {"models", meta_models},
                                             {"targets", meta_tasks},
                                             {"jitter_variance", zs.jitter_variance}}));
    out << config.mode << ": " << manifest.models.size() << " models x " << tasks.size() << " targets -> "
        << dir.string() << '\n';
    return kExitOk;
}

namespace {

std::string canonical_flag(const std::string &flag) {
    static const std::map<std::string, std::string> aliases{{"--seeds", "--seed"}, {"--estimators", "--estimator"}};
    const auto it = aliases.find(flag);
    return it == aliases.end() ? flag : it->second;
}

// Appends flags from the --config JSON file that the command line does not set.
std::vector<std::string> expand_config(const std::vector<std::string> &args) {
    std::optional<std::string> path;
    std::set<std::string> given;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto &a = args[i];
        if (a.rfind("--", 0) != 0) continue;
        const auto eq = a.find('=');
        const std::string flag = a.substr(0, eq);
        given.insert(canonical_flag(flag));
        if (flag == "--config") {
            if (eq != std::string::npos) path = a.substr(eq + 1);
            else if (i + 1 < args.size()) path = args[i + 1];
            else raise(ErrorCode::ConfigError, "--config needs a file");
        }
    }
    if (!path) return args;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_text(*path));
    } catch (const nlohmann::json::exception &e) {
        raise(ErrorCode::ConfigError, "config file " + *path + ": " + e.what());
    }
    if (!doc.is_object()) raise(ErrorCode::ConfigError, "config file must hold a JSON object");
    std::vector<std::string> out = args;
    auto scalar = [](const nlohmann::json &v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    for (const auto &[key, value] : doc.items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (flag == "--config" || given.count(canonical_flag(flag))) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) out.push_back(flag);
        } else if (value.is_array()) {
            out.push_back(flag);
            for (const auto &v : value) out.push_back(scalar(v));
        } else if (!value.is_null()) {
            out.push_back(flag);
            out.push_back(scalar(value));
        }
    }
    return out;
}

int default_jobs() {
    if (const char *env = std::getenv("KITE_JOBS")) {
        char *end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    }
    return 1;
}

}  // namespace

int run(const std::vector<std::string> &args_in, std::ostream &out, std::ostream &err) {
    try {
        auto args = expand_config(args_in);
        CLI::App app{"Kernel-based transferability estimation", "kite"};
        app.set_version_flag("--version", version());
        app.require_subcommand(1);

        RunConfig cfg;
        cfg.jobs = default_jobs();
        SynthConfig syn;
        std::string kernel = "linear";
        std::string init = "he-normal";
        std::string config_path;
        double sep = std::nan("");

        auto common = [&](CLI::App *sub) {
            sub->add_option("--config", config_path, "JSON file supplying flags not given on the command line");
            sub->add_option("--kernel", kernel, "linear | gaussian[:sigma] | laplacian[:sigma]");
            sub->add_option("--pca-dim", cfg.pca_dim, "PCA target dimension, 0 to disable");
            sub->add_option("--probe-size", cfg.probe_size);
            sub->add_option("--estimator,--estimators", cfg.estimators)->delimiter(',');
            sub->add_option("--lambda", cfg.lambda);
            sub->add_option("--k", cfg.k);
            sub->add_option("--hidden", cfg.hidden_widths)->delimiter(',');
            sub->add_option("--init", init, "xavier-normal | he-normal | he-uniform");
            sub->add_option("--random-seeds", cfg.random_seeds, "untrained networks averaged");
            sub->add_option("--seed,--seeds", cfg.seeds)->delimiter(',');
            sub->add_option("--jobs", cfg.jobs);
        };
        auto *score_cmd = app.add_subcommand("score", "Score one model on one probe");
        common(score_cmd);
        score_cmd->add_option("--features", cfg.features);
        score_cmd->add_option("--labels", cfg.labels);
        score_cmd->add_option("--random", cfg.random);
        score_cmd->add_option("--layers", cfg.layers);
        score_cmd->add_option("--source-size", cfg.source_size);
        auto *rank_cmd = app.add_subcommand("rank", "Rank the models of a manifest on one target");
        common(rank_cmd);
        rank_cmd->add_option("--manifest", cfg.manifest);
        rank_cmd->add_option("--target-id", cfg.target_id);
        rank_cmd->add_option("--target-features", cfg.target_features);
        rank_cmd->add_option("--target-labels", cfg.target_labels);
        rank_cmd->add_option("--random", cfg.random);
        rank_cmd->add_option("--out", cfg.out);
        auto *eval_cmd = app.add_subcommand("eval", "Correlate estimator scores with ground truth");
        common(eval_cmd);
        eval_cmd->add_option("--manifest", cfg.manifest);
        eval_cmd->add_option("--targets", cfg.targets);
        eval_cmd->add_option("--ground-truth", cfg.ground_truth);
        eval_cmd->add_option("--out", cfg.out);
        auto *synth_cmd = app.add_subcommand("synth", "Generate synthetic data and model zoos");
        synth_cmd->add_option("--config", config_path);
        synth_cmd->add_option("mode", syn.mode, "gaussian | zoo | hard")->required();
        synth_cmd->add_option("--out", syn.out);
        synth_cmd->add_option("--seed", syn.seed);
        synth_cmd->add_option("--sep", sep);
        synth_cmd->add_option("--n", syn.n);
        synth_cmd->add_option("--dim", syn.dim);
        synth_cmd->add_option("--models", syn.models);
        synth_cmd->add_option("--suite", syn.suite);
        synth_cmd->add_option("--feature-dim", syn.feature_dim);
        synth_cmd->add_option("--classes", syn.classes);

        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::ParseError &e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kExitOk : kExitConfig;
        }

        if (synth_cmd->parsed()) {
            if (!std::isnan(sep)) {
                syn.separation = sep;
                syn.hard_separation = sep;
            }
            return cmd_synth(syn, out, err);
        }
        cfg.kernel = KernelKind::parse(kernel);
        cfg.init = parse_init_scheme(init);
        if (score_cmd->parsed()) {
            cfg.command = "score";
            return cmd_score(cfg, out, err);
        }
        if (rank_cmd->parsed()) {
            cfg.command = "rank";
            return cmd_rank(cfg, out, err);
        }
        cfg.command = "eval";
        return cmd_eval(cfg, out, err);
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return is_degenerate_input(e.code()) ? kExitDegenerate : kExitConfig;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace kite::cli
