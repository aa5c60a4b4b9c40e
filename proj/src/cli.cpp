// SPDX-License-Identifier: Apache-2.0
#include "instructmine/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>
#include <ostream>

#include "instructmine/corpus.hpp"
#include "instructmine/csv.hpp"
#include "instructmine/error.hpp"
#include "instructmine/indicators.hpp"
#include "instructmine/report.hpp"
#include "instructmine/rng.hpp"
#include "instructmine/rule.hpp"
#include "instructmine/sampling.hpp"
#include "instructmine/scoring.hpp"
#include "instructmine/stats.hpp"
#include "instructmine/study.hpp"
#include "instructmine/text.hpp"

namespace instructmine::cli {

namespace fs = std::filesystem;
using indicators::Indicator;

namespace {

struct KnnArgs {
    std::size_t i = 6;
    std::string metric = "cosine";
    std::string mode = "exact";
    std::string reduce = "ith";
    std::string scope = "dataset";
    double mtld_threshold = 0.72;
};

void add_knn_options(CLI::App* app, KnnArgs& a, bool with_scope) {
    app->add_option("--knn-i", a.i, "Neighbour rank for KNN-i")->capture_default_str();
    app->add_option("--metric", a.metric, "cosine or euclidean")->capture_default_str();
    app->add_option("--knn-mode", a.mode, "exact or approximate")->capture_default_str();
    app->add_option("--knn-reduce", a.reduce, "ith or mean")->capture_default_str();
    if (with_scope) app->add_option("--knn-scope", a.scope, "dataset or pool")->capture_default_str();
    app->add_option("--mtld-threshold", a.mtld_threshold, "MTLD type-token ratio threshold")->capture_default_str();
}

indicators::AggregateOptions to_options(const KnnArgs& a, std::uint64_t seed) {
    indicators::AggregateOptions o;
    o.mtld.ttr_threshold = a.mtld_threshold;
    o.knn.i = a.i;
    o.knn.metric = indicators::parse_metric(a.metric);
    o.knn.mode = indicators::parse_knn_mode(a.mode);
    if (a.reduce == "ith") {
        o.knn.reduce = indicators::KnnReduce::ith;
    } else if (a.reduce == "mean") {
        o.knn.reduce = indicators::KnnReduce::mean_first;
    } else {
        throw UsageError("unknown knn reduce \"" + a.reduce + "\" (expected ith or mean)");
    }
    if (a.scope == "dataset") {
        o.scope = indicators::KnnScope::dataset;
    } else if (a.scope == "pool") {
        o.scope = indicators::KnnScope::pool;
    } else {
        throw UsageError("unknown knn scope \"" + a.scope + "\" (expected dataset or pool)");
    }
    o.knn.descent.seed = derive_seed(seed, "knn/nn-descent");
    return o;
}

Json knn_json(const KnnArgs& a) {
    return {{"knn_i", a.i},         {"metric", a.metric}, {"knn_mode", a.mode},
            {"knn_reduce", a.reduce}, {"knn_scope", a.scope}, {"mtld_threshold", a.mtld_threshold}};
}

/// Resolved configuration written beside every run's outputs.
struct RunConfig {
    std::string command;
    std::uint64_t seed = 0;
    Json paths = Json::object();
    Json options = Json::object();

    std::string serialize() const {
        Json out;
        out["command"] = command;
        out["seed"] = seed;
        out["paths"] = paths;
        out["options"] = options;
        out["version"] = std::string(kVersion);
        return out.dump(2) + "\n";
    }
};

fs::path config_beside(const fs::path& output) {
    fs::path p = output;
    p += ".run.json";
    return p;
}

void require_fresh(std::initializer_list<fs::path> paths) {
    for (const auto& p : paths) {
        if (fs::exists(p)) throw DataError("refusing to overwrite existing output " + p.string());
    }
}

std::vector<Indicator> parse_indicator_list(const std::vector<std::string>& names) {
    std::vector<Indicator> out;
    for (const auto& n : names) {
        const Indicator i = indicators::parse_indicator(n);
        if (std::find(out.begin(), out.end(), i) != out.end()) throw UsageError("indicator listed twice: " + n);
        out.push_back(i);
    }
    return out;
}

std::vector<Indicator> all_indicators() {
    return {indicators::kAllIndicators.begin(), indicators::kAllIndicators.end()};
}

// ---- subcommands --------------------------------------------------------

struct IngestArgs {
    std::string source;
    fs::path input;
    fs::path output;
    std::size_t cap = corpus::kAlpacaCap;
    std::size_t clusters = corpus::kWikihowClusters;
    std::size_t target = corpus::kWikihowTarget;
    fs::path embeddings;
};

int cmd_ingest(const IngestArgs& a, std::uint64_t seed, std::ostream& out) {
    const corpus::Source source = corpus::parse_source(a.source);
    require_fresh({a.output, config_beside(a.output)});
    RunConfig config{"ingest", seed};
    config.paths = {{"input", a.input.generic_string()}, {"output", a.output.generic_string()}};
    config.options["source"] = std::string(corpus::to_string(source));

    corpus::IngestResult result;
    switch (source) {
        case corpus::Source::alpaca:
            result = corpus::ingest_alpaca(a.input, a.cap, derive_seed(seed, "ingest/alpaca"));
            config.options["cap"] = a.cap;
            break;
        case corpus::Source::open_assistant:
            result = corpus::ingest_open_assistant(a.input);
            break;
        case corpus::Source::stack_exchange:
            result = corpus::ingest_stack_exchange(a.input);
            break;
        case corpus::Source::wikihow: {
            if (a.embeddings.empty()) throw UsageError("ingest wikihow needs --embeddings");
            corpus::EmbeddingLookup lookup;
            for (const auto& [id, v] : scoring::load_embeddings(a.embeddings).vectors()) lookup.emplace(id, v);
            corpus::WikihowOptions opts;
            opts.clusters = a.clusters;
            opts.target = a.target;
            opts.seed = derive_seed(seed, "ingest/wikihow");
            result = corpus::ingest_wikihow(a.input, lookup, opts);
            config.paths["embeddings"] = a.embeddings.generic_string();
            config.options["clusters"] = a.clusters;
            config.options["target"] = a.target;
            break;
        }
        case corpus::Source::dolly:
            result = corpus::ingest_dolly(a.input);
            break;
        case corpus::Source::custom:
            throw UsageError("ingest: no reader for source \"custom\"");
    }
    result.corpus.name = a.output.stem().string();
    corpus::write_store(result.corpus, a.output);
    write_new_file(config_beside(a.output), config.serialize());
    out << result.report.to_json().dump(2) << "\n";
    return kOk;
}

struct ScoreArgs {
    fs::path corpus;
    fs::path scores;
    std::string endpoint;
    fs::path out;
    fs::path embeddings_out;
    std::size_t batch = 32;
    std::size_t parallelism = 4;
    std::size_t retries = 3;
};

int cmd_score(ScoreArgs a, std::uint64_t seed, std::ostream& out) {
    const corpus::Corpus c = corpus::read_store(a.corpus);
    std::vector<std::string> ids;
    for (const auto& s : c.samples) ids.push_back(s.id);
    if (a.scores.empty() && a.endpoint.empty()) a.endpoint = scoring::default_endpoint();
    if (a.scores.empty() && a.endpoint.empty()) {
        throw UsageError("score: give --scores <file> or --endpoint <url> (or set INSTRUCTMINE_ENDPOINT)");
    }
    if (!a.scores.empty() && !a.embeddings_out.empty()) {
        throw UsageError("score: --embeddings-out needs an endpoint");
    }
    require_fresh({a.out, config_beside(a.out)});
    if (!a.embeddings_out.empty()) require_fresh({a.embeddings_out});

    RunConfig config{"score", seed};
    config.paths = {{"corpus", a.corpus.generic_string()}, {"out", a.out.generic_string()}};
    std::string scores_text;
    std::string embeddings_text;
    if (!a.scores.empty()) {
        config.paths["scores"] = a.scores.generic_string();
        scores_text = scoring::serialize_scores(scoring::covering(scoring::load_scores(a.scores), c), ids);
    } else {
        scoring::ClientOptions opts;
        opts.endpoint = a.endpoint;
        opts.batch = a.batch;
        opts.parallelism = a.parallelism;
        opts.max_retries = a.retries;
        config.options = {{"endpoint", a.endpoint}, {"batch", a.batch}, {"parallelism", a.parallelism},
                          {"max_retries", a.retries}};
        scores_text = scoring::serialize_scores(scoring::fetch_scores(c.samples, opts), ids);
        if (!a.embeddings_out.empty()) {
            config.paths["embeddings_out"] = a.embeddings_out.generic_string();
            embeddings_text = scoring::serialize_embeddings(scoring::fetch_embeddings(c.samples, opts), ids);
        }
    }
    write_new_file(a.out, scores_text);
    if (!a.embeddings_out.empty()) write_new_file(a.embeddings_out, embeddings_text);
    write_new_file(config_beside(a.out), config.serialize());
    out << "scored " << ids.size() << " samples\n";
    return kOk;
}

struct IndicatorArgs {
    fs::path corpus;
    fs::path scores;
    fs::path embeddings;
    fs::path out;
    KnnArgs knn;
};

int cmd_indicators(const IndicatorArgs& a, std::uint64_t seed, std::ostream& out) {
    const auto options = to_options(a.knn, seed);
    require_fresh({a.out, config_beside(a.out)});
    const corpus::Corpus c = corpus::read_store(a.corpus);
    const auto report =
        indicators::aggregate(c, scoring::load_scores(a.scores), scoring::load_embeddings(a.embeddings), options);
    RunConfig config{"indicators", seed};
    config.paths = {{"corpus", a.corpus.generic_string()},
                    {"scores", a.scores.generic_string()},
                    {"embeddings", a.embeddings.generic_string()},
                    {"out", a.out.generic_string()}};
    config.options = knn_json(a.knn);
    write_new_file(a.out, report.to_json().dump(2) + "\n");
    write_new_file(config_beside(a.out), config.serialize());
    out << report.dataset.to_json().dump() << "\n";
    return kOk;
}

struct FuseArgs {
    fs::path manifest;
    std::vector<std::string> labels;
    fs::path out_dir;
};

int cmd_fuse(const FuseArgs& a, std::uint64_t seed, std::ostream& out) {
    const auto manifest = sampling::StudyManifest::load(a.manifest);
    std::vector<const sampling::FusionSpec*> chosen;
    for (const auto& spec : manifest.specs) {
        if (a.labels.empty() || std::find(a.labels.begin(), a.labels.end(), spec.label) != a.labels.end()) {
            chosen.push_back(&spec);
        }
    }
    for (const auto& l : a.labels) {
        if (std::none_of(chosen.begin(), chosen.end(), [&](const auto* s) { return s->label == l; })) {
            throw DataError("fuse: manifest has no spec \"" + l + "\"");
        }
    }
    for (const auto* spec : chosen) require_fresh({a.out_dir / (spec->label + ".jsonl")});
    require_fresh({a.out_dir / "run.json"});

    const auto corpora = study::load_corpora(manifest);
    Json allocations = Json::object();
    std::vector<std::pair<fs::path, std::string>> files;
    for (const auto* spec : chosen) {
        const auto fused = sampling::fuse(*spec, corpora);
        files.emplace_back(a.out_dir / (spec->label + ".jsonl"), corpus::serialize_store(fused.corpus));
        allocations[spec->label] = fused.allocations;
    }
    for (const auto& [path, text] : files) write_new_file(path, text);
    RunConfig config{"sample fuse", seed};
    config.paths = {{"manifest", a.manifest.generic_string()}, {"out_dir", a.out_dir.generic_string()}};
    config.options = {{"master_seed", manifest.master_seed}, {"allocations", allocations}};
    write_new_file(a.out_dir / "run.json", config.serialize());
    out << "wrote " << files.size() << " fused datasets\n";
    return kOk;
}

struct TierArgs {
    fs::path corpus;
    std::string indicator = "rew";
    fs::path scores;
    fs::path embeddings;
    std::size_t k = sampling::kTierCount;
    std::size_t size = sampling::kFusionSize;
    bool allow_overlap = false;
    fs::path out_dir;
    KnnArgs knn;
};

int cmd_tiers(const TierArgs& a, std::uint64_t seed, std::ostream& out) {
    sampling::TierSpec spec;
    spec.indicator = indicators::parse_indicator(a.indicator);
    spec.k = a.k;
    spec.size = a.size;
    spec.allow_overlap = a.allow_overlap;
    const auto options = to_options(a.knn, seed);
    const corpus::Corpus pool = corpus::read_store(a.corpus);

    std::vector<std::string> ids;
    for (const auto& s : pool.samples) ids.push_back(s.id);
    std::vector<double> values;
    switch (spec.indicator) {
        case Indicator::len:
            values = indicators::length(pool).values;
            break;
        case Indicator::mtld:
            values = indicators::mtld(pool, options.mtld).values;
            break;
        case Indicator::knn6: {
            if (a.embeddings.empty()) throw UsageError("tiers on knn6 need --embeddings");
            values = indicators::knn_i(ids, scoring::load_embeddings(a.embeddings), options.knn).values.values;
            break;
        }
        default: {
            if (a.scores.empty()) throw UsageError("tiers on a model score need --scores");
            const auto scores = scoring::covering(scoring::load_scores(a.scores), pool);
            for (const auto& id : ids) {
                const auto& s = scores.at(id);
                switch (spec.indicator) {
                    case Indicator::rew: values.push_back(s.rew); break;
                    case Indicator::ppl: values.push_back(s.ppl); break;
                    case Indicator::nat: values.push_back(s.nat); break;
                    case Indicator::coh: values.push_back(s.coh); break;
                    default: values.push_back(s.und); break;
                }
            }
        }
    }
    std::unordered_map<std::string, double> per_sample;
    for (std::size_t i = 0; i < ids.size(); ++i) per_sample.emplace(ids[i], values[i]);
    const auto tiers = sampling::tier_slices(pool, per_sample, spec);
    for (const auto& t : tiers) require_fresh({a.out_dir / (t.name + ".jsonl")});
    require_fresh({a.out_dir / "run.json"});
    for (const auto& t : tiers) write_new_file(a.out_dir / (t.name + ".jsonl"), corpus::serialize_store(t));

    RunConfig config{"sample tiers", seed};
    config.paths = {{"corpus", a.corpus.generic_string()}, {"out_dir", a.out_dir.generic_string()}};
    if (!a.scores.empty()) config.paths["scores"] = a.scores.generic_string();
    if (!a.embeddings.empty()) config.paths["embeddings"] = a.embeddings.generic_string();
    config.options = knn_json(a.knn);
    config.options["indicator"] = std::string(indicators::name(spec.indicator));
    config.options["k"] = a.k;
    config.options["size"] = a.size;
    config.options["allow_overlap"] = a.allow_overlap;
    config.options["starts"] = sampling::tier_starts(pool.size(), a.size, a.k);
    write_new_file(a.out_dir / "run.json", config.serialize());
    out << "wrote " << tiers.size() << " tiers\n";
    return kOk;
}

struct ManifestArgs {
    std::vector<std::string> corpora;  // name=path
    std::size_t fusions = sampling::kStudyFusions;
    std::size_t size = sampling::kFusionSize;
    fs::path out;
};

int cmd_manifest(const ManifestArgs& a, std::uint64_t seed, std::ostream& out) {
    std::vector<std::pair<std::string, fs::path>> corpora;
    for (const auto& entry : a.corpora) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size()) {
            throw UsageError("--corpus expects name=path, got \"" + entry + "\"");
        }
        corpora.emplace_back(entry.substr(0, eq), fs::path(entry.substr(eq + 1)));
    }
    require_fresh({a.out, config_beside(a.out)});
    const auto manifest = sampling::study_manifest(a.fusions, seed, corpora, a.size);
    write_new_file(a.out, manifest.serialize());
    RunConfig config{"sample manifest", seed};
    config.paths = {{"out", a.out.generic_string()}};
    config.options = {{"fusions", a.fusions}, {"size", a.size}};
    write_new_file(config_beside(a.out), config.serialize());
    out << "wrote " << manifest.specs.size() << " fusion specs\n";
    return kOk;
}

struct FitArgs {
    fs::path observations;
    bool stepwise = false;
    double alpha = 0.05;
    bool raw_loss = false;
    std::vector<std::string> variables;
    fs::path out;
    fs::path rule_out;
};

int cmd_fit(const FitArgs& a, std::uint64_t seed, std::ostream& out) {
    const auto variables = a.variables.empty() ? all_indicators() : parse_indicator_list(a.variables);
    require_fresh({a.out, config_beside(a.out)});
    if (!a.rule_out.empty()) require_fresh({a.rule_out});
    if (!a.rule_out.empty() && a.raw_loss) throw UsageError("fit: a rule predicts log-loss; drop --raw-loss");
    const auto obs = stats::read_observations(a.observations);
    const auto design = stats::make_design(obs, variables, !a.raw_loss);

    Json report;
    report["target"] = a.raw_loss ? "loss" : "log_loss";
    report["n"] = obs.size();
    stats::RegressionFit final_fit;
    if (a.stepwise) {
        const auto sw = stats::stepwise(design.y, design.x, design.names, a.alpha);
        report["ols"] = sw.full.to_json(true);
        report["stepwise"] = sw.to_json();
        final_fit = sw.fit;
    } else {
        final_fit = stats::ols(design.y, design.x, design.names);
        report["ols"] = final_fit.to_json(true);
    }
    std::string rule_text;
    if (!a.raw_loss) {
        const auto r = rule::from_fit(final_fit);
        report["rule"] = r.to_json();
        rule_text = r.to_json().dump(2) + "\n";
    }
    write_new_file(a.out, report.dump(2) + "\n");
    if (!a.rule_out.empty()) write_new_file(a.rule_out, rule_text);
    RunConfig config{"fit", seed};
    config.paths = {{"observations", a.observations.generic_string()}, {"out", a.out.generic_string()}};
    if (!a.rule_out.empty()) config.paths["rule_out"] = a.rule_out.generic_string();
    std::vector<std::string> names(design.names.begin() + 1, design.names.end());
    config.options = {{"stepwise", a.stepwise}, {"alpha", a.alpha}, {"raw_loss", a.raw_loss}, {"variables", names}};
    write_new_file(config_beside(a.out), config.serialize());
    out << "r2=" << csv::number(final_fit.r2) << " kept=" << final_fit.variables.size() << "\n";
    return kOk;
}

stats::Reference parse_reference(const std::string& text) {
    if (text == "normal") return stats::Reference::fitted_normal();
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    if (colon == std::string::npos || (kind != "normal" && kind != "uniform")) {
        throw UsageError("reference must be normal, normal:MEAN,SD or uniform:LO,HI");
    }
    const std::string params = text.substr(colon + 1);
    const auto comma = params.find(',');
    if (comma == std::string::npos) throw UsageError("reference \"" + text + "\" needs two parameters");
    double p1 = 0.0;
    double p2 = 0.0;
    try {
        p1 = csv::parse_number(params.substr(0, comma), "reference");
        p2 = csv::parse_number(params.substr(comma + 1), "reference");
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
    return kind == "normal" ? stats::Reference::normal(p1, p2) : stats::Reference::uniform(p1, p2);
}

struct KsArgs {
    fs::path observations;
    std::vector<std::string> variables;
    std::string reference = "normal";
    fs::path out;
};

int cmd_ks(const KsArgs& a, std::uint64_t seed, std::ostream& out) {
    const auto reference = parse_reference(a.reference);
    std::vector<std::string> names = a.variables;
    if (names.empty()) {
        for (auto i : indicators::kAllIndicators) names.emplace_back(indicators::name(i));
    }
    require_fresh({a.out, config_beside(a.out)});
    const auto obs = stats::read_observations(a.observations);
    Json results = Json::array();
    for (const auto& name : names) {
        std::vector<double> column;
        std::string label;
        if (text::lower_ascii(name) == "loss") {
            label = "Loss";
            for (const auto& o : obs) column.push_back(o.loss);
        } else {
            const Indicator ind = indicators::parse_indicator(name);
            label = std::string(indicators::name(ind));
            for (const auto& o : obs) column.push_back(o.indicators[ind]);
        }
        results.push_back(stats::ks_test(column, reference, label).to_json());
    }
    Json report;
    report["ks"] = std::move(results);
    write_new_file(a.out, report.dump(2) + "\n");
    RunConfig config{"ks", seed};
    config.paths = {{"observations", a.observations.generic_string()}, {"out", a.out.generic_string()}};
    config.options = {{"reference", reference.name()}, {"variables", names}};
    write_new_file(config_beside(a.out), config.serialize());
    out << report.dump(2) << "\n";
    return kOk;
}

struct SelectArgs {
    fs::path corpus;
    fs::path scores;
    fs::path embeddings;
    std::string rule = "builtin:eq4";
    std::optional<std::size_t> top;
    std::optional<std::size_t> tiers;
    std::optional<std::size_t> tier_size;
    fs::path out_dir;
    KnnArgs knn;
};

int cmd_select(const SelectArgs& a, std::uint64_t seed, std::ostream& out) {
    if (a.top.has_value() == a.tiers.has_value()) throw UsageError("select: give exactly one of --top or --tiers");
    if (a.tier_size && !a.tiers) throw UsageError("select: --tier-size needs --tiers");
    auto options = to_options(a.knn, seed);
    const rule::QualityRule r =
        a.rule == "builtin:eq4" ? rule::QualityRule::builtin_eq4() : rule::QualityRule::load(a.rule);
    const corpus::Corpus pool = corpus::read_store(a.corpus);
    const auto ranking =
        rule::rank_samples(r, pool, scoring::load_scores(a.scores), scoring::load_embeddings(a.embeddings), options);

    std::vector<rule::Selection> selections;
    if (a.top) {
        selections.push_back(rule::select_top(r, pool, ranking, *a.top));
    } else {
        if (*a.tiers == 0) throw UsageError("select: --tiers must be at least 1");
        const std::size_t band = a.tier_size.value_or(pool.size() / *a.tiers);
        selections = rule::select_tiers(r, pool, ranking, *a.tiers, band);
    }
    for (const auto& s : selections) require_fresh({a.out_dir / (s.corpus.name + ".jsonl")});
    require_fresh({a.out_dir / "selection.json", a.out_dir / "run.json"});

    Json summary;
    summary["rule"] = r.to_json();
    summary["pool"] = pool.size();
    Json ranked = Json::array();
    for (const auto& rs : ranking.order) ranked.push_back({{"id", rs.id}, {"rule", rs.log_loss}});
    Json outputs = Json::array();
    for (const auto& s : selections) outputs.push_back(s.to_json());
    summary["selections"] = std::move(outputs);
    summary["ranking"] = std::move(ranked);

    for (const auto& s : selections) {
        write_new_file(a.out_dir / (s.corpus.name + ".jsonl"), corpus::serialize_store(s.corpus));
    }
    write_new_file(a.out_dir / "selection.json", summary.dump(2) + "\n");
    RunConfig config{"select", seed};
    config.paths = {{"corpus", a.corpus.generic_string()},
                    {"scores", a.scores.generic_string()},
                    {"embeddings", a.embeddings.generic_string()},
                    {"out_dir", a.out_dir.generic_string()}};
    config.options = knn_json(a.knn);
    config.options["rule"] = a.rule;
    if (a.top) config.options["top"] = *a.top;
    if (a.tiers) config.options["tiers"] = *a.tiers;
    if (a.tier_size) config.options["tier_size"] = *a.tier_size;
    write_new_file(a.out_dir / "run.json", config.serialize());
    for (const auto& s : selections) {
        out << s.corpus.name << " rule=" << csv::number(s.rule.log_loss) << " exp=" << csv::number(s.rule.loss)
            << "\n";
    }
    return kOk;
}

struct StudyArgs {
    fs::path manifest;
    fs::path losses;
    fs::path scores;
    fs::path embeddings;
    fs::path out;
    fs::path observations_out;
    double alpha = 0.05;
    KnnArgs knn;
};

int cmd_study(const StudyArgs& a, std::uint64_t seed, std::ostream& out) {
    study::StudyOptions options;
    options.indicators = to_options(a.knn, seed);
    options.alpha = a.alpha;
    require_fresh({a.out, config_beside(a.out)});
    if (!a.observations_out.empty()) require_fresh({a.observations_out});

    const auto manifest = sampling::StudyManifest::load(a.manifest);
    const auto losses = study::read_losses(a.losses);
    const auto corpora = study::load_corpora(manifest);
    const auto result = study::run_study(manifest, corpora, losses, scoring::load_scores(a.scores),
                                         scoring::load_embeddings(a.embeddings), options);
    write_new_file(a.out, result.report.dump(2) + "\n");
    if (!a.observations_out.empty()) {
        write_new_file(a.observations_out, stats::serialize_observations(result.observations));
    }
    RunConfig config{"study", seed};
    config.paths = {{"manifest", a.manifest.generic_string()},
                    {"losses", a.losses.generic_string()},
                    {"scores", a.scores.generic_string()},
                    {"embeddings", a.embeddings.generic_string()},
                    {"out", a.out.generic_string()}};
    if (!a.observations_out.empty()) config.paths["observations_out"] = a.observations_out.generic_string();
    config.options = knn_json(a.knn);
    config.options["alpha"] = a.alpha;
    write_new_file(config_beside(a.out), config.serialize());
    std::string kept;
    for (const auto& v : result.fit.fit.variables) kept += (kept.empty() ? "" : ",") + v;
    out << "n=" << result.observations.size() << " kept=" << kept << "\n";
    return kOk;
}

struct ReportArgs {
    fs::path observations;
    std::string format = "both";
    bool no_series = false;
    std::vector<std::string> variables;
    fs::path out_dir;
};

int cmd_report(const ReportArgs& a, std::uint64_t seed, std::ostream& out) {
    const auto format = report::parse_format(a.format);
    const auto variables = a.variables.empty() ? all_indicators() : parse_indicator_list(a.variables);
    const auto obs = stats::read_observations(a.observations);
    if (obs.empty()) throw DataError("report: " + a.observations.string() + " has no observations");
    std::vector<stats::UnivariateFit> fits;
    for (auto ind : variables) {
        for (auto& f : stats::fit_univariate(obs, ind, !a.no_series)) fits.push_back(std::move(f));
    }
    auto artifacts = report::render(fits, obs, format);
    Json fit_json = Json::array();
    for (const auto& f : fits) fit_json.push_back(f.to_json());
    RunConfig config{"report", seed};
    config.paths = {{"observations", a.observations.generic_string()}, {"out_dir", a.out_dir.generic_string()}};
    config.options = {{"format", a.format}, {"by_series", !a.no_series}, {"fits", fit_json}};
    artifacts.push_back({"run.json", config.serialize()});
    const auto written = report::write_all(artifacts, a.out_dir);
    out << "wrote " << written.size() << " files\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Instruction data quality indicators, regression and selection", "instructmine"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Master seed; every random stream derives from it")->capture_default_str();

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Normalize one raw source into the store format");
    c_ingest->add_option("--source", ingest.source, "alpaca, open-assistant, stack-exchange, wikihow, dolly")->required();
    c_ingest->add_option("--input", ingest.input, "Raw JSONL or JSON array")->required();
    c_ingest->add_option("--output", ingest.output, "Store file to create")->required();
    c_ingest->add_option("--cap", ingest.cap, "Alpaca subset size")->capture_default_str();
    c_ingest->add_option("--clusters", ingest.clusters, "Wikihow k-means clusters")->capture_default_str();
    c_ingest->add_option("--target", ingest.target, "Wikihow samples to draw")->capture_default_str();
    c_ingest->add_option("--embeddings", ingest.embeddings, "Wikihow title embedding sidecar");

    ScoreArgs score;
    auto* c_score = app.add_subcommand("score", "Produce a score sidecar from a file or a scorer service");
    c_score->add_option("--corpus", score.corpus)->required();
    auto* o_scores = c_score->add_option("--scores", score.scores, "Existing score sidecar to validate and restrict");
    auto* o_endpoint = c_score->add_option("--endpoint", score.endpoint, "Scorer base URL");
    o_scores->excludes(o_endpoint);
    c_score->add_option("--out", score.out)->required();
    c_score->add_option("--embeddings-out", score.embeddings_out, "Also fetch embeddings into this sidecar");
    c_score->add_option("--batch", score.batch)->capture_default_str();
    c_score->add_option("--parallel", score.parallelism)->capture_default_str();
    c_score->add_option("--retries", score.retries)->capture_default_str();

    IndicatorArgs ind;
    auto* c_ind = app.add_subcommand("indicators", "Per-sample and dataset indicator values");
    c_ind->add_option("--corpus", ind.corpus)->required();
    c_ind->add_option("--scores", ind.scores)->required();
    c_ind->add_option("--embeddings", ind.embeddings)->required();
    c_ind->add_option("--out", ind.out)->required();
    add_knn_options(c_ind, ind.knn, true);

    auto* c_sample = app.add_subcommand("sample", "Build finetune datasets");
    c_sample->require_subcommand(1);
    FuseArgs fuse;
    auto* c_fuse = c_sample->add_subcommand("fuse", "Random fusions from a study manifest");
    c_fuse->add_option("--manifest", fuse.manifest)->required();
    c_fuse->add_option("--label", fuse.labels, "Only these specs (repeatable)");
    c_fuse->add_option("--out-dir", fuse.out_dir)->required();
    TierArgs tiers;
    auto* c_tiers = c_sample->add_subcommand("tiers", "Quantile tiers of one indicator");
    c_tiers->add_option("--corpus", tiers.corpus)->required();
    c_tiers->add_option("--indicator", tiers.indicator)->capture_default_str();
    c_tiers->add_option("--scores", tiers.scores);
    c_tiers->add_option("--embeddings", tiers.embeddings);
    c_tiers->add_option("--k", tiers.k)->capture_default_str();
    c_tiers->add_option("--size", tiers.size)->capture_default_str();
    c_tiers->add_flag("--allow-overlap", tiers.allow_overlap);
    c_tiers->add_option("--out-dir", tiers.out_dir)->required();
    add_knn_options(c_tiers, tiers.knn, false);
    ManifestArgs manifest;
    auto* c_manifest = c_sample->add_subcommand("manifest", "Seeded fusion specs for the multivariate study");
    c_manifest->add_option("--corpus", manifest.corpora, "name=path of a candidate store (repeatable)")->required();
    c_manifest->add_option("--fusions", manifest.fusions)->capture_default_str();
    c_manifest->add_option("--size", manifest.size)->capture_default_str();
    c_manifest->add_option("--out", manifest.out)->required();

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "OLS and backward stepwise on observations");
    c_fit->add_option("--observations", fit.observations)->required();
    c_fit->add_flag("--stepwise", fit.stepwise);
    c_fit->add_option("--alpha", fit.alpha)->capture_default_str();
    c_fit->add_flag("--raw-loss", fit.raw_loss, "Regress the loss itself instead of its log");
    c_fit->add_option("--variables", fit.variables, "Indicators to include (default all)")->delimiter(',');
    c_fit->add_option("--out", fit.out)->required();
    c_fit->add_option("--rule-out", fit.rule_out, "Also write the fitted rule file");

    KsArgs ks;
    auto* c_ks = app.add_subcommand("ks", "Kolmogorov-Smirnov tests per variable");
    c_ks->add_option("--observations", ks.observations)->required();
    c_ks->add_option("--variables", ks.variables, "Indicators and/or loss (default all indicators)")->delimiter(',');
    c_ks->add_option("--reference", ks.reference, "normal | normal:MEAN,SD | uniform:LO,HI")->capture_default_str();
    c_ks->add_option("--out", ks.out)->required();

    SelectArgs sel;
    auto* c_sel = app.add_subcommand("select", "Rank a pool by a quality rule and cut subsets");
    c_sel->add_option("--corpus", sel.corpus)->required();
    c_sel->add_option("--scores", sel.scores)->required();
    c_sel->add_option("--embeddings", sel.embeddings)->required();
    c_sel->add_option("--rule", sel.rule, "builtin:eq4 or a rule JSON file")->capture_default_str();
    c_sel->add_option("--top", sel.top);
    c_sel->add_option("--tiers", sel.tiers);
    c_sel->add_option("--tier-size", sel.tier_size);
    c_sel->add_option("--out-dir", sel.out_dir)->required();
    add_knn_options(c_sel, sel.knn, false);

    StudyArgs st;
    auto* c_study = app.add_subcommand("study", "Fuse, measure and fit a whole manifest");
    c_study->add_option("--manifest", st.manifest)->required();
    c_study->add_option("--losses", st.losses, "CSV label,loss")->required();
    c_study->add_option("--scores", st.scores)->required();
    c_study->add_option("--embeddings", st.embeddings)->required();
    c_study->add_option("--out", st.out)->required();
    c_study->add_option("--observations-out", st.observations_out);
    c_study->add_option("--alpha", st.alpha)->capture_default_str();
    add_knn_options(c_study, st.knn, true);

    ReportArgs rep;
    auto* c_report = app.add_subcommand("report", "Plot-ready CSV/SVG per indicator and histograms");
    c_report->add_option("--observations", rep.observations)->required();
    c_report->add_option("--format", rep.format, "csv, svg or both")->capture_default_str();
    c_report->add_flag("--no-series", rep.no_series, "One fit over all observations");
    c_report->add_option("--variables", rep.variables)->delimiter(',');
    c_report->add_option("--out-dir", rep.out_dir)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kOk;
        }
        err << "instructmine: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (c_ingest->parsed()) return cmd_ingest(ingest, seed, out);
        if (c_score->parsed()) return cmd_score(score, seed, out);
        if (c_ind->parsed()) return cmd_indicators(ind, seed, out);
        if (c_fuse->parsed()) return cmd_fuse(fuse, seed, out);
        if (c_tiers->parsed()) return cmd_tiers(tiers, seed, out);
        if (c_manifest->parsed()) return cmd_manifest(manifest, seed, out);
        if (c_fit->parsed()) return cmd_fit(fit, seed, out);
        if (c_ks->parsed()) return cmd_ks(ks, seed, out);
        if (c_sel->parsed()) return cmd_select(sel, seed, out);
        if (c_study->parsed()) return cmd_study(st, seed, out);
        if (c_report->parsed()) return cmd_report(rep, seed, out);
        err << "instructmine: no command\n";
        return kUsage;
    } catch (const UsageError& e) {
        err << "instructmine: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        err << "instructmine: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        err << "instructmine: internal error: " << e.what() << "\n";
        return kInternal;
    }
}

}  // namespace instructmine::cli
