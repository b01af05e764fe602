#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "okh/ablation.hpp"
#include "okh/corpus.hpp"
#include "okh/embedding.hpp"
#include "okh/evidence.hpp"
#include "okh/remote_embedder.hpp"
#include "okh/retriever.hpp"
#include "okh/snapshot.hpp"
#include "okh/transition.hpp"

namespace okh {

struct CliConfig {
    std::vector<std::string> corpus;
    std::string snapshot;
    std::string checkpoint;
    std::string cache;
    std::string provider = "local";
    std::string endpoint;
    std::string model = "text-embedding-3-small";
    std::size_t dim = 0;  // 0: provider default
    std::size_t rank = 0;
    RetrievalWeights weights{};
    SearchConfig search{};
    ScopeConfig scope{};
    TrainingConfig training{};
    std::uint64_t seed = 0;
    std::string query;
    std::string group;
    std::string variant = "full";
    std::string qa;
    std::string traces;
    std::string out;
    std::size_t groups = 5;
    std::size_t horizons = 4;
    std::size_t threads = 0;

    std::size_t dimension() const { return dim ? dim : (provider == "remote" ? 1536 : 256); }
    std::size_t model_rank() const { return rank ? rank : (provider == "remote" ? 64 : 32); }

    void validate() const {
        if (provider != "local" && provider != "remote") throw ConfigError("--provider must be local or remote");
        if (provider == "remote" && endpoint.empty()) throw ConfigError("the remote provider requires --endpoint");
        weights.validate();
        search.validate();
        scope.validate();
        training.validate();
    }
};

namespace cli_detail {

inline const char* kSubcommands[] = {"synth", "build", "train", "retrieve", "eval"};

inline void add_options(CLI::App& app, CliConfig& c, std::string& config_path) {
    app.add_option("--config", config_path, "JSON file with default option values");
    app.add_option("--corpus", c.corpus, "facts JSON Lines file(s)");
    app.add_option("--snapshot", c.snapshot, "hypergraph snapshot path");
    app.add_option("--checkpoint", c.checkpoint, "transition model checkpoint path");
    app.add_option("--cache", c.cache, "embedding cache path");
    app.add_option("--provider", c.provider, "embedding provider: local or remote");
    app.add_option("--endpoint", c.endpoint, "embedding service base URL");
    app.add_option("--model", c.model, "embedding model name");
    app.add_option("--dim", c.dim, "embedding dimension");
    app.add_option("--rank", c.rank, "transition model rank");
    app.add_option("--lambda", c.weights.lambda, "order coherence weight");
    app.add_option("--mu", c.weights.mu, "precedence consistency weight");
    app.add_option("--nu", c.weights.nu, "entity continuity weight");
    app.add_option("--rho", c.weights.rho, "phase coverage weight");
    app.add_option("--beam", c.search.beam_width, "beam width");
    app.add_option("--length", c.search.traj_length, "trajectory length");
    app.add_option("--paths", c.search.num_trajectories, "number of trajectories returned");
    app.add_option("--diversity-threshold", c.search.diversity_overlap_threshold, "shared-edge fraction that triggers the penalty");
    app.add_option("--diversity-penalty", c.search.diversity_penalty, "score penalty for overlapping beams");
    app.add_option("--topk", c.scope.top_k, "cosine seeds per query");
    app.add_option("--cap", c.scope.pool_cap, "candidate pool cap");
    app.add_option("--reserve", c.scope.group_reserve_fraction, "pool fraction reserved for the query group");
    app.add_option("--alpha", c.training.alpha, "weight of the negative-pair term");
    app.add_option("--negatives", c.training.negatives_per_example, "sampled negatives per example");
    app.add_option("--step-size", c.training.step_size, "gradient step size");
    app.add_option("--epochs", c.training.epochs, "training epochs");
    app.add_option("--batch", c.training.batch, "training batch size");
    app.add_option("--seed", c.seed, "random seed");
    app.add_option("--query", c.query, "query text");
    app.add_option("--group", c.group, "knowledge group of the query");
    app.add_option("--variant", c.variant, "ablation variant or 'all'");
    app.add_option("--qa", c.qa, "questions JSON Lines file");
    app.add_option("--traces", c.traces, "JSON file with successful retrieval traces");
    app.add_option("--out", c.out, "output path");
    app.add_option("--groups", c.groups, "synthetic groups");
    app.add_option("--horizons", c.horizons, "horizons per synthetic group");
    app.add_option("--threads", c.threads, "worker threads for evaluation");
}

// Turns config-file entries into flags for options not given on the command line.
inline std::vector<std::string> config_args(const std::string& path, const CLI::App& parsed) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
    std::vector<std::string> args;
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        const CLI::Option* opt = nullptr;
        try {
            opt = parsed.get_option(flag);
        } catch (const CLI::OptionNotFound&) {
            throw ConfigError("config " + path + ": unknown key '" + key + "'");
        }
        if (opt->count() > 0 || key == "config") continue;
        auto push = [&](const nlohmann::json& v) {
            args.push_back(flag);
            args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        };
        if (value.is_array())
            for (const auto& v : value) push(v);
        else
            push(value);
    }
    return args;
}

inline std::unique_ptr<EmbeddingProvider> make_provider(const CliConfig& c) {
    if (c.provider == "remote") {
        RemoteEmbedderConfig rc;
        rc.endpoint = c.endpoint;
        rc.model = c.model;
        rc.dimension = c.dimension();
        return std::make_unique<RemoteEmbedder>(rc);
    }
    return std::make_unique<LocalEmbedder>(c.dimension());
}

inline EdgeEmbeddings embed_graph(const CliConfig& c, const KnowledgeHypergraph& graph, EmbeddingProvider& provider) {
    if (c.cache.empty()) return EdgeEmbeddings::compute(graph, provider);
    EmbeddingCache cache = std::filesystem::exists(c.cache) ? EmbeddingCache::load_file(c.cache)
                                                            : EmbeddingCache(provider.dimension());
    auto out = EdgeEmbeddings::compute(graph, provider, &cache);
    cache.save_file(c.cache);
    return out;
}

inline void require(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

inline RetrievalOptions retrieval_options(const CliConfig& c) { return {c.weights, c.search, c.scope}; }

inline int cmd_synth(const CliConfig& c, std::ostream& out) {
    const auto corpus = generate_synthetic(c.seed, c.groups, c.horizons);
    const std::filesystem::path dir = c.out.empty() ? std::filesystem::path(".") : std::filesystem::path(c.out);
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "facts.jsonl", std::ios::binary);
        if (!f) throw IoError("cannot write " + (dir / "facts.jsonl").string());
        write_facts_jsonl(f, corpus.facts);
    }
    {
        std::ofstream f(dir / "qa.jsonl", std::ios::binary);
        if (!f) throw IoError("cannot write " + (dir / "qa.jsonl").string());
        write_qa_jsonl(f, corpus.qa);
    }
    out << "wrote " << corpus.facts.size() << " facts and " << corpus.qa.size() << " questions to " << dir.string()
        << "\n";
    return 0;
}

inline int cmd_build(const CliConfig& c, std::ostream& out) {
    if (c.corpus.empty()) throw ConfigError("--corpus is required");
    require(c.snapshot, "--snapshot");
    std::vector<std::vector<Fact>> batches;
    for (const auto& path : c.corpus) batches.push_back(read_facts_file(path));
    const auto graph = merge_facts(batches);
    const auto precedence = PrecedenceIndex::build(graph);
    save_snapshot(c.snapshot, graph, precedence);
    if (!c.cache.empty()) {
        auto provider = make_provider(c);
        embed_graph(c, graph, *provider);
    }
    out << "snapshot " << c.snapshot << ": " << graph.entities().size() << " entities, " << graph.edge_count()
        << " hyperedges, " << graph.groups().size() << " groups\n";
    return 0;
}

inline std::vector<std::vector<std::string>> read_traces(const std::string& path) {
    if (path.empty()) return {};
    try {
        return nlohmann::json::parse(read_text_file(path)).get<std::vector<std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path, std::string("traces must be a list of id lists: ") + e.what());
    }
}

inline int cmd_train(const CliConfig& c, std::ostream& out) {
    require(c.snapshot, "--snapshot");
    require(c.checkpoint, "--checkpoint");
    const auto snap = load_snapshot(c.snapshot);
    auto provider = make_provider(c);
    const auto embeddings = embed_graph(c, snap.graph, *provider);
    PairOptions po;
    po.seed = c.seed;
    const auto pairs = build_pairs(snap.graph, snap.precedence, read_traces(c.traces), po);
    auto model = TransitionModel::random(c.dimension(), c.model_rank(), c.seed);
    TrainingConfig tc = c.training;
    tc.seed = c.seed;
    const auto report = train(model, embeddings, pairs, tc);
    save_checkpoint(c.checkpoint, model);
    out << "pairs: " << pairs.positives.size() << " positive, " << pairs.negatives.size() << " negative\n";
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
        out << "epoch " << e + 1 << " loss " << format_fixed(report.epoch_loss[e], 6) << " step "
            << format_number(report.step_sizes[e]) << "\n";
    out << "checkpoint " << c.checkpoint << "\n";
    return 0;
}

struct LoadedState {
    Snapshot snap;
    std::unique_ptr<EmbeddingProvider> provider;
    EdgeEmbeddings embeddings;
    std::optional<TransitionModel> model;
};

inline LoadedState load_state(const CliConfig& c) {
    require(c.snapshot, "--snapshot");
    LoadedState s{load_snapshot(c.snapshot), make_provider(c), {}, std::nullopt};
    s.embeddings = embed_graph(c, s.snap.graph, *s.provider);
    if (!c.checkpoint.empty()) {
        s.model = load_checkpoint(c.checkpoint);
        if (s.model->dimension() != s.embeddings.dimension())
            throw DimensionMismatch(s.embeddings.dimension(), s.model->dimension());
    }
    return s;
}

inline int cmd_retrieve(const CliConfig& c, std::ostream& out) {
    require(c.query, "--query");
    auto s = load_state(c);
    UniformTransitions uniform;
    std::optional<LearnedTransitions> learned;
    if (s.model) learned.emplace(*s.model);
    const TransitionScorer& scorer = learned ? static_cast<const TransitionScorer&>(*learned) : uniform;
    const Retriever retriever(s.snap.graph, s.snap.precedence, s.embeddings, scorer, *s.provider);
    std::optional<std::string> group;
    if (!c.group.empty()) group = c.group;
    const auto result = retriever.retrieve(c.query, retrieval_options(c), group);
    const std::string json = to_json(result).dump(2) + "\n";
    if (!c.out.empty()) write_text_file(c.out, json);
    out << json << "\n" << format_trajectories(result.trajectories, s.snap.graph);
    return 0;
}

inline int cmd_eval(const CliConfig& c, std::ostream& out) {
    require(c.qa, "--qa");
    auto s = load_state(c);
    std::ifstream qf(c.qa);
    if (!qf) throw IoError("cannot open " + c.qa);
    const auto qa = read_qa_jsonl(qf);
    std::vector<AblationVariant> variants;
    if (c.variant == "all")
        for (const auto& [v, name] : kVariantNames) variants.push_back(v);
    else
        variants.push_back(parse_variant(c.variant));
    const EvalContext ctx{s.snap.graph, s.snap.precedence, s.embeddings, s.model ? &*s.model : nullptr, *s.provider};
    std::vector<AblationReport> reports;
    for (auto v : variants) reports.push_back(run_ablation(ctx, v, qa, retrieval_options(c), c.seed, c.threads));
    nlohmann::json j;
    if (reports.size() == 1) {
        j = to_json(reports.front());
    } else {
        j = nlohmann::json::array();
        for (const auto& r : reports) j.push_back(to_json(r));
    }
    if (!c.out.empty()) write_text_file(c.out, j.dump(2) + "\n");
    out << format_report_table(reports);
    return 0;
}

}  // namespace cli_detail

// Entry point for the okh binary. Returns 0 on success, 2 on usage or
// configuration errors, 1 on runtime errors.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace cli_detail;
    std::vector<std::string> args(argv + 1, argv + argc);
    auto make_app = [](CliConfig& c, std::string& config_path) {
        auto app = std::make_unique<CLI::App>("Order-aware knowledge hypergraph retrieval", "okh");
        app->require_subcommand(1);
        add_options(*app, c, config_path);
        app->fallthrough();
        app->add_subcommand("synth", "generate a synthetic corpus and questions");
        app->add_subcommand("build", "ingest facts into a snapshot");
        app->add_subcommand("train", "train the transition model");
        app->add_subcommand("retrieve", "retrieve ordered evidence for a query");
        app->add_subcommand("eval", "run the ablation harness");
        return app;
    };
    auto parse = [&](CLI::App& app, std::vector<std::string> a) {
        std::reverse(a.begin(), a.end());
        app.parse(a);
    };

    CliConfig config;
    std::string config_path;
    auto app = make_app(config, config_path);
    try {
        parse(*app, args);
        if (!config_path.empty()) {
            auto extra = config_args(config_path, *app);
            if (!extra.empty()) {
                std::vector<std::string> merged = args;
                merged.insert(merged.end(), extra.begin(), extra.end());
                config = CliConfig{};
                config_path.clear();
                app = make_app(config, config_path);
                parse(*app, merged);
            }
        }
    } catch (const CLI::CallForHelp&) {
        out << app->help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app->help();
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    std::string command;
    for (const char* name : kSubcommands)
        if (app->got_subcommand(name)) command = name;
    try {
        config.validate();
        if (command == "synth") return cmd_synth(config, out);
        if (command == "build") return cmd_build(config, out);
        if (command == "train") return cmd_train(config, out);
        if (command == "retrieve") return cmd_retrieve(config, out);
        if (command == "eval") return cmd_eval(config, out);
        err << app->help();
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace okh
