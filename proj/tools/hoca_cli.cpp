// Command-line front end: verification suites, training, complexity
// benchmarks, rank sweeps, attention-weight emission, and feature-bundle
// export. Exit codes: 0 success, 1 verification/assertion failure, 2 usage
// error, 3 I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hoca/bench.hpp"
#include "hoca/decode.hpp"
#include "hoca/io.hpp"
#include "hoca/model.hpp"
#include "hoca/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    std::uint64_t seed = 0;
    std::string mechanism = "lowrank";
    std::vector<int> arities{1, 2, 3};
    std::size_t rank = 1;
    std::size_t hidden = 32;
    std::size_t enc_hidden = 8;
    std::size_t emb_dim = 8;
    std::size_t common_dim = 16;
    std::size_t hier_dim = 16;
    double learning_rate = 1e-4;
    std::size_t epochs = 20;
    std::size_t beam_width = 5;
    double dropout = 0.0;
    std::size_t max_elements = hoca::kDefaultElementCap;
    bool has_dataset = false;
    hoca::DatasetSpec dataset;
    std::string bundle; // feature-bundle directory, alternative input
};

template <class T>
T field(const json& j, const std::string& name, const T& fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw hoca::ConfigError("config field '" + name + "' has the wrong type");
    }
}

hoca::DatasetSpec dataset_from_json(const json& j) {
    hoca::DatasetSpec spec;
    spec.n_modalities = field<std::size_t>(j, "n_modalities", spec.n_modalities);
    spec.d_raw = field<std::size_t>(j, "d_raw", spec.d_raw);
    spec.vocab = field<std::size_t>(j, "vocab", spec.vocab);
    spec.n_items = field<std::size_t>(j, "n_items", spec.n_items);
    spec.correlation_strength =
        field<double>(j, "correlation_strength", spec.correlation_strength);
    spec.caption_len = field<std::size_t>(j, "caption_len", spec.caption_len);
    spec.noise = field<double>(j, "noise", spec.noise);
    spec.val_fraction = field<double>(j, "val_fraction", spec.val_fraction);
    spec.test_fraction = field<double>(j, "test_fraction", spec.test_fraction);
    if (j.contains("t_range")) {
        spec.t_range.clear();
        try {
            for (const auto& pair : j.at("t_range"))
                spec.t_range.push_back({pair.at(0).get<std::size_t>(),
                                        pair.at(1).get<std::size_t>()});
        } catch (const json::exception&) {
            throw hoca::ConfigError("config field 't_range' must be a list of [min,max] pairs");
        }
    }
    return spec;
}

json dataset_to_json(const hoca::DatasetSpec& spec) {
    json ranges = json::array();
    for (const auto& r : spec.t_range) ranges.push_back({r[0], r[1]});
    return json{{"n_modalities", spec.n_modalities},
                {"d_raw", spec.d_raw},
                {"vocab", spec.vocab},
                {"n_items", spec.n_items},
                {"correlation_strength", spec.correlation_strength},
                {"caption_len", spec.caption_len},
                {"noise", spec.noise},
                {"val_fraction", spec.val_fraction},
                {"test_fraction", spec.test_fraction},
                {"t_range", ranges}};
}

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw hoca::IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw hoca::ConfigError("config file is not valid JSON: " + std::string(e.what()));
    }
    cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);
    cfg.mechanism = field<std::string>(j, "mechanism", cfg.mechanism);
    cfg.arities = field<std::vector<int>>(j, "arities", cfg.arities);
    cfg.rank = field<std::size_t>(j, "rank", cfg.rank);
    cfg.hidden = field<std::size_t>(j, "hidden", cfg.hidden);
    cfg.enc_hidden = field<std::size_t>(j, "enc_hidden", cfg.enc_hidden);
    cfg.emb_dim = field<std::size_t>(j, "emb_dim", cfg.emb_dim);
    cfg.common_dim = field<std::size_t>(j, "common_dim", cfg.common_dim);
    cfg.hier_dim = field<std::size_t>(j, "hier_dim", cfg.hier_dim);
    cfg.learning_rate = field<double>(j, "learning_rate", cfg.learning_rate);
    cfg.epochs = field<std::size_t>(j, "epochs", cfg.epochs);
    cfg.beam_width = field<std::size_t>(j, "beam_width", cfg.beam_width);
    cfg.dropout = field<double>(j, "dropout", cfg.dropout);
    cfg.max_elements = field<std::size_t>(j, "max_elements", cfg.max_elements);
    cfg.bundle = field<std::string>(j, "bundle", cfg.bundle);
    if (j.contains("dataset")) {
        cfg.has_dataset = true;
        cfg.dataset = dataset_from_json(j.at("dataset"));
    }
    return cfg;
}

json resolved_json(const RunConfig& cfg) {
    json j{{"seed", cfg.seed},
           {"rng", hoca::kRngId},
           {"mechanism", cfg.mechanism},
           {"arities", cfg.arities},
           {"rank", cfg.rank},
           {"hidden", cfg.hidden},
           {"enc_hidden", cfg.enc_hidden},
           {"emb_dim", cfg.emb_dim},
           {"common_dim", cfg.common_dim},
           {"hier_dim", cfg.hier_dim},
           {"learning_rate", cfg.learning_rate},
           {"epochs", cfg.epochs},
           {"beam_width", cfg.beam_width},
           {"dropout", cfg.dropout},
           {"max_elements", cfg.max_elements}};
    if (cfg.has_dataset) j["dataset"] = dataset_to_json(cfg.dataset);
    if (!cfg.bundle.empty()) j["bundle"] = cfg.bundle;
    return j;
}

void write_resolved(const fs::path& out, const json& j) {
    fs::create_directories(out);
    std::ofstream f(out / "config.json");
    if (!f) throw hoca::IoError("cannot write resolved config");
    f << j.dump(2) << "\n";
}

hoca::ModelConfig model_config(const RunConfig& cfg) {
    hoca::ModelConfig mc;
    mc.mechanism = hoca::mechanism_from_string(cfg.mechanism);
    mc.arities = hoca::ArityConfig{cfg.arities};
    mc.rank = cfg.rank;
    mc.hidden = cfg.hidden;
    mc.enc_hidden = cfg.enc_hidden;
    mc.emb_dim = cfg.emb_dim;
    mc.common_dim = cfg.common_dim;
    mc.hier_dim = cfg.hier_dim;
    mc.dropout = cfg.dropout;
    mc.max_elements = cfg.max_elements;
    return mc;
}

hoca::SyntheticDataset require_dataset(const RunConfig& cfg) {
    if (!cfg.has_dataset)
        throw hoca::ConfigError("this command needs a 'dataset' block in the config");
    return hoca::synth_dataset(cfg.seed, cfg.dataset);
}

int cmd_verify(const std::string& filter) {
    std::vector<hoca::SuiteResult> results;
    if (filter.empty()) {
        results = hoca::run_all_suites();
    } else if (filter == "propositions") {
        results.push_back(hoca::run_propositions_suite());
    } else if (filter == "equivalence") {
        results.push_back(hoca::run_equivalence_suite());
    } else if (filter == "simplex") {
        results.push_back(hoca::run_simplex_suite());
    } else if (filter == "gradients") {
        results.push_back(hoca::run_gradients_suite());
    } else if (filter == "beam") {
        results.push_back(hoca::run_beam_suite());
    } else if (filter == "complexity") {
        results.push_back(hoca::run_complexity_suite());
    } else {
        throw hoca::ConfigError("unknown suite: " + filter +
                                " (expected propositions|equivalence|simplex|gradients|beam|"
                                "complexity)");
    }
    std::cout << "suite,cases,max_error,status,elapsed_s,note\n";
    bool ok = true;
    for (const auto& r : results) {
        ok = ok && r.pass;
        std::cout << r.name << "," << r.cases << "," << hoca::fmt_f64(r.max_error) << ","
                  << (r.pass ? "pass" : "fail") << "," << hoca::fmt_f64(r.elapsed_s) << ","
                  << r.note << "\n";
    }
    return ok ? 0 : 1;
}

int cmd_train(const RunConfig& cfg, const fs::path& out) {
    auto data = require_dataset(cfg);
    hoca::CaptionModel model = hoca::CaptionModel::for_dataset(model_config(cfg), data, cfg.seed);
    hoca::TrainHyper hyper;
    hyper.adam.lr = cfg.learning_rate;
    hyper.epochs = cfg.epochs;
    hyper.seed = cfg.seed;
    auto curve = hoca::train_model(model, data, hyper);

    const json resolved = resolved_json(cfg);
    write_resolved(out, resolved);
    hoca::CsvWriter csv(out / "curve.csv");
    csv.row({"epoch", "train_loss", "val_loss", "val_token_acc"});
    for (const auto& row : curve)
        csv.row({std::to_string(row.epoch), hoca::fmt_f64(row.train_loss),
                 hoca::fmt_f64(row.val_loss), hoca::fmt_f64(row.val_token_acc)});
    hoca::write_checkpoint(out, model.store(), resolved);
    if (!curve.empty())
        std::cout << "trained " << cfg.epochs << " epochs; final train loss "
                  << hoca::fmt_f64(curve.back().train_loss) << ", val acc "
                  << hoca::fmt_f64(curve.back().val_token_acc) << "\n";
    std::cout << "outputs in " << out.string() << "\n";
    return 0;
}

std::string join_extents(const std::vector<std::size_t>& t) {
    std::string s;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t[i]);
    }
    return s;
}

int cmd_bench(const fs::path& out, std::vector<std::size_t> ns, std::vector<std::size_t> ts,
              std::vector<std::size_t> ks, std::size_t d, std::size_t cap) {
    auto reports = hoca::scaling_sweep(ns, ts, ks, d, cap);
    write_resolved(out, json{{"n", ns}, {"t", ts}, {"k", ks}, {"d", d},
                             {"max_elements", cap}, {"rng", hoca::kRngId}});
    hoca::CsvWriter csv(out / "bench.csv");
    csv.row({"mechanism", "n", "t", "d", "k", "counted", "predicted", "wall_ns"});
    for (const auto& r : reports)
        csv.row({to_string(r.mechanism), std::to_string(r.config.n),
                 join_extents(r.config.t), std::to_string(r.config.d),
                 std::to_string(r.config.k),
                 r.capped ? "CAPPED" : std::to_string(r.counted),
                 std::to_string(r.predicted),
                 r.capped ? "" : std::to_string(r.wall_ns)});
    const auto violations = hoca::ordering_violations(reports);
    std::cout << reports.size() << " rows written to " << (out / "bench.csv").string()
              << "; low-rank>dense on " << violations.size() << " cells\n";
    return 0;
}

int cmd_sweep_rank(const RunConfig& cfg, std::vector<std::size_t> ranks,
                   std::vector<std::uint64_t> seeds, const fs::path& out) {
    if (ranks.empty()) ranks = {1, 2, 4, 8};
    if (seeds.empty()) seeds = {cfg.seed};
    auto data = require_dataset(cfg);
    hoca::TrainHyper hyper;
    hyper.adam.lr = cfg.learning_rate;
    hyper.epochs = cfg.epochs;
    auto rows = hoca::rank_sweep(data, ranks, seeds, model_config(cfg), hyper);

    json resolved = resolved_json(cfg);
    resolved["ranks"] = ranks;
    resolved["seeds"] = seeds;
    write_resolved(out, resolved);

    hoca::CsvWriter csv(out / "sweep_rank.csv");
    csv.row({"rank", "seed", "val_token_acc", "final_train_loss"});
    for (const auto& row : rows)
        csv.row({std::to_string(row.rank), std::to_string(row.seed),
                 hoca::fmt_f64(row.val_token_acc), hoca::fmt_f64(row.final_train_loss)});

    hoca::CsvWriter summary(out / "sweep_rank_summary.csv");
    summary.row({"rank", "mean_val_token_acc", "min_val_token_acc", "max_val_token_acc"});
    for (std::size_t rank : ranks) {
        double sum = 0.0, lo = 1e300, hi = -1e300;
        std::size_t count = 0;
        for (const auto& row : rows) {
            if (row.rank != rank) continue;
            sum += row.val_token_acc;
            lo = std::min(lo, row.val_token_acc);
            hi = std::max(hi, row.val_token_acc);
            ++count;
        }
        summary.row({std::to_string(rank), hoca::fmt_f64(sum / count), hoca::fmt_f64(lo),
                     hoca::fmt_f64(hi)});
    }
    std::cout << rows.size() << " sweep rows written to " << out.string() << "\n";
    return 0;
}

int cmd_emit_attention(const fs::path& checkpoint, long item_index,
                       const std::string& bundle_dir, const fs::path& out,
                       std::size_t max_len) {
    // the checkpoint's meta block is the resolved training config
    std::ifstream mf(checkpoint / "checkpoint.json");
    if (!mf) throw hoca::IoError("missing checkpoint manifest in " + checkpoint.string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw hoca::IoError("malformed checkpoint manifest: " + std::string(e.what()));
    }
    json meta = manifest.at("meta");
    RunConfig cfg;
    cfg.seed = field<std::uint64_t>(meta, "seed", 0);
    cfg.mechanism = field<std::string>(meta, "mechanism", "lowrank");
    cfg.arities = field<std::vector<int>>(meta, "arities", {1, 2, 3});
    cfg.rank = field<std::size_t>(meta, "rank", 1);
    cfg.hidden = field<std::size_t>(meta, "hidden", 32);
    cfg.enc_hidden = field<std::size_t>(meta, "enc_hidden", 8);
    cfg.emb_dim = field<std::size_t>(meta, "emb_dim", 8);
    cfg.common_dim = field<std::size_t>(meta, "common_dim", 16);
    cfg.hier_dim = field<std::size_t>(meta, "hier_dim", 16);
    cfg.beam_width = field<std::size_t>(meta, "beam_width", 5);
    if (!meta.contains("dataset"))
        throw hoca::ConfigError("checkpoint meta lacks the dataset block");
    cfg.dataset = dataset_from_json(meta.at("dataset"));
    cfg.has_dataset = true;

    auto data = hoca::synth_dataset(cfg.seed, cfg.dataset);
    hoca::CaptionModel model = hoca::CaptionModel::for_dataset(model_config(cfg), data, cfg.seed);
    hoca::read_checkpoint(checkpoint, model.store());

    std::vector<hoca::FeatureMatrix> feats;
    if (!bundle_dir.empty()) {
        for (auto& m : hoca::read_feature_bundle(bundle_dir)) feats.push_back(m.features);
        if (feats.size() != model.n_modalities())
            throw hoca::ConfigError("bundle modality count does not match the model");
        for (std::size_t l = 0; l < feats.size(); ++l)
            if (feats[l].d() != model.d_raw() || feats[l].t() != model.temporal()[l])
                throw hoca::ConfigError("bundle modality " + std::to_string(l) +
                                        " does not match the model dimensions");
    } else {
        if (item_index < 0 || static_cast<std::size_t>(item_index) >= data.items.size())
            throw hoca::ConfigError("item index out of range");
        feats = data.items[static_cast<std::size_t>(item_index)].features;
    }

    hoca::Hypothesis hyp = hoca::beam_decode(model, feats, cfg.beam_width, max_len);
    std::vector<int> emissions = hyp.tokens;
    if (hyp.finished) emissions.push_back(hoca::kEos);

    // replay the winning sequence step by step, recording the traces
    hoca::DecodeSession session(model, feats);
    auto state = model.initial_state();
    int prev = hoca::kBos;
    std::vector<hoca::CaptionModel::StepTrace> traces;
    for (int tok : emissions) {
        hoca::CaptionModel::StepTrace trace;
        auto [next, logp] = session.step(state, prev, &trace);
        trace.token = tok;
        traces.push_back(std::move(trace));
        state = next;
        prev = tok;
    }

    json resolved = resolved_json(cfg);
    resolved["checkpoint"] = checkpoint.string();
    resolved["item"] = item_index;
    if (!bundle_dir.empty()) resolved["bundle"] = bundle_dir;
    write_resolved(out, resolved);

    const std::size_t n = model.n_modalities();
    std::vector<std::string> header{"step", "modality", "family", "token"};
    for (std::size_t k = 0; k < n; ++k) header.push_back("beta_" + std::to_string(k));
    std::size_t max_t = 0;
    for (std::size_t t : model.temporal()) max_t = std::max(max_t, t);
    for (std::size_t j = 0; j < max_t; ++j) header.push_back("w" + std::to_string(j));

    hoca::CsvWriter fam_csv(out / "attention_families.csv");
    fam_csv.row(header);
    hoca::CsvWriter comb_csv(out / "attention_combined.csv");
    std::vector<std::string> comb_header = header;
    comb_header.erase(comb_header.begin() + 2); // no family column
    comb_csv.row(comb_header);

    for (std::size_t s = 0; s < traces.size(); ++s) {
        const auto& tr = traces[s];
        auto base_cells = [&](std::size_t l) {
            std::vector<std::string> cells{std::to_string(s), std::to_string(l)};
            return cells;
        };
        for (std::size_t l = 0; l < n; ++l) {
            const auto labels = model.family_labels(l);
            for (std::size_t fi = 0; fi < tr.families[l].size(); ++fi) {
                std::vector<std::string> cells = base_cells(l);
                cells.push_back(labels[fi]);
                cells.push_back(std::to_string(tr.token));
                for (double b : tr.beta) cells.push_back(hoca::fmt_f64(b));
                for (double w : tr.families[l][fi]) cells.push_back(hoca::fmt_f64(w));
                fam_csv.row(cells);
            }
            std::vector<std::string> cells = base_cells(l);
            cells.push_back(std::to_string(tr.token));
            for (double b : tr.beta) cells.push_back(hoca::fmt_f64(b));
            for (double w : tr.combined[l]) cells.push_back(hoca::fmt_f64(w));
            comb_csv.row(cells);
        }
    }
    std::cout << traces.size() << " decode steps written to " << out.string() << "\n";
    return 0;
}

int cmd_export_item(const RunConfig& cfg, long item_index, const fs::path& out) {
    auto data = require_dataset(cfg);
    if (item_index < 0 || static_cast<std::size_t>(item_index) >= data.items.size())
        throw hoca::ConfigError("item index out of range");
    const hoca::Item& item = data.items[static_cast<std::size_t>(item_index)];
    std::vector<hoca::BundleModality> mods;
    for (std::size_t l = 0; l < item.features.size(); ++l)
        mods.push_back({"m" + std::to_string(l), item.features[l]});
    hoca::write_feature_bundle(out, mods);
    json resolved = resolved_json(cfg);
    resolved["item"] = item_index;
    write_resolved(out, resolved);
    std::cout << "bundle written to " << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"high-order cross-modal attention kernels and toy captioner"};
    app.require_subcommand(1);

    std::string config_path, suite, bundle_dir;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string mechanism;
    std::vector<int> arities;
    std::size_t rank = 0, beam_width = 0, max_elements = 0;
    long item_index = -1;
    std::size_t max_len = 8;
    std::vector<std::size_t> bench_n{1, 2, 3, 4, 5, 6}, bench_t{2, 4, 8, 16}, bench_k{1, 4};
    std::size_t bench_d = 8;
    std::vector<std::size_t> sweep_ranks;
    std::vector<std::uint64_t> sweep_seeds;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration");
        cmd->add_option("--seed", seed, "PRNG seed")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--mechanism", mechanism, "unary|hoca|lowrank");
        cmd->add_option("--arities", arities, "enabled arities, e.g. 1,2,3")->delimiter(',');
        cmd->add_option("--rank", rank, "factorization rank");
        cmd->add_option("--beam-width", beam_width, "beam width (default 5)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--max-elements", max_elements, "dense tensor element cap");
    };

    CLI::App* verify = app.add_subcommand("verify", "run the invariant suites");
    verify->add_option("--suite", suite,
                       "propositions|equivalence|simplex|gradients|beam|complexity");

    CLI::App* train = app.add_subcommand("train", "train a captioner on synthetic data");
    add_common(train);

    CLI::App* bench = app.add_subcommand("bench", "space/time sweep of the mechanisms");
    bench->add_option("--out", out_dir, "output directory");
    bench->add_option("--max-elements", max_elements, "dense tensor element cap");
    bench->add_option("--n-list", bench_n, "modality counts")->delimiter(',');
    bench->add_option("--t-list", bench_t, "temporal extents")->delimiter(',');
    bench->add_option("--k-list", bench_k, "ranks")->delimiter(',');
    bench->add_option("--d", bench_d, "common-space dimension");

    CLI::App* sweep = app.add_subcommand("sweep-rank", "train across factorization ranks");
    add_common(sweep);
    sweep->add_option("--ranks", sweep_ranks, "ranks to sweep")->delimiter(',');
    sweep->add_option("--seeds", sweep_seeds, "training seeds")->delimiter(',');

    CLI::App* emit = app.add_subcommand("emit-attention",
                                        "decode one item and dump attention weights");
    std::string checkpoint_dir;
    emit->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
    emit->add_option("--item", item_index, "dataset item index");
    emit->add_option("--bundle", bundle_dir, "feature-bundle directory");
    emit->add_option("--out", out_dir, "output directory");
    emit->add_option("--max-len", max_len, "decode budget");

    CLI::App* exp = app.add_subcommand("export-item",
                                       "write one synthetic item as a feature bundle");
    add_common(exp);
    exp->add_option("--item", item_index, "dataset item index")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (seed_set) cfg.seed = seed;
        if (!mechanism.empty()) cfg.mechanism = mechanism;
        if (!arities.empty()) cfg.arities = arities;
        if (rank) cfg.rank = rank;
        if (beam_width) cfg.beam_width = beam_width;
        if (max_elements) cfg.max_elements = max_elements;

        if (verify->parsed()) return cmd_verify(suite);
        if (train->parsed()) return cmd_train(cfg, out_dir);
        if (bench->parsed())
            return cmd_bench(out_dir, bench_n, bench_t, bench_k, bench_d,
                             max_elements ? max_elements : hoca::kDefaultElementCap);
        if (sweep->parsed()) return cmd_sweep_rank(cfg, sweep_ranks, sweep_seeds, out_dir);
        if (emit->parsed())
            return cmd_emit_attention(checkpoint_dir, item_index, bundle_dir, out_dir,
                                      max_len);
        if (exp->parsed()) return cmd_export_item(cfg, item_index, out_dir);
    } catch (const hoca::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const hoca::ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const hoca::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
