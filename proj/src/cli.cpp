#include "tatt/cli.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <filesystem>
#include <iostream>
#include <string>

#include "tatt/change_detection.hpp"
#include "tatt/checkpoint.hpp"
#include "tatt/error.hpp"
#include "tatt/io.hpp"
#include "tatt/metrics.hpp"
#include "tatt/synthetic.hpp"
#include "tatt/training.hpp"

namespace tatt {

namespace {

namespace fs = std::filesystem;

constexpr int kExitInput = 2;
constexpr int kExitTraining = 3;
constexpr int kExitEvaluation = 4;

struct RunConfig {
    std::string dataset;
    std::string checkpoint = "model.tatt";
    std::string mode = "temporal";
    std::size_t layers = 2;
    std::size_t hidden = 128;
    std::size_t heads = 2;
    std::size_t head_dim = 0;
    std::size_t max_len = 128;
    double lr = 1e-3;
    std::size_t epochs = 3;
    std::size_t batch_size = 32;
    double mask_prob = 0.15;
    std::size_t n = 200;
    std::size_t h = 1;
    std::uint64_t seed = 0;
    std::size_t layer = 1;
    std::size_t head = 1;
    std::string time;
    std::string sentence;
    std::string out;
    std::string scores;
    std::string targets;
};

struct Dataset {
    std::vector<Corpus> corpora;
    std::vector<TargetWordRecord> targets;
};

fs::path require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) {
        throw IoError("missing file '" + p.string() + "'");
    }
    return p;
}

Dataset load_dataset(const std::string& dir) {
    if (dir.empty()) {
        throw ConfigError("--dataset is required");
    }
    const fs::path d(dir);
    const auto c1 = require_file(d / "corpus_t1.txt");
    const auto c2 = require_file(d / "corpus_t2.txt");
    const auto tg = require_file(d / "targets.tsv");
    Dataset ds;
    ds.corpora.push_back(load_corpus(c1, "t1"));
    ds.corpora.push_back(load_corpus(c2, "t2"));
    ds.targets = load_targets(tg);
    return ds;
}

int cmd_train(const RunConfig& rc) {
    Dataset ds = load_dataset(rc.dataset);
    ModelConfig mc;
    mc.layers = rc.layers;
    mc.hidden = rc.hidden;
    mc.heads = rc.heads;
    mc.head_dim = rc.head_dim != 0 ? rc.head_dim : (rc.heads != 0 ? rc.hidden / rc.heads : 0);
    mc.ff_dim = 4 * rc.hidden;
    mc.max_len = rc.max_len;
    mc.mode = parse_attention_mode(rc.mode);
    mc.seed = rc.seed;
    TrainConfig tc;
    tc.learning_rate = rc.lr;
    tc.epochs = rc.epochs;
    tc.batch_size = rc.batch_size;
    tc.mask_prob = rc.mask_prob;
    tc.seed = rc.seed;
    tc.validate();

    Model model = build_model(mc, build_vocab(ds.corpora, ds.targets), build_time_vocab(ds.corpora));
    std::cout << "vocab " << model.vocab.size() << " tokens, " << count_parameters(model).total << " parameters\n";
    const TrainResult result = train_mlm(model, ds.corpora, tc, [](const LossRecord& r) {
        if (r.step % 50 == 0) {
            std::cout << "step " << r.step << " epoch " << r.epoch << " loss " << format_fixed(r.loss, 4) << "\n";
        }
    });
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        std::cout << "epoch " << e + 1 << " mean loss " << format_fixed(result.epoch_loss[e], 4) << "\n";
    }
    save_checkpoint(model, rc.checkpoint);
    write_loss_log(rc.checkpoint + ".loss.csv", result.log);
    std::cout << "wrote " << rc.checkpoint << "\n";
    return 0;
}

void check_compatible(const Model& m, const Dataset& ds) {
    for (const auto& c : ds.corpora) {
        if (!m.time_vocab.find(c.time_point)) {
            throw VocabError("checkpoint has no time point '" + c.time_point + "'");
        }
    }
    for (const auto& t : ds.targets) {
        const auto id = m.vocab.find(t.word);
        if (!id || m.vocab.is_special(*id) || m.vocab.is_time_token(*id)) {
            throw VocabError("target word '" + t.word + "' is not in the checkpoint vocabulary");
        }
    }
}

int cmd_score(const RunConfig& rc) {
    const Model model = load_checkpoint(require_file(rc.checkpoint));
    const Dataset ds = load_dataset(rc.dataset);
    check_compatible(model, ds);
    if (rc.h < 1 || rc.h > model.config.layers) {
        throw ConfigError("--h must lie in [1, " + std::to_string(model.config.layers) + "]");
    }
    if (rc.n < 1) {
        throw ConfigError("--n must be at least 1");
    }
    const ScoreReport report =
        semantic_change_scores(model, ds.corpora[0], ds.corpora[1], ds.targets, rc.n, rc.h, rc.seed);
    const std::string out = rc.out.empty() ? "scores.tsv" : rc.out;
    write_score_report(out, report);
    std::size_t unscored = 0;
    for (const auto& e : report.entries) {
        unscored += e.score ? 0 : 1;
    }
    std::cout << "scored " << report.entries.size() - unscored << " words, " << unscored << " unscored; wrote " << out
              << "\n";
    return 0;
}

int cmd_eval(const RunConfig& rc) {
    if (rc.scores.empty()) {
        throw ConfigError("eval needs a score file");
    }
    std::string targets = rc.targets;
    if (targets.empty()) {
        if (rc.dataset.empty()) {
            throw ConfigError("eval needs a targets file or --dataset");
        }
        targets = (fs::path(rc.dataset) / "targets.tsv").string();
    }
    const ScoreReport report = load_score_report(require_file(rc.scores));
    const auto gold = load_targets(require_file(targets));
    const EvalReport ev = evaluate(report, gold);
    const auto scatter = rank_scatter(report, gold);
    const fs::path dir = rc.out.empty() ? fs::path(".") : fs::path(rc.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create '" + dir.string() + "'");
    }
    write_file_atomic(dir / "metrics.txt", format_metrics(ev));
    write_file_atomic(dir / "scatter.csv", format_scatter(scatter));
    std::cout << format_metrics(ev) << "scored=" << ev.n_scored << " unscored=" << ev.n_unscored << "\n";
    return 0;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

int cmd_inspect(const RunConfig& rc) {
    const Model model = load_checkpoint(require_file(rc.checkpoint));
    if (rc.layer < 1 || rc.layer > model.config.layers) {
        throw ConfigError("--layer must lie in [1, " + std::to_string(model.config.layers) + "]");
    }
    if (rc.head < 1 || rc.head > model.config.heads) {
        throw ConfigError("--head must lie in [1, " + std::to_string(model.config.heads) + "]");
    }
    if (rc.sentence.empty()) {
        throw ConfigError("--sentence is required");
    }
    std::string time = rc.time;
    if (time.empty()) {
        time = model.time_vocab.points().front().label;
    }
    if (!model.time_vocab.find(time)) {
        throw VocabError("checkpoint has no time point '" + time + "'");
    }
    std::string sentence = rc.sentence;
    for (char& c : sentence) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80) {
            c = static_cast<char>(std::tolower(u));
        }
    }
    const TimedSequence seq =
        encode_sequence(model.vocab, model.time_vocab, sentence, time, model.config.mode, model.config.max_len);
    const EncodeDetail detail = encode_with_attention(model, seq);
    const Matrix& w = detail.attention[rc.layer - 1][rc.head - 1];
    const auto labels = decode(model.vocab, seq);

    std::string csv = "token";
    for (const auto& l : labels) {
        csv += "," + csv_field(l);
    }
    csv += "\n";
    for (std::size_t i = 0; i < w.rows(); ++i) {
        csv += csv_field(labels[i]);
        for (std::size_t j = 0; j < w.cols(); ++j) {
            csv += "," + format_real(w(i, j));
        }
        csv += "\n";
    }
    if (rc.out.empty()) {
        std::cout << csv;
    } else {
        write_file_atomic(rc.out, csv);
    }
    return 0;
}

int cmd_synth(const RunConfig& rc) {
    if (rc.out.empty()) {
        throw ConfigError("synth needs --out DIR");
    }
    SynthConfig sc;
    sc.seed = rc.seed;
    write_dataset(rc.out, make_planted_dataset(sc));
    std::cout << "wrote planted-change dataset to " << rc.out << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Temporal self-attention language models and semantic change scoring"};
    app.set_help_flag("--help", "print this help and exit");
    app.set_config("--config", "", "flat key=value file; command-line flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig rc;
    app.add_option("--dataset", rc.dataset, "directory with corpus_t1.txt, corpus_t2.txt, targets.tsv");
    app.add_option("--checkpoint", rc.checkpoint, "model checkpoint path")->capture_default_str();
    app.add_option("--mode", rc.mode, "standard | temporal | prepend | temporal_and_prepend | scaled_linear | "
                                      "scaled_exponential | scaled_doc_count")
        ->capture_default_str();
    app.add_option("--layers", rc.layers)->capture_default_str();
    app.add_option("--hidden", rc.hidden)->capture_default_str();
    app.add_option("--heads", rc.heads)->capture_default_str();
    app.add_option("--head-dim", rc.head_dim, "defaults to hidden / heads");
    app.add_option("--max-len", rc.max_len)->capture_default_str();
    app.add_option("--lr", rc.lr)->capture_default_str();
    app.add_option("--epochs", rc.epochs)->capture_default_str();
    app.add_option("--batch-size", rc.batch_size)->capture_default_str();
    app.add_option("--mask-prob", rc.mask_prob)->capture_default_str();
    app.add_option("--n", rc.n, "sentences sampled per word and time slice")->capture_default_str();
    app.add_option("--h", rc.h, "last hidden layers averaged")->capture_default_str();
    app.add_option("--seed", rc.seed)->capture_default_str();
    app.add_option("--layer", rc.layer, "1-based")->capture_default_str();
    app.add_option("--head", rc.head, "1-based")->capture_default_str();
    app.add_option("--time", rc.time, "time point label");
    app.add_option("--sentence", rc.sentence);
    app.add_option("--out", rc.out, "output file or directory");

    auto* train = app.add_subcommand("train", "build vocabularies, train, write checkpoint and loss log");
    auto* score = app.add_subcommand("score", "write semantic change scores for the target words");
    auto* eval = app.add_subcommand("eval", "correlate a score file with gold scores");
    eval->add_option("scores", rc.scores, "score TSV")->required();
    eval->add_option("targets", rc.targets, "gold targets TSV (default: DATASET/targets.tsv)");
    auto* inspect = app.add_subcommand("inspect-attention", "dump one head's attention weights as CSV");
    auto* synth = app.add_subcommand("synth", "generate a planted-change dataset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*train) {
            return cmd_train(rc);
        }
        if (*score) {
            return cmd_score(rc);
        }
        if (*eval) {
            return cmd_eval(rc);
        }
        if (*inspect) {
            return cmd_inspect(rc);
        }
        if (*synth) {
            return cmd_synth(rc);
        }
    } catch (const TrainingError& e) {
        std::cerr << "error: training failed: " << e.what() << "\n";
        return kExitTraining;
    } catch (const EvaluationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEvaluation;
    } catch (const DegenerateMetricError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEvaluation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace tatt
