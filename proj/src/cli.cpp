#include "statemem/cli.hpp"

#include "statemem/config.hpp"
#include "statemem/corpus.hpp"
#include "statemem/embeddings.hpp"
#include "statemem/io.hpp"
#include "statemem/jacobian.hpp"
#include "statemem/log.hpp"
#include "statemem/lstm.hpp"
#include "statemem/probe.hpp"
#include "statemem/separability.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace statemem {

namespace fs = std::filesystem;

namespace {

enum class KeyKind { value, boolean, list };

struct KeyInfo {
    const char* name;
    KeyKind kind;
    const char* help;
};

// Every configuration key; each is also a same-named command-line flag.
const std::vector<KeyInfo>& keys()
{
    static const std::vector<KeyInfo> k = {
        {"corpus", KeyKind::value, "text corpus, one sentence per line"},
        {"valid-corpus", KeyKind::value, "validation corpus for train-lm"},
        {"tagged-corpus", KeyKind::value, "token<TAB>tag corpus, blank line between sentences"},
        {"vocab", KeyKind::value, "vocabulary file"},
        {"embeddings", KeyKind::value, "word2vec text embeddings"},
        {"checkpoint", KeyKind::value, "LM checkpoint directory"},
        {"out", KeyKind::value, "output directory"},
        {"seed", KeyKind::value, "master random seed"},
        {"jobs", KeyKind::value, "worker threads"},
        {"verbose", KeyKind::boolean, "progress on stderr"},
        {"min-count", KeyKind::value, "vocabulary minimum count"},
        {"max-vocab", KeyKind::value, "vocabulary size cap including specials (0 = none)"},
        {"emb-dim", KeyKind::value, "embedding dimension E"},
        {"hidden", KeyKind::value, "LSTM state dimension H"},
        {"init-scale", KeyKind::value, "uniform init range of LM weights"},
        {"batch", KeyKind::value, "batch size B"},
        {"seq-len", KeyKind::value, "BPTT window length L"},
        {"lr", KeyKind::value, "initial learning rate"},
        {"const-epochs", KeyKind::value, "epochs at the initial learning rate"},
        {"decay", KeyKind::value, "learning rate decay per epoch"},
        {"epochs", KeyKind::value, "maximum epochs"},
        {"clip", KeyKind::value, "global gradient norm threshold"},
        {"keep-prob", KeyKind::value, "dropout keep probability before the softmax"},
        {"freeze-embeddings", KeyKind::boolean, "keep the loaded embeddings fixed"},
        {"cbow-window", KeyKind::value, "CBOW context window"},
        {"cbow-negatives", KeyKind::value, "CBOW negative samples"},
        {"cbow-epochs", KeyKind::value, "CBOW epochs"},
        {"cbow-lr", KeyKind::value, "CBOW initial learning rate"},
        {"cbow-subsample", KeyKind::value, "CBOW frequent-word subsampling threshold"},
        {"tau-max", KeyKind::value, "largest delay analysed"},
        {"n", KeyKind::value, "subspace size for cos(d, H_n)"},
        {"stride", KeyKind::value, "anchor stride"},
        {"state", KeyKind::value, "analysed state: c or h"},
        {"analysis-streams", KeyKind::value, "parallel streams the analysis corpus is cut into"},
        {"class", KeyKind::list, "word class name (repeatable)"},
        {"property", KeyKind::list, "property pair A:B (repeatable)"},
        {"grid", KeyKind::value, "classifier grid file"},
        {"valid-fraction", KeyKind::value, "held-out fraction per class for classify"},
        {"standardize", KeyKind::boolean, "z-score classifier features using training statistics"},
    };
    return k;
}

struct Invocation {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, std::vector<std::string>> lists;
    std::string tau;  // alias of tau-max
};

void add_key_options(CLI::App* sub, Invocation& inv)
{
    sub->add_option("--config", inv.config_path, "configuration file")->check(CLI::ExistingFile);
    for (const auto& key : keys()) {
        const std::string flag = std::string("--") + key.name;
        switch (key.kind) {
        case KeyKind::value:
            sub->add_option(flag, inv.values[key.name], key.help);
            break;
        case KeyKind::boolean:
            sub->add_flag(flag + "{true}", inv.values[key.name], key.help);
            break;
        case KeyKind::list:
            sub->add_option(flag, inv.lists[key.name], key.help);
            break;
        }
    }
    sub->add_option("--tau", inv.tau, "alias of --tau-max");
}

// Config file entries, then command-line flags on top.
Config resolve_config(const CLI::App* sub, const Invocation& inv)
{
    Config cfg = inv.config_path.empty() ? Config{} : Config::load(inv.config_path);
    for (const auto& key : keys()) {
        const std::string flag = std::string("--") + key.name;
        if (sub->count(flag) == 0) continue;
        if (key.kind == KeyKind::list) {
            std::string joined;
            for (const auto& v : inv.lists.at(key.name)) joined += (joined.empty() ? "" : ",") + v;
            cfg.set(key.name, joined);
        } else {
            cfg.set(key.name, inv.values.at(key.name));
        }
    }
    if (sub->count("--tau") != 0) {
        if (sub->count("--tau-max") != 0) throw std::invalid_argument("--tau and --tau-max are mutually exclusive");
        cfg.set("tau-max", inv.tau);
    }
    return cfg;
}

std::string require_path(const Config& cfg, const std::string& key)
{
    if (!cfg.has(key) || cfg.get(key).empty()) throw std::invalid_argument("missing required key '" + key + "'");
    const std::string& p = cfg.get(key);
    if (!fs::exists(p)) throw std::invalid_argument(key + ": no such file or directory: " + p);
    return p;
}

std::optional<std::string> optional_path(const Config& cfg, const std::string& key)
{
    if (!cfg.has(key) || cfg.get(key).empty()) return std::nullopt;
    return require_path(cfg, key);
}

std::size_t positive(const Config& cfg, const std::string& key, long fallback)
{
    const long v = cfg.get_int(key, fallback);
    if (v < 1) throw std::invalid_argument(key + " must be >= 1, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
}

std::size_t non_negative(const Config& cfg, const std::string& key, long fallback)
{
    const long v = cfg.get_int(key, fallback);
    if (v < 0) throw std::invalid_argument(key + " must be >= 0, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
}

fs::path output_dir(const Config& cfg)
{
    const fs::path out = cfg.get_string("out", ".");
    fs::create_directories(out);
    return out;
}

std::uint64_t master_seed(const Config& cfg) { return cfg.get_u64("seed", 1); }

int jobs(const Config& cfg) { return static_cast<int>(positive(cfg, "jobs", 1)); }

void write_out(const fs::path& path, const std::string& contents)
{
    write_file_atomic(path.string(), contents);
    log_info("wrote " + path.string());
}

std::string join_tokens(const std::vector<std::string>& tokens)
{
    std::string line;
    for (const auto& t : tokens) line += (line.empty() ? "" : " ") + t;
    return line;
}

Vocabulary vocab_for(const Config& cfg, const Sentences& sentences)
{
    if (auto p = optional_path(cfg, "vocab")) return load_vocab(*p);
    return build_vocab(sentences, non_negative(cfg, "min-count", 1), non_negative(cfg, "max-vocab", 0));
}

// Encoded corpus cut into `streams` contiguous pieces.
std::vector<std::vector<WordId>> analysis_streams(const std::vector<WordId>& ids, std::size_t streams)
{
    if (ids.size() < streams) throw std::invalid_argument("analysis corpus shorter than the number of streams");
    const std::size_t len = ids.size() / streams;
    std::vector<std::vector<WordId>> out;
    for (std::size_t s = 0; s < streams; ++s)
        out.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(s * len),
                         ids.begin() + static_cast<std::ptrdiff_t>((s + 1) * len));
    return out;
}

struct WordClasses {
    std::vector<ClassSpec> specs;
    TaggedCorpus tagged;
};

WordClasses load_classes(const Config& cfg)
{
    return {resolve_classes(cfg), load_tagged_corpus(require_path(cfg, "tagged-corpus"))};
}

WordClass word_class(const WordClasses& wc, const std::string& name, const Vocabulary& vocab)
{
    return {name, class_members(wc.tagged, find_class(wc.specs, name), vocab)};
}

std::pair<std::string, std::string> parse_property(const std::string& text)
{
    const auto parts = split(text, ':');
    if (parts.size() != 2 || trim(parts[0]).empty() || trim(parts[1]).empty())
        throw std::invalid_argument("property must look like A:B, got '" + text + "'");
    return {trim(parts[0]), trim(parts[1])};
}

struct AnalysisSetup {
    Checkpoint ckpt;
    std::vector<AnalysisStream> streams;
    std::size_t tau_max = 0;
    StateSelector state = StateSelector::cell;
    AnchorPolicy policy;
};

AnalysisSetup analysis_setup(const Config& cfg)
{
    AnalysisSetup s;
    s.ckpt = load_checkpoint(require_path(cfg, "checkpoint"));
    const auto sentences = read_plain_corpus(require_path(cfg, "corpus"));
    const auto ids = encode_sentences(sentences, s.ckpt.vocab);
    s.tau_max = non_negative(cfg, "tau-max", 30);
    s.state = parse_state_selector(cfg.get_string("state", "c"));
    s.policy.stride = positive(cfg, "stride", 1);
    log_info("tracing analysis corpus (" + std::to_string(ids.size()) + " tokens)");
    s.streams = trace_streams(s.ckpt.params, analysis_streams(ids, positive(cfg, "analysis-streams", 1)));
    return s;
}

std::vector<GradientMatrix> curve_for(const AnalysisSetup& s, const WordClass* filter, const Config& cfg)
{
    const std::string label = filter ? filter->name : "all";
    log_info("averaging gradients for " + label + ", tau 0.." + std::to_string(s.tau_max));
    return average_gradient_curve(s.ckpt.params, s.streams, s.tau_max, s.policy, filter, s.state, jobs(cfg));
}

DelayCurve logged_sv_curve(const std::vector<GradientMatrix>& matrices)
{
    DelayCurve curve = sv_curve(matrices);
    for (const auto& r : curve.rows)
        log_info("tau " + std::to_string(r.tau) + ": sigma1 " + format_fixed(r.sigma1, 4) + ", ratio1 " +
                 format_fixed(r.ratio1, 4));
    return curve;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_normalize(const Config& cfg)
{
    const fs::path out = output_dir(cfg);
    const std::string text = read_file(require_path(cfg, "corpus"));
    std::istringstream is(text);
    std::string line;
    std::string normalized;
    while (std::getline(is, line)) {
        const auto tokens = normalize_line(line);
        if (!tokens.empty()) normalized += join_tokens(tokens) + '\n';
    }
    write_out(out / "normalized.txt", normalized);
    if (auto tagged = optional_path(cfg, "tagged-corpus")) {
        const auto norm = normalize_tagged(load_tagged_corpus(*tagged));
        save_tagged_corpus((out / "tagged.normalized.tsv").string(), norm);
        log_info("wrote " + (out / "tagged.normalized.tsv").string());
    }
}

void cmd_build_vocab(const Config& cfg)
{
    const fs::path out = output_dir(cfg);
    const auto sentences = read_plain_corpus(require_path(cfg, "corpus"));
    const auto vocab = build_vocab(sentences, non_negative(cfg, "min-count", 1), non_negative(cfg, "max-vocab", 0));
    save_vocab((out / "vocab.txt").string(), vocab);
    log_info("vocabulary of " + std::to_string(vocab.size()) + " types");
}

void cmd_train_cbow(const Config& cfg)
{
    const fs::path out = output_dir(cfg);
    const auto sentences = read_plain_corpus(require_path(cfg, "corpus"));
    const auto vocab = vocab_for(cfg, sentences);
    CbowConfig cc;
    cc.dim = static_cast<int>(positive(cfg, "emb-dim", 64));
    cc.window = static_cast<int>(positive(cfg, "cbow-window", 5));
    cc.negatives = static_cast<int>(positive(cfg, "cbow-negatives", 5));
    cc.epochs = static_cast<int>(positive(cfg, "cbow-epochs", 5));
    cc.lr = cfg.get_double("cbow-lr", 0.025);
    cc.subsample = cfg.get_double("cbow-subsample", 0.0);
    cc.seed = substream_seed(master_seed(cfg), "embedding-init");
    const auto result = train_cbow(encode_sentences(sentences, vocab), vocab.size(), cc);
    std::string log = "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        log += std::to_string(e + 1) + ',' + format_double(result.epoch_loss[e]) + '\n';
        log_info("cbow epoch " + std::to_string(e + 1) + ": loss " + format_fixed(result.epoch_loss[e], 4));
    }
    save_embeddings((out / "embeddings.txt").string(), result.embeddings, vocab);
    write_out(out / "cbow_loss.csv", log);
    if (!cfg.has("vocab")) save_vocab((out / "vocab.txt").string(), vocab);
}

TrainConfig train_config(const Config& cfg)
{
    TrainConfig tc;
    tc.batch = positive(cfg, "batch", 20);
    tc.seq_len = positive(cfg, "seq-len", 50);
    tc.lr = cfg.get_double("lr", 1.0);
    tc.constant_lr_epochs = static_cast<int>(non_negative(cfg, "const-epochs", 6));
    tc.lr_decay = cfg.get_double("decay", 0.8);
    tc.max_epochs = static_cast<int>(positive(cfg, "epochs", 20));
    tc.clip = cfg.get_double("clip", 5.0);
    tc.keep_prob = cfg.get_double("keep-prob", 0.5);
    tc.seed = master_seed(cfg);
    tc.freeze_embeddings = cfg.get_bool("freeze-embeddings", false);
    tc.validate();
    return tc;
}

void cmd_train_lm(const Config& cfg)
{
    const fs::path out = output_dir(cfg);
    const TrainConfig tc = train_config(cfg);
    const auto sentences = read_plain_corpus(require_path(cfg, "corpus"));
    const auto vocab = vocab_for(cfg, sentences);
    const auto valid_path = optional_path(cfg, "valid-corpus");
    const auto emb_path = optional_path(cfg, "embeddings");
    if (tc.freeze_embeddings && !emb_path) throw std::invalid_argument("freeze-embeddings requires embeddings");

    std::optional<EmbeddingMatrix> emb;
    if (emb_path) emb = load_embeddings(*emb_path, vocab);
    const Index e_dim = emb ? emb->dim() : static_cast<Index>(positive(cfg, "emb-dim", 64));
    if (emb && cfg.has("emb-dim") && cfg.get_int("emb-dim", 0) != e_dim)
        throw std::invalid_argument("emb-dim " + cfg.get("emb-dim") + " does not match embeddings dimension " +
                                    std::to_string(e_dim));
    LstmParams params = init_params(static_cast<Index>(vocab.size()), e_dim,
                                    static_cast<Index>(positive(cfg, "hidden", 256)),
                                    substream_seed(master_seed(cfg), "lm-init"), cfg.get_double("init-scale", 0.05));
    if (emb) params.embedding = emb->input;
    params.embeddings_frozen = tc.freeze_embeddings;

    const BatchPlan train = batchify(encode_sentences(sentences, vocab), tc.batch, tc.seq_len);
    std::optional<BatchPlan> valid;
    if (valid_path) valid = batchify(encode_sentences(read_plain_corpus(*valid_path), vocab), 1, tc.seq_len);

    const TrainResult result = train_lm(std::move(params), train, tc, valid ? &*valid : nullptr);
    std::string log = "epoch,lr,train_ppl,valid_ppl\n";
    for (const auto& e : result.epochs)
        log += std::to_string(e.epoch) + ',' + format_double(e.lr) + ',' + format_double(e.train_perplexity) + ',' +
               (e.valid_perplexity ? format_double(*e.valid_perplexity) : std::string()) + '\n';
    const std::string ckpt_dir = cfg.get_string("checkpoint", (out / "checkpoint").string());
    save_checkpoint(ckpt_dir, result.params, vocab,
                    {{"seed", std::to_string(tc.seed)},
                     {"batch", std::to_string(tc.batch)},
                     {"seq_len", std::to_string(tc.seq_len)},
                     {"epochs", std::to_string(result.epochs.size())}});
    write_out(out / "train_log.csv", log);
    log_info("checkpoint in " + ckpt_dir);
}

void cmd_eval_lm(const Config& cfg)
{
    const Checkpoint ckpt = load_checkpoint(require_path(cfg, "checkpoint"));
    const auto ids = encode_sentences(read_plain_corpus(require_path(cfg, "corpus")), ckpt.vocab);
    const BatchPlan plan = batchify(ids, positive(cfg, "batch", 1), positive(cfg, "seq-len", 50));
    std::cout << "perplexity " << format_double(perplexity(ckpt.params, plan)) << '\n';
}

void cmd_probe(const Config& cfg)
{
    const fs::path out = output_dir(cfg);
    const AnalysisSetup s = analysis_setup(cfg);
    const fs::path grad_dir = out / "gradients";
    fs::create_directories(grad_dir);

    const auto all = curve_for(s, nullptr, cfg);
    write_out(out / "delay_curve.csv", delay_curve_csv(logged_sv_curve(all)));
    for (const auto& g : all) save_gradient_matrix((grad_dir / ("all_tau" + std::to_string(g.tau) + ".txt")).string(), g);

    const auto class_names = cfg.get_list("class");
    if (class_names.empty()) return;
    const WordClasses wc = load_classes(cfg);
    std::vector<std::pair<std::string, double>> sigma1;
    for (const auto& name : class_names) {
        const WordClass cls = word_class(wc, name, s.ckpt.vocab);
        const auto matrices = curve_for(s, &cls, cfg);
        const DelayCurve curve = logged_sv_curve(matrices);
        write_out(out / ("delay_curve_" + name + ".csv"), delay_curve_csv(curve));
        for (const auto& g : matrices)
            save_gradient_matrix((grad_dir / (name + "_tau" + std::to_string(g.tau) + ".txt")).string(), g);
        sigma1.emplace_back(name, curve.rows.front().sigma1);
    }
    if (sigma1.size() == 1) {
        std::cout << sigma1.front().first << "  " << format_fixed(sigma1.front().second, 2) << '\n';
        return;
    }
    const auto table = class_sv_table(sigma1);
    write_out(out / "class_sv_table.csv", class_table_csv(table));
    std::cout << render_class_table(table);
}

MatrixXd embedding_table(const Config& cfg, const Vocabulary& vocab, const std::optional<Checkpoint>& ckpt)
{
    if (auto p = optional_path(cfg, "embeddings")) return load_embeddings(*p, vocab).input;
    if (!ckpt) throw std::invalid_argument("need embeddings or checkpoint");
    return ckpt->params.embedding;
}

void cmd_track_property(const Config& cfg)
{
    const fs::path out = output_dir(cfg);
    const AnalysisSetup s = analysis_setup(cfg);
    const WordClasses wc = load_classes(cfg);
    auto props = cfg.get_list("property");
    if (props.empty()) props = {"sg-noun:pl-noun", "common:proper"};
    const Index n = static_cast<Index>(positive(cfg, "n", 5));
    const MatrixXd table = embedding_table(cfg, s.ckpt.vocab, s.ckpt);

    const auto matrices = curve_for(s, nullptr, cfg);
    std::vector<PropertyCurve> curves;
    for (const auto& p : props) {
        const auto [a, b] = parse_property(p);
        const WordClass ca = word_class(wc, a, s.ckpt.vocab);
        const WordClass cb = word_class(wc, b, s.ckpt.vocab);
        const PropertyVector d = difference_vector(table, ca.members, cb.members, a, b);
        curves.push_back(track_property(matrices, d, n));
        log_info("property " + d.name() + ": m(0) " + format_fixed(curves.back().rows.front().m, 4));
    }
    write_out(out / "property_curve.csv", property_curves_csv(curves));
}

void cmd_classify(const Config& cfg)
{
    const fs::path out = output_dir(cfg);
    std::optional<Checkpoint> ckpt;
    if (auto p = optional_path(cfg, "checkpoint")) ckpt = load_checkpoint(*p);
    Vocabulary vocab = ckpt ? ckpt->vocab : load_vocab(require_path(cfg, "vocab"));
    if (ckpt && cfg.has("vocab")) vocab = load_vocab(require_path(cfg, "vocab"));
    const MatrixXd table = embedding_table(cfg, vocab, ckpt);
    const WordClasses wc = load_classes(cfg);

    HyperGrid grid;
    if (auto g = optional_path(cfg, "grid")) grid = parse_grid(read_file(*g));
    const double valid_fraction = cfg.get_double("valid-fraction", 0.2);

    std::vector<std::pair<std::string, std::vector<WordClass>>> tasks;
    const auto class_names = cfg.get_list("class");
    if (class_names.size() == 1) throw std::invalid_argument("classify needs at least two classes");
    if (!class_names.empty()) {
        std::vector<WordClass> classes;
        std::string name;
        for (const auto& c : class_names) {
            classes.push_back(word_class(wc, c, vocab));
            name += (name.empty() ? "" : "+") + c;
        }
        tasks.emplace_back(name, std::move(classes));
    }
    for (const auto& p : cfg.get_list("property")) {
        const auto [a, b] = parse_property(p);
        tasks.emplace_back(a + ":" + b, std::vector<WordClass>{word_class(wc, a, vocab), word_class(wc, b, vocab)});
    }
    if (tasks.empty()) throw std::invalid_argument("classify needs --class (two or more) or --property");

    const std::uint64_t split_seed = substream_seed(master_seed(cfg), "classifier");
    std::string summary = "task,classes,train_size,valid_size,valid_accuracy,best\n";
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto& [name, classes] = tasks[t];
        const auto data = labeled_from_classes(table, classes);
        auto [train, valid] = split_train_valid(data, valid_fraction, split_seed + t);
        if (cfg.get_bool("standardize", false)) {
            const auto z = Standardizer::fit(train.x);
            train.x = z.apply(train.x);
            valid.x = z.apply(valid.x);
        }
        log_info("classify " + name + ": " + std::to_string(train.size()) + " train, " + std::to_string(valid.size()) +
                 " valid, " + std::to_string(grid.points().size()) + " grid points");
        const GridResult result = grid_search(train, valid, grid, SolverOptions{}, jobs(cfg));
        std::string file = name;
        for (char& c : file)
            if (c == ':' || c == '+') c = '_';
        write_out(out / ("classify_" + file + ".csv"), grid_results_csv(result));
        summary += name + ',' + std::to_string(classes.size()) + ',' + std::to_string(train.size()) + ',' +
                   std::to_string(valid.size()) + ',' + format_double(result.best_valid_accuracy) + ',' +
                   result.best.hyper.describe() + '\n';
        std::cout << name << "  " << format_fixed(100.0 * result.best_valid_accuracy, 1) << "%  ("
                  << result.best.hyper.describe() << ")\n";
    }
    write_out(out / "classify_summary.csv", summary);
}

struct Subcommand {
    const char* name;
    const char* help;
    void (*fn)(const Config&);
};

const std::vector<Subcommand>& subcommands()
{
    static const std::vector<Subcommand> s = {
        {"normalize", "normalize a raw corpus (and tagged corpus)", cmd_normalize},
        {"build-vocab", "build a vocabulary from a normalized corpus", cmd_build_vocab},
        {"train-cbow", "train CBOW embeddings", cmd_train_cbow},
        {"train-lm", "train the LSTM language model", cmd_train_lm},
        {"eval-lm", "perplexity of a checkpoint on a corpus", cmd_eval_lm},
        {"probe", "singular-value delay curves and per-class tables", cmd_probe},
        {"track-property", "property-direction retention over delay", cmd_track_property},
        {"classify", "grid-searched logistic regression on embeddings", cmd_classify},
    };
    return s;
}

}  // namespace

int run(int argc, char** argv)
{
    CLI::App app{"statemem: what an LSTM cell state remembers of its input embeddings"};
    app.require_subcommand(1);
    std::vector<Invocation> invocations(subcommands().size());
    std::vector<CLI::App*> apps;
    for (std::size_t i = 0; i < subcommands().size(); ++i) {
        CLI::App* sub = app.add_subcommand(subcommands()[i].name, subcommands()[i].help);
        add_key_options(sub, invocations[i]);
        apps.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    for (std::size_t i = 0; i < apps.size(); ++i) {
        if (!apps[i]->parsed()) continue;
        try {
            const Config cfg = resolve_config(apps[i], invocations[i]);
            set_verbose(cfg.get_bool("verbose", true));
            subcommands()[i].fn(cfg);
            return 0;
        } catch (const std::exception& e) {
            std::string msg = e.what();
            for (char& c : msg)
                if (c == '\n') c = ' ';
            std::cerr << "error: " << subcommands()[i].name << ": " << msg << '\n';
            return 1;
        }
    }
    return 1;
}

int run(const std::vector<std::string>& args)
{
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.push_back("statemem");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    argv.push_back(nullptr);
    return run(static_cast<int>(storage.size()), argv.data());
}

}  // namespace statemem
