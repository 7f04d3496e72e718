#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "dctc/trainer.hpp"

using namespace dctc;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

TrainConfig smoke_config(const Corpus& corpus, const GrammarSpec& g, const std::string& out_dir) {
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.total_steps = 40;
    cfg.batch_size = 16;
    cfg.log_every = 10;
    cfg.model = ModelConfig::from_grammar(g, corpus.vocab.size(), corpus.max_tokens + 2);
    cfg.model.embedding_dim = 12;
    cfg.model.encoder_hidden_dim = 20;
    cfg.model.decoder_hidden_dim = 20;
    cfg.objective.capacity_end = 1.0;
    cfg.objective.capacity_anneal_steps = 30;
    cfg.gumbel.tau_anneal_steps = 30;
    cfg.out_dir = out_dir;
    return cfg;
}

std::string slurp(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("training runs are bit-identical per seed", "[trainer]") {
    const auto g = GrammarSpec::desk(4);
    const auto corpus = generate_corpus(g, 5);
    const auto dir = fs::temp_directory_path() / "dctc_trainer_det";
    fs::remove_all(dir);

    const TrainReport a = train(smoke_config(corpus, g, (dir / "a").string()), corpus);
    const TrainReport b = train(smoke_config(corpus, g, (dir / "b").string()), corpus);

    CHECK(slurp(a.checkpoint_path) == slurp(b.checkpoint_path));
    CHECK(slurp(a.loss_csv_path) == slurp(b.loss_csv_path));
    CHECK(a.reconstruction_accuracy == b.reconstruction_accuracy);

    auto cfg_c = smoke_config(corpus, g, (dir / "c").string());
    cfg_c.seed = 12;
    const TrainReport c = train(cfg_c, corpus);
    CHECK(slurp(a.checkpoint_path) != slurp(c.checkpoint_path));
    fs::remove_all(dir);
}

TEST_CASE("loss log is monotone with fixed cadence and full schema", "[trainer]") {
    const auto g = GrammarSpec::desk(4);
    const auto corpus = generate_corpus(g, 5);
    const auto dir = fs::temp_directory_path() / "dctc_trainer_log";
    fs::remove_all(dir);

    auto cfg = smoke_config(corpus, g, (dir / "run").string());
    cfg.total_steps = 35;  // not a multiple of log_every: final row still present
    const TrainReport r = train(cfg, corpus);

    const std::string header = slurp(r.loss_csv_path).substr(0, 55);
    CHECK(header.rfind("step,recon,mi,dwkl,tc,capacity,ctc_penalty,total,tau", 0) == 0);

    const auto rows = load_loss_csv(r.loss_csv_path);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].step == 10);
    CHECK(rows[1].step == 20);
    CHECK(rows[2].step == 30);
    CHECK(rows[3].step == 35);
    for (const auto& row : rows) {
        CHECK(std::isfinite(row.total));
        CHECK(row.capacity >= 0.0);
        CHECK(row.tau > 0.0);
    }
    fs::remove_all(dir);
}

TEST_CASE("checkpoint round-trip preserves evaluation", "[trainer]") {
    const auto g = GrammarSpec::desk(3);
    const auto corpus = generate_corpus(g, 9);
    const auto dir = fs::temp_directory_path() / "dctc_trainer_ckpt";
    fs::remove_all(dir);

    auto cfg = smoke_config(corpus, g, (dir / "run").string());
    Model model = Model::init(cfg.model, cfg.seed);
    const TrainReport r = train_model(model, cfg, corpus);

    const Checkpoint ck = load_checkpoint(r.checkpoint_path);
    CHECK(ck.step == cfg.total_steps);
    CHECK(evaluate_reconstruction(ck.model, corpus) == r.reconstruction_accuracy);
    fs::remove_all(dir);
}

TEST_CASE("untrained model reconstructs near chance", "[trainer]") {
    const auto g = GrammarSpec::desk(4);
    const auto corpus = generate_corpus(g, 5);
    auto cfg = smoke_config(corpus, g, "unused");
    const Model m = Model::init(cfg.model, 3);
    CHECK(evaluate_reconstruction(m, corpus) <= 0.35);
}

TEST_CASE("perfect decoder scores accuracy one", "[trainer]") {
    // test double: a one-sentence corpus, where the decoder memorizes the
    // sentence outright and evaluate_reconstruction must report exactly 1
    const auto g = GrammarSpec::desk(1);
    Corpus corpus = generate_corpus(g, 2);
    corpus.examples.resize(1);
    const auto dir = fs::temp_directory_path() / "dctc_trainer_tiny";
    fs::remove_all(dir);
    auto cfg = smoke_config(corpus, g, (dir / "run").string());
    cfg.total_steps = 600;
    cfg.batch_size = 4;
    cfg.learning_rate = 3e-3;
    cfg.objective.mode = ObjectiveMode::kGammaZero;
    Model model = Model::init(cfg.model, cfg.seed);
    const TrainReport r = train_model(model, cfg, corpus);
    CHECK(r.reconstruction_accuracy == 1.0);
    fs::remove_all(dir);
}

TEST_CASE("divergence aborts with a checkpoint dump", "[trainer]") {
    const auto g = GrammarSpec::desk(3);
    const auto corpus = generate_corpus(g, 9);
    const auto dir = fs::temp_directory_path() / "dctc_trainer_nan";
    fs::remove_all(dir);

    auto cfg = smoke_config(corpus, g, (dir / "run").string());
    Model model = Model::init(cfg.model, cfg.seed);
    for (auto& v : model.params.by_name("out_w").value) v = std::nan("");

    bool threw = false;
    try {
        train_model(model, cfg, corpus);
    } catch (const TrainDivergence& e) {
        threw = true;
        CHECK(std::string(e.what()).find("non-finite loss") != std::string::npos);
        CHECK(fs::exists(dir / "run" / "model.ckpt"));
    }
    CHECK(threw);
    fs::remove_all(dir);
}

TEST_CASE("config validation warns and throws where promised", "[trainer]") {
    const auto g = GrammarSpec::desk(3);
    const auto corpus = generate_corpus(g, 9);
    auto cfg = smoke_config(corpus, g, "unused");
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.batch_size = 8;
    cfg.total_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
