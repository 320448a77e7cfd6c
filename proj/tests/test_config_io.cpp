#include <doctest.h>

#include <stdexcept>
#include <filesystem>
#include <fstream>

#include "fwl/config.hpp"
#include "fwl/io.hpp"
#include "fwl/rng.hpp"

using namespace fwl;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    auto dir = std::filesystem::temp_directory_path() / "fwl_config_tests";
    std::filesystem::create_directories(dir);
    auto path = (dir / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "fwl_config_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("parse_config layering") {
    SUBCASE("empty file yields pure defaults") {
        auto path = write_temp("empty.cfg", "");
        auto cfg = parse_config(path, {});
        CHECK(cfg.seed == 42);
        CHECK(cfg.sched.beta == 2.0);
        CHECK(cfg.synth.num_docs == 500);
        CHECK(cfg.student.hidden == std::vector<int>{32});
    }
    SUBCASE("no file at all yields pure defaults") {
        auto cfg = parse_config("", {});
        CHECK(cfg.sched.eta0 == 0.05);
    }
    SUBCASE("file values override defaults, overrides beat the file") {
        auto path = write_temp("layered.cfg", "train.beta = 0.5\nseed = 7 # comment\n");
        auto cfg = parse_config(path, {});
        CHECK(cfg.sched.beta == 0.5);
        CHECK(cfg.seed == 7);
        auto cfg2 = parse_config(path, {"train.beta=2.5"});
        CHECK(cfg2.sched.beta == 2.5);
        // the alias form works in overrides too
        auto cfg3 = parse_config(path, {"beta=3.5"});
        CHECK(cfg3.sched.beta == 3.5);
    }
    SUBCASE("unknown key rejected by name") {
        auto path = write_temp("unknown.cfg", "train.betta = 1\n");
        CHECK_THROWS_WITH_AS(parse_config(path, {}), doctest::Contains("train.betta"),
                             std::runtime_error);
        CHECK_THROWS_WITH_AS(parse_config("", {"nope=1"}), doctest::Contains("nope"),
                             std::runtime_error);
    }
    SUBCASE("constraint violation names the key") {
        CHECK_THROWS_WITH_AS(parse_config("", {"train.beta=-1"}), doctest::Contains("train.beta"),
                             std::runtime_error);
        CHECK_THROWS_WITH_AS(parse_config("", {"beta=-1"}), doctest::Contains("train.beta"),
                             std::runtime_error);
        CHECK_THROWS_WITH_AS(parse_config("", {"annotate.kind=magic"}),
                             doctest::Contains("annotate.kind"), std::runtime_error);
        CHECK_THROWS_WITH_AS(parse_config("", {"train.eta0=abc"}),
                             doctest::Contains("train.eta0"), std::runtime_error);
        CHECK_THROWS_WITH_AS(
            parse_config("", {"corpus.grade_thresholds=0.8,0.5"}),
            doctest::Contains("corpus.grade_thresholds"), std::runtime_error);
    }
    SUBCASE("echo carries the resolved values") {
        auto cfg = parse_config("", {"train.beta=9.5"});
        bool found = false;
        for (const auto& [k, v] : cfg.echo)
            if (k == "train.beta") {
                found = true;
                CHECK(v == "9.5");
            }
        CHECK(found);
    }
}

TEST_CASE("pairwise and soft TSV round-trips") {
    std::vector<PairwiseSample> samples{
        {"q1", "a", "b", 0.8125, LabelKind::Weak, std::nullopt},
        {"q1", "c", "d", 1.0, LabelKind::Strong, std::nullopt},
        {"q2", "e", "f", 1.0 / 3.0, LabelKind::Weak, std::nullopt},
    };
    auto path = temp_path("weak.tsv");
    save_pairwise_tsv(path, samples, {"seed = 42"});
    auto loaded = load_pairwise_tsv(path);
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].query_id == samples[i].query_id);
        CHECK(loaded[i].pos_doc_id == samples[i].pos_doc_id);
        CHECK(loaded[i].neg_doc_id == samples[i].neg_doc_id);
        CHECK(loaded[i].label == samples[i].label);  // exact round-trip
        CHECK(loaded[i].label_kind == samples[i].label_kind);
    }

    SUBCASE("soft samples are rejected by the weak writer") {
        std::vector<PairwiseSample> soft{{"q", "a", "b", 0.5, LabelKind::Soft, 0.1}};
        CHECK_THROWS_AS(save_pairwise_tsv(temp_path("bad.tsv"), soft), std::invalid_argument);
    }

    SUBCASE("soft TSV carries label and sigma exactly") {
        std::vector<SoftSample> soft;
        SoftSample s;
        s.sample = {"q9", "x", "y", 0.0, LabelKind::Soft, 0.0};
        s.soft_label = 0.123456789123456789;
        s.uncertainty_value = 1e-12 / 3.0;
        s.sample.label = s.soft_label;
        s.sample.uncertainty = s.uncertainty_value;
        soft.push_back(s);
        auto spath = temp_path("soft.tsv");
        save_soft_tsv(spath, soft);
        auto back = load_soft_tsv(spath);
        REQUIRE(back.size() == 1);
        CHECK(back[0].soft_label == soft[0].soft_label);
        CHECK(back[0].uncertainty_value == soft[0].uncertainty_value);
        CHECK(back[0].sample.label_kind == LabelKind::Soft);
    }

    SUBCASE("malformed line reports its number") {
        auto bad = write_temp("broken.tsv", "q1\ta\tb\t0.5\tweak\nq2\tonly\tfour\tfields\n");
        CHECK_THROWS_WITH_AS(load_pairwise_tsv(bad), doctest::Contains(":2"),
                             std::runtime_error);
    }
}

TEST_CASE("student checkpoint round-trips bit-exactly") {
    StudentConfig cfg;
    cfg.embedding_dim = 5;
    cfg.hidden = {7, 3};
    auto params = init_student(cfg, 23, 99);
    // make values maximally awkward
    params.embeddings[0] = 0.1 + 0.2;
    params.importance[3] = -0.0;
    params.layers[1].w[2] = std::nextafter(1.0, 2.0);

    auto path = temp_path("student.ckpt");
    save_student(path, params);
    auto back = load_student(path);
    CHECK(back.vocab_size == params.vocab_size);
    CHECK(back.embedding_dim == params.embedding_dim);
    CHECK(std::memcmp(back.embeddings.data(), params.embeddings.data(),
                      params.embeddings.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(back.importance.data(), params.importance.data(),
                      params.importance.size() * sizeof(double)) == 0);
    REQUIRE(back.layers.size() == params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        CHECK(back.layers[l].in == params.layers[l].in);
        CHECK(back.layers[l].out == params.layers[l].out);
        CHECK(std::memcmp(back.layers[l].w.data(), params.layers[l].w.data(),
                          params.layers[l].w.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(back.layers[l].b.data(), params.layers[l].b.data(),
                          params.layers[l].b.size() * sizeof(double)) == 0);
    }

    SUBCASE("corrupted magic rejected") {
        auto badpath = temp_path("bad.ckpt");
        std::ofstream out(badpath, std::ios::binary);
        out << "NOPE and some garbage";
        out.close();
        CHECK_THROWS_AS(load_student(badpath), std::runtime_error);
    }
}

TEST_CASE("format_double round-trips exactly") {
    auto rng = make_rng(123);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 500; ++i) {
        double v = u(rng) * std::pow(10.0, i % 13 - 6);
        double back = std::stod(format_double(v));
        CHECK(back == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0) == "1");
}

TEST_CASE("metrics CSV is deterministic") {
    std::vector<MetricRow> rows{{"fwl", 42, 0, "q1", 0.5, 0.25}, {"fwl", 42, 1, "q2", 1.0, 1.0}};
    auto p1 = temp_path("m1.csv");
    auto p2 = temp_path("m2.csv");
    save_metrics_csv(p1, rows, {"seed = 42"});
    save_metrics_csv(p2, rows, {"seed = 42"});
    std::ifstream f1(p1), f2(p2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    CHECK(s1.str().find("strategy,seed,fold,query_id,ap,ndcg20") != std::string::npos);
    CHECK(s1.str().find("# seed = 42") != std::string::npos);
}
