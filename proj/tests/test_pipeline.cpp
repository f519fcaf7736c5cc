#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "facet/facet.hpp"

namespace fs = std::filesystem;

namespace {

class Pipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "facet_pipeline_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  static int run_cli(const std::string& args) {
    std::string cmd = std::string(FACET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }

  fs::path dir_;
};

facet::FeatureStore easy_store(std::uint64_t seed) {
  facet::SyntheticSpec spec;
  spec.identities = 2;
  spec.samples_min = spec.samples_max = 10;
  spec.dim = 16;
  spec.sigma_clean = 0.05;
  spec.sigma_hard = 0.05;
  spec.challenging_fraction = 0.0;
  spec.seed = seed;
  return facet::generate(spec);
}

}  // namespace

TEST_F(Pipeline, NaiveBaselineSolvesTwoWellSeparatedIdentities) {
  auto store = easy_store(3);
  auto graph = facet::build_knn(store, 8, 3);
  facet::FaceTModel naive;
  naive.variant = facet::Variant::naive;
  auto links = facet::predict_all(store, graph, naive);
  auto sweep = facet::sweep_threshold(links, store.labels, {0.3, 0.5, 0.7, 0.9});
  EXPECT_DOUBLE_EQ(sweep.rows[sweep.best_index].metrics.pairwise.f, 1.0);
}

TEST_F(Pipeline, LinkageCsvRoundTripsExactly) {
  auto store = easy_store(5);
  auto graph = facet::build_knn(store, 6, 2);
  auto model = facet::init_model<float>(facet::Variant::full, 16, 2, 8, 1, 0.0f, 7);
  auto links = facet::predict_all(store, graph, model);
  facet::write_linkage_csv(links, path("links.csv"));
  auto loaded = facet::read_linkage_csv(path("links.csv"));
  ASSERT_EQ(loaded.rows.size(), links.rows.size());
  for (std::size_t i = 0; i < links.rows.size(); ++i) {
    EXPECT_EQ(loaded.rows[i].query, links.rows[i].query);
    EXPECT_EQ(loaded.rows[i].candidate, links.rows[i].candidate);
    EXPECT_EQ(loaded.rows[i].probability, links.rows[i].probability);  // bit-exact
  }
}

TEST_F(Pipeline, MalformedArtifactsAreFormatErrors) {
  {
    std::ofstream out(path("bad.csv"));
    out << "q,k,p\n0,1,1.5\n";  // probability out of range
  }
  EXPECT_THROW(facet::read_linkage_csv(path("bad.csv")), facet::FormatError);
  {
    std::ofstream out(path("dup.csv"));
    out << "q,k,p\n0,1,0.5\n0,1,0.6\n";  // duplicate pair
  }
  EXPECT_THROW(facet::read_linkage_csv(path("dup.csv")), facet::FormatError);
  {
    std::ofstream out(path("nohdr.csv"));
    out << "0,1,0.5\n";
  }
  EXPECT_THROW(facet::read_linkage_csv(path("nohdr.csv")), facet::FormatError);
  {
    std::ofstream out(path("bad.tsv"));
    out << "0\t0\n2\t1\n";  // instance index gap
  }
  EXPECT_THROW(facet::read_partition(path("bad.tsv")), facet::FormatError);
}

TEST_F(Pipeline, PartitionAndReportFilesRoundTrip) {
  facet::ClusterPartition part;
  part.assignment = {0, 0, 1, 2, 1};
  part.count = 3;
  facet::write_partition(part, path("p.tsv"));
  auto loaded = facet::read_partition(path("p.tsv"));
  EXPECT_EQ(loaded.assignment, part.assignment);
  EXPECT_EQ(loaded.count, part.count);

  std::vector<std::int64_t> truth{0, 0, 1, 1, 1};
  auto report = facet::evaluate_clustering(part, truth);
  facet::write_report(report, path("r.txt"));
  auto text = slurp(path("r.txt"));
  EXPECT_NE(text.find("pairwise_f: "), std::string::npos);
  EXPECT_NE(text.find("instances: 5"), std::string::npos);
}

TEST_F(Pipeline, LibraryEndToEndTrainsAndBeatsChance) {
  facet::SyntheticSpec spec;
  spec.identities = 8;
  spec.samples_min = 10;
  spec.samples_max = 14;
  spec.dim = 16;
  spec.sigma_clean = 0.15;
  spec.sigma_hard = 0.35;
  spec.challenging_fraction = 0.15;
  spec.seed = 11;
  auto store = facet::generate(spec);
  auto graph = facet::build_knn(store, 10, 3);

  facet::TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.base_lr = 0.001;
  cfg.warmup_steps = 20;
  cfg.epochs = 12;
  cfg.hop1 = 10;
  cfg.hop2 = 3;
  cfg.dropout = 0.2;
  cfg.seed = 13;
  cfg.heads = 2;
  cfg.head_dim = 8;
  cfg.depth = 1;
  auto result = facet::train_model<float>(store, graph, cfg, facet::Variant::full);
  auto links = facet::predict_all(store, graph, result.model);

  // trained probabilities concentrate near the ends, so the operating
  // point usually lives above 0.9: sweep a grid that covers that region
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  for (double t : {0.96, 0.97, 0.98, 0.985, 0.99, 0.995, 0.998, 0.999}) {
    grid.push_back(t);
  }
  auto sweep = facet::sweep_threshold(links, store.labels, grid);
  EXPECT_GT(sweep.rows[sweep.best_index].metrics.pairwise.f, 0.6);
}

TEST_F(Pipeline, CliRunsVerbatimPipelineDeterministically) {
  std::string features = path("f.fctf"), labels = path("l.fctl");
  std::string graph = path("g.fctg");

  ASSERT_EQ(run_cli("gen-data --identities 6 --samples-min 8 --samples-max 10"
                    " --dim 16 --sigma-clean 0.08 --sigma-hard 0.2 --rho 0.1"
                    " --seed 5 --out " + features + " --labels " + labels),
            0);
  ASSERT_TRUE(fs::exists(features));
  ASSERT_TRUE(fs::exists(labels));
  ASSERT_TRUE(fs::exists(features + ".manifest.json"));

  ASSERT_EQ(run_cli("build-knn --features " + features + " --hop1 8 --hop2 3 --out " +
                    graph),
            0);

  for (int run = 0; run < 2; ++run) {
    std::string suffix = std::to_string(run);
    ASSERT_EQ(run_cli("train --features " + features + " --labels " + labels +
                      " --graph " + graph + " --variant full --epochs 3" +
                      " --batch-size 8 --lr 0.002 --warmup-steps 10" +
                      " --heads 2 --head-dim 8 --depth 1 --dropout 0.2 --seed 9" +
                      " --checkpoint " + path("m" + suffix + ".fctw")),
              0);
    ASSERT_EQ(run_cli("predict --features " + features + " --graph " + graph +
                      " --checkpoint " + path("m" + suffix + ".fctw") + " --out " +
                      path("links" + suffix + ".csv")),
              0);
    ASSERT_EQ(run_cli("cluster --links " + path("links" + suffix + ".csv") +
                      " --features " + features + " --tau 0.5 --out " +
                      path("part" + suffix + ".tsv")),
              0);
    ASSERT_EQ(run_cli("evaluate --partition " + path("part" + suffix + ".tsv") +
                      " --labels " + labels + " --out " + path("rep" + suffix + ".txt")),
              0);
  }
  // identical manifests -> byte-identical artifacts
  EXPECT_EQ(slurp(path("m0.fctw")), slurp(path("m1.fctw")));
  EXPECT_EQ(slurp(path("links0.csv")), slurp(path("links1.csv")));
  EXPECT_EQ(slurp(path("part0.tsv")), slurp(path("part1.tsv")));
  EXPECT_EQ(slurp(path("rep0.txt")), slurp(path("rep1.txt")));
  EXPECT_EQ(slurp(path("rep0.txt.csv")), slurp(path("rep1.txt.csv")));

  // sweep and roc run and write their tables
  ASSERT_EQ(run_cli("sweep --links " + path("links0.csv") + " --labels " + labels +
                    " --tau-grid 0.1:0.9:0.1 --out " + path("sweep.csv")),
            0);
  auto sweep_text = slurp(path("sweep.csv"));
  EXPECT_EQ(std::count(sweep_text.begin(), sweep_text.end(), '\n'), 10);  // header + 9
  ASSERT_EQ(run_cli("roc --links " + path("links0.csv") + " --labels " + labels +
                    " --top-k 8 --out " + path("roc.csv")),
            0);
  EXPECT_NE(slurp(path("roc.csv")).find("threshold,fpr,tpr"), std::string::npos);
}

TEST_F(Pipeline, CliGenDataAcceptsJsonConfigWithFlagOverrides) {
  std::string cfg_path = path("gen.json");
  {
    std::ofstream out(cfg_path);
    out << R"({"identities": 4, "samples_min": 5, "samples_max": 5,)"
        << R"( "dim": 8, "sigma_clean": 0.05, "sigma_hard": 0.1,)"
        << R"( "rho": 0.0, "seed": 21})";
  }
  ASSERT_EQ(run_cli("gen-data --config " + cfg_path + " --seed 22 --out " +
                    path("c.fctf") + " --labels " + path("c.fctl")),
            0);
  auto store = facet::load_features(path("c.fctf"));
  EXPECT_EQ(store.dim, 8u);
  EXPECT_EQ(store.count, 20u);

  // flag override of the seed must change the draws
  ASSERT_EQ(run_cli("gen-data --config " + cfg_path + " --out " + path("d.fctf") +
                    " --labels " + path("d.fctl")),
            0);
  EXPECT_NE(slurp(path("c.fctf")), slurp(path("d.fctf")));
}

TEST_F(Pipeline, CliExitCodesMatchErrorClasses) {
  // usage error: unknown subcommand / missing required flag
  EXPECT_EQ(run_cli("no-such-command"), 1);
  EXPECT_EQ(run_cli("build-knn --hop1 4"), 1);

  // format error: garbage input file
  {
    std::ofstream out(path("junk.fctf"), std::ios::binary);
    out << "this is not a feature file";
  }
  EXPECT_EQ(run_cli("build-knn --features " + path("junk.fctf") + " --hop1 2" +
                    " --hop2 1 --out " + path("g.fctg")),
            2);

  // usage error: hop1 too large for the store
  auto store = easy_store(9);
  facet::save_features(store, path("small.fctf"));
  EXPECT_EQ(run_cli("build-knn --features " + path("small.fctf") +
                    " --hop1 100 --hop2 3 --out " + path("g.fctg")),
            1);
}

TEST_F(Pipeline, CliAblateWritesFourRowTable) {
  auto store = easy_store(31);
  facet::save_features(store, path("a.fctf"));
  facet::save_labels(store.labels, path("a.fctl"));
  ASSERT_EQ(run_cli("ablate --features " + path("a.fctf") + " --labels " +
                    path("a.fctl") + " --hop1 6 --hop2 2 --epochs 2 --batch-size 8" +
                    " --lr 0.002 --warmup-steps 5 --heads 2 --head-dim 8 --depth 1" +
                    " --dropout 0.1 --seed 3 --tau-grid 0.3:0.7:0.2 --out " +
                    path("ablation.csv")),
            0);
  auto table = slurp(path("ablation.csv"));
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);  // header + 4 variants
  EXPECT_NE(table.find("naive,"), std::string::npos);
  EXPECT_NE(table.find("only_re,"), std::string::npos);
  EXPECT_NE(table.find("only_lp,"), std::string::npos);
  EXPECT_NE(table.find("full,"), std::string::npos);
}
