#include "gradcheck.hpp"
#include "oracles.hpp"

#include "scl/errors.hpp"
#include "scl/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <fstream>
#include <random>
#include <set>

using namespace scl;

namespace {

const ToyDims kDims{4, 4, 3, 3};

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

}  // namespace

TEST_CASE("generate_synthetic") {
  SUBCASE("singletons") {
    const auto d = generate_synthetic(10, kDims, parse_groups("1:10"), 0.1, 1);
    REQUIRE(d.size() == 10);
    std::set<int> groups(d.group.begin(), d.group.end());
    CHECK(groups.size() == 10);
    CHECK(d.video[0].rows() == 3);
    CHECK(d.video[0].cols() == 4);
  }
  SUBCASE("duplicate groups share identical text") {
    const auto d = generate_synthetic(30, kDims, parse_groups("3:10"), 0.1, 2);
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < d.size(); ++i) members[d.group[i]].push_back(i);
    CHECK(members.size() == 10);
    for (const auto& [g, ids] : members) {
      REQUIRE(ids.size() == 3);
      CHECK(d.text[ids[0]] == d.text[ids[1]]);
      CHECK(d.text[ids[0]] == d.text[ids[2]]);
      CHECK(d.video[ids[0]] != d.video[ids[1]]);
    }
  }
  SUBCASE("noise-free video is a function of text") {
    const auto d = generate_synthetic(6, kDims, parse_groups("2:3"), 0.0, 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (d.group[i] == d.group[j]) CHECK(d.video[i] == d.video[j]);
      }
    }
  }
  SUBCASE("determinism and persistence") {
    const auto a = generate_synthetic(12, kDims, parse_groups("2:3,1:6"), 0.2, 9);
    const auto b = generate_synthetic(12, kDims, parse_groups("2:3,1:6"), 0.2, 9);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(a.video[i] == b.video[i]);
      CHECK(a.text[i] == b.text[i]);
    }
    CHECK(a.group == b.group);
    const auto dir = std::filesystem::temp_directory_path() / "scl_test_dataset";
    std::filesystem::remove_all(dir);
    write_dataset(a, dir);
    const auto c = read_dataset(dir);
    CHECK(c.group == a.group);
    for (std::size_t i = 0; i < 12; ++i) CHECK(c.video[i] == a.video[i]);
  }
  SUBCASE("inconsistent group spec") {
    CHECK_THROWS_AS(generate_synthetic(10, kDims, parse_groups("3:3"), 0.1, 1), UsageError);
    CHECK_THROWS_AS(parse_groups("3-10"), UsageError);
    CHECK_THROWS_AS(parse_dims("4,4,3"), UsageError);
  }
}

TEST_CASE("encode") {
  std::mt19937_64 rng(4);
  DualEncoder enc = init_encoder(4, kDims, 1);
  enc.video_proj = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd x = oracle::random_matrix(3, 4, rng);
  CHECK(encode(enc, x, Modality::video).features == x);
  CHECK(encode(enc, Eigen::MatrixXd::Zero(3, 4), Modality::text).features.isZero());

  const DualEncoder r = init_encoder(5, kDims, 2);
  const auto f = encode(r, x, Modality::text, 7);
  CHECK(f.sample_id == 7);
  CHECK(f.modality == Modality::text);
  CHECK((f.features - oracle::project(x, r.text_proj)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("contrastive loss analytics") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 1, 0.3);
  CHECK(contrastive_loss(one, one, 0.07) == 0.0);

  for (const int b : {2, 5, 16}) {
    const Eigen::MatrixXd u = Eigen::MatrixXd::Constant(b, b, 0.42);
    CHECK(std::abs(contrastive_loss(u, u, 0.07) - std::log(double(b))) <= 1e-9);
  }

  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd s1 = oracle::random_matrix(6, 6, rng);
    const Eigen::MatrixXd s2 = oracle::random_matrix(6, 6, rng);
    const double loss = contrastive_loss(s1, s2, 0.07);
    CHECK(std::abs(loss - double(oracle::contrastive_loss(s1, s2, 0.07L))) <= 1e-10);
    CHECK(loss > 0.0);
    CHECK(std::abs(contrastive_loss(s1, s2, 0.14) - contrastive_loss(s1 / 2.0, s2 / 2.0, 0.07)) <= 1e-12);
    const auto g = contrastive_loss_grads(s1, s2, std::log(0.07));
    CHECK(g.loss == doctest::Approx(loss).epsilon(1e-13));
  }

  CHECK_THROWS_AS(contrastive_loss(one, one, 0.0), UsageError);
  CHECK_THROWS_AS(contrastive_loss(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3), 0.1), UsageError);
}

TEST_CASE("loss_and_grads matches finite differences") {
  const auto ids = iota_ids(3);
  for (const Aggregation mode : {Aggregation::cls, Aggregation::mean, Aggregation::cico}) {
    CAPTURE(to_string(mode));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto data = generate_synthetic(3, kDims, parse_groups("1:3"), 0.5, 100 + seed);
      DualEncoder enc = init_encoder(4, kDims, seed);
      enc.log_tau = std::log(0.1 + 0.05 * double(seed));
      CHECK(gradcheck::relative_error(enc, ids, data, mode) < 1e-4);
    }
  }
}

TEST_CASE("temperature gradient vanishes when every logit is equal") {
  const Eigen::MatrixXd u = Eigen::MatrixXd::Constant(4, 4, 0.5);
  const auto g = contrastive_loss_grads(u, u, std::log(0.07));
  CHECK(std::abs(g.d_log_tau) <= 1e-12);
}

TEST_CASE("train_reference") {
  const auto data = generate_synthetic(32, kDims, parse_groups("1:32"), 0.0, 11);

  SUBCASE("zero epochs keeps only the initial snapshot") {
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto r = train_reference(data, cfg);
    CHECK(r.series.checkpoints == std::vector<int>{0});
    CHECK(r.log.empty());
  }

  SUBCASE("loss decreases on noise-free data") {
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 8;
    cfg.seed = 3;
    const auto r = train_reference(data, cfg);
    REQUIRE(r.log.size() == 30);
    CHECK(r.log.back().loss < r.log.front().loss);
    CHECK(r.encoder.tau() > 0.0);
    CHECK_FALSE(r.log.front().alpha.has_value());
  }

  SUBCASE("checkpoint schedule") {
    CHECK(checkpoint_schedule(80, 5).size() == 17);
    CHECK(checkpoint_schedule(80, 5).back() == 80);
    CHECK(checkpoint_schedule(12, 5) == std::vector<int>{0, 5, 10, 12});
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.checkpoint_interval = 5;
    const auto r = train_reference(data, cfg);
    CHECK(r.series.checkpoints == std::vector<int>{0, 5, 10, 12});
    CHECK(r.series.snapshots.size() == 4);
    validate(r.series);
  }

  SUBCASE("runs reproduce") {
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 8;
    const auto a = train_reference(data, cfg);
    const auto b = train_reference(data, cfg);
    CHECK(a.encoder.video_proj == b.encoder.video_proj);
    CHECK(format_loss_log(a.log) == format_loss_log(b.log));
  }

  SUBCASE("freeze_text leaves the text projection untouched") {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.freeze_text = true;
    const auto r = train_reference(data, cfg);
    CHECK(r.encoder.text_proj == init_encoder(cfg.embed_dim, kDims, cfg.seed).text_proj);
  }

  SUBCASE("an absurd step size diverges") {
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 1e8;
    CHECK_THROWS_AS(train_reference(data, cfg), DivergenceError);
  }

  SUBCASE("invalid config") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train_reference(data, cfg), UsageError);
  }
}

TEST_CASE("train_selective") {
  const auto data = generate_synthetic(24, kDims, parse_groups("2:4,1:16"), 0.1, 12);
  std::mt19937_64 rng(12);
  DeltaMatrix delta{oracle::random_matrix(24, 24, rng)};
  delta.values.diagonal().setZero();

  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 5;
  cfg.checkpoint_interval = 2;

  const auto hard = plan_epochs({ScheduleKind::hard_only, 6}, delta, 5, 1);
  const auto easy = plan_epochs({ScheduleKind::easy_only, 6}, delta, 5, 1);
  const auto rh = train_selective(data, cfg, hard);
  const auto re = train_selective(data, cfg, easy);
  REQUIRE(rh.log.size() == 6);
  for (std::size_t e = 0; e < 6; ++e) {
    double sum = 0.0;
    for (const auto& b : hard[e].batches) sum += batch_score(b.ids, delta);
    CHECK(*rh.log[e].mean_batch_score == doctest::Approx(sum / double(hard[e].batches.size())));
    CHECK(*rh.log[e].alpha == 1.0);
    CHECK(*rh.log[e].mean_batch_score >= *re.log[e].mean_batch_score);
  }
  CHECK(rh.series.checkpoints == std::vector<int>{0, 2, 4, 6});

  const auto log_path = std::filesystem::temp_directory_path() / "scl_test_loss.csv";
  {
    std::ofstream(log_path) << format_loss_log(rh.log);
  }
  const auto back = read_loss_log(log_path);
  REQUIRE(back.size() == rh.log.size());
  CHECK(back[2].loss == rh.log[2].loss);
  CHECK(*back[2].mean_batch_score == *rh.log[2].mean_batch_score);

  SUBCASE("plans must cover every epoch and id") {
    CHECK_THROWS_AS(train_selective(data, cfg, std::span(hard).first(3)), FormatError);
    auto broken = hard;
    broken[0].batches.pop_back();
    CHECK_THROWS_AS(train_selective(data, cfg, broken), FormatError);
  }
}

TEST_CASE("encoder persistence") {
  const DualEncoder enc = init_encoder(3, kDims, 4);
  const auto path = std::filesystem::temp_directory_path() / "scl_test_encoder.json";
  write_encoder(enc, path);
  const DualEncoder back = read_encoder(path);
  CHECK(back.video_proj == enc.video_proj);
  CHECK(back.text_proj == enc.text_proj);
  CHECK(back.log_tau == enc.log_tau);
}
