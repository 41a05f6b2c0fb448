#include <numeric>

#include "doctest.h"
#include "pen/checkpoint.hpp"
#include "pen/error.hpp"
#include "support.hpp"

using namespace pen;

namespace {

Mat<float> random_points(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  Mat<float> p(3, n);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

template <typename T>
bool same_params(const PenParams<T>& a, const PenParams<T>& b) {
  const auto ta = tensors(a), tb = tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name || ta[i].tensor->rows() != tb[i].tensor->rows() ||
        ta[i].tensor->cols() != tb[i].tensor->cols())
      return false;
    if (std::memcmp(ta[i].tensor->data(), tb[i].tensor->data(), sizeof(T) * ta[i].tensor->size()) != 0) return false;
  }
  return a.arch == b.arch;
}

}  // namespace

TEST_CASE("default architecture dimensions") {
  const ArchConfig a;
  CHECK(a.global_dim() == 1024);
  CHECK(a.embedding_dim() == 64);
  const auto p = PenParams<float>::init(a, 0);
  const Mat<float> pts = random_points(50, 1);
  const auto tr = forward(p, pts);
  CHECK(tr.global.size() == 1024);
  CHECK(tr.embedding.rows() == 64);
  CHECK(tr.embedding.cols() == 50);
}

TEST_CASE("global feature is permutation invariant and embeddings are equivariant") {
  const auto p = PenParams<float>::init(ArchConfig{}, 3);
  const Mat<float> pts = random_points(200, 2);
  std::vector<Eigen::Index> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  Mat<float> shuffled(3, 200);
  for (Eigen::Index i = 0; i < 200; ++i) shuffled.col(i) = pts.col(perm[i]);

  const auto a = forward(p, pts), b = forward(p, shuffled);
  CHECK(a.global == b.global);
  bool equivariant = true;
  for (Eigen::Index i = 0; i < 200; ++i) equivariant = equivariant && (b.embedding.col(i) == a.embedding.col(perm[i]));
  CHECK(equivariant);
  CHECK(global_feature(p, pts) == a.global);
}

TEST_CASE("embedding columns have unit norm") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = PenParams<float>::init(ArchConfig{}, seed);
    const auto e = forward(p, random_points(300, seed + 10)).embedding;
    const float worst = (e.colwise().norm().array() - 1.0f).abs().maxCoeff();
    CHECK(worst < 1e-6f);
  }
  // a degenerate cloud (all points equal) still yields unit columns
  const auto p = PenParams<double>::init(test::tiny_arch(), 1);
  const Mat<double> same = Mat<double>::Zero(3, 4);
  CHECK(((forward(p, same).embedding.colwise().norm().array() - 1.0).abs() < 1e-6).all());
}

TEST_CASE("init is deterministic and heads follow the architecture") {
  ArchConfig a = test::tiny_arch();
  a.num_tags = 3;
  a.num_labels = 4;
  a.ae_points = 5;
  const auto p = PenParams<float>::init(a, 9), q = PenParams<float>::init(a, 9);
  CHECK(same_params(p, q));
  CHECK(!same_params(p, PenParams<float>::init(a, 10)));
  CHECK(p.tag_head.back().out() == 3);
  CHECK(p.seg_head.back().out() == 4);
  CHECK(p.ae_decoder.back().out() == 15);
  auto r = p;
  r.drop_ae_decoder();
  CHECK(r.ae_decoder.empty());
  r.reset_seg_head(2, 0);
  CHECK(r.seg_head.back().out() == 2);
  CHECK(r.arch.num_labels == 2);

  ArchConfig bad;
  bad.point_widths = {};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ArchConfig{};
  bad.lift_widths = {0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  ArchConfig a = test::tiny_arch();
  a.num_labels = 3;
  a.ae_points = 4;
  const auto pf = PenParams<float>::init(a, 5);
  const auto lf = decode_checkpoint<float>(encode_checkpoint(pf, {{"variant", "x"}}));
  CHECK(same_params(pf, lf.params));
  CHECK(lf.manifest["variant"] == "x");
  const auto pd = PenParams<double>::init(ArchConfig{}, 6);
  CHECK(same_params(pd, decode_checkpoint<double>(encode_checkpoint(pd)).params));
  // encoding is deterministic
  CHECK(encode_checkpoint(pf) == encode_checkpoint(pf));
}

TEST_CASE("checkpoint decoding rejects corrupt input") {
  const std::string good = encode_checkpoint(PenParams<float>::init(test::tiny_arch(), 1));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint<float>(bad_magic), SchemaError);
  CHECK_THROWS_AS(decode_checkpoint<float>(good.substr(0, good.size() - 3)), SchemaError);
  CHECK_THROWS_AS(decode_checkpoint<float>(good + "x"), SchemaError);
  std::string bad_version = good;
  bad_version[8] = 9;
  CHECK_THROWS_AS(decode_checkpoint<float>(bad_version), SchemaError);
  CHECK_THROWS_AS(load_checkpoint<float>("/nonexistent/model.ckpt"), IoError);
}

TEST_CASE("backward validates trace shapes") {
  const auto p = PenParams<double>::init(test::tiny_arch(), 2);
  const Mat<double> pts = Mat<double>::Random(3, 6);
  const auto tr = forward(p, pts);
  auto g = PenParams<double>::zeros_like(p);
  const Mat<double> wrong = Mat<double>::Zero(4, 5);
  CHECK_THROWS_AS(backward(p, tr, &wrong, static_cast<const Vec<double>*>(nullptr), g), InputError);
}
