// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch_amalgamated.hpp>

#include <filesystem>

#include "grad_check.hpp"
#include "phonefix/nn/adam.hpp"
#include "phonefix/nn/checkpoint.hpp"
#include "phonefix/nn/gru.hpp"
#include "phonefix/nn/layers.hpp"

using namespace phonefix;
using phonefix::testing::DirectionalGradCheck;
using phonefix::testing::RandomMat;

namespace {

// Direct definition of a "same"-padded strided convolution.
MatD NaiveConv(const MatD& x, const MatD& w, const MatD& b, int k, int stride) {
  const int cin = static_cast<int>(x.cols());
  const int pad = (k - 1) / 2;
  const int len = static_cast<int>(x.rows());
  const int out_len = (len + 2 * pad - k) / stride + 1;
  MatD y(out_len, w.cols());
  for (int t = 0; t < out_len; ++t) {
    for (int o = 0; o < w.cols(); ++o) {
      double s = b(0, o);
      for (int j = 0; j < k; ++j) {
        const int src = t * stride + j - pad;
        if (src < 0 || src >= len) continue;
        for (int c = 0; c < cin; ++c) s += x(src, c) * w(j * cin + c, o);
      }
      y(t, o) = s;
    }
  }
  return y;
}

struct ConvNet {
  nn::Conv1d<double> conv;
  nn::PRelu<double> act;
  nn::TensorList<double> tensors() {
    nn::TensorList<double> t;
    conv.AppendTensors("conv", t);
    act.AppendTensors("act", t);
    return t;
  }
};

}  // namespace

TEST_CASE("conv matches the direct definition batch by batch", "[nn]") {
  std::mt19937_64 rng(1);
  for (int stride : {1, 2}) {
    nn::Conv1d<double> conv;
    conv.Init(3, 5, 3, stride, rng);
    const int batch = 2;
    const int len = 8;
    MatD x = RandomMat(batch * len, 3, rng);
    MatD y = conv.Forward(x, batch, len, nullptr);
    const int out_len = conv.OutLength(len);
    REQUIRE(out_len == (stride == 1 ? 8 : 4));
    for (int b = 0; b < batch; ++b) {
      MatD ref = NaiveConv(x.middleRows(b * len, len), conv.w, conv.b, 3, stride);
      CHECK((y.middleRows(b * out_len, out_len) - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("conv + prelu + upsample gradients", "[nn][grad]") {
  std::mt19937_64 rng(2);
  for (int stride : {1, 2}) {
    ConvNet net;
    net.conv.Init(4, 3, 3, stride, rng);
    net.act.Init(3);
    const int batch = 2;
    const int len = 8;
    MatD x = RandomMat(batch * len, 4, rng);
    const int out_len = net.conv.OutLength(len);
    MatD r = RandomMat(batch * 2 * out_len, 3, rng);
    auto loss = [&]() {
      MatD pre = net.conv.Forward(x, batch, len, nullptr);
      MatD up = nn::ZeroStuff2(net.act.Forward(pre), batch, out_len);
      return up.cwiseProduct(r).sum();
    };
    ConvNet grad = nn::ZerosLike(net);
    nn::Conv1d<double>::Cache cache;
    MatD pre = net.conv.Forward(x, batch, len, &cache);
    MatD dpost = nn::ZeroStuff2Backward(r, batch, out_len);
    MatD dpre = net.act.Backward(dpost, pre, grad.act);
    MatD dx = net.conv.Backward(dpre, cache, grad.conv);
    CHECK(DirectionalGradCheck(net.tensors(), grad.tensors(), loss, 20, 7) < 1e-6);

    // Input gradient along one coordinate.
    const double eps = 1e-6;
    x(3, 1) += eps;
    const double plus = loss();
    x(3, 1) -= 2 * eps;
    const double minus = loss();
    x(3, 1) += eps;
    CHECK(phonefix::testing::RelErr(dx(3, 1), (plus - minus) / (2 * eps)) < 1e-6);
  }
}

TEST_CASE("prelu starts at 0.25", "[nn]") {
  nn::PRelu<float> act;
  act.Init(2);
  MatF x(1, 2);
  x << -4.0f, 3.0f;
  MatF y = act.Forward(x);
  CHECK(y(0, 0) == -1.0f);
  CHECK(y(0, 1) == 3.0f);
}

TEST_CASE("GRU step matches the gate equations", "[nn][gru]") {
  std::mt19937_64 rng(3);
  nn::Gru<double> gru;
  gru.Init(2, 3, rng);
  MatD x = RandomMat(1, 2, rng);
  MatD h = gru.Forward({&x}, false, nullptr);
  // One step from h0 = 0.
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int j = 0; j < 3; ++j) {
    double ar = gru.bi(0, j) + gru.bh(0, j);
    double az = gru.bi(0, 3 + j) + gru.bh(0, 3 + j);
    double an = gru.bi(0, 6 + j);
    for (int i = 0; i < 2; ++i) {
      ar += x(0, i) * gru.wi(i, j);
      az += x(0, i) * gru.wi(i, 3 + j);
      an += x(0, i) * gru.wi(i, 6 + j);
    }
    const double r = sig(ar);
    const double z = sig(az);
    const double n = std::tanh(an + r * gru.bh(0, 6 + j));
    CHECK(h(0, j) == Catch::Approx((1 - z) * n).epsilon(1e-12));
  }
}

TEST_CASE("GRU handles ragged batches like separate runs", "[nn][gru]") {
  std::mt19937_64 rng(4);
  nn::Gru<double> gru;
  gru.Init(3, 4, rng);
  MatD a = RandomMat(5, 3, rng);
  MatD b = RandomMat(2, 3, rng);
  for (bool reverse : {false, true}) {
    MatD both = gru.Forward({&a, &b}, reverse, nullptr);
    MatD only_a = gru.Forward({&a}, reverse, nullptr);
    MatD only_b = gru.Forward({&b}, reverse, nullptr);
    CHECK((both.row(0) - only_a.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((both.row(1) - only_b.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
  MatD rev = a.colwise().reverse();
  MatD fwd = gru.Forward({&a}, true, nullptr);
  MatD ref = gru.Forward({&rev}, false, nullptr);
  CHECK((fwd - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("GRU gradients on a ragged batch", "[nn][gru][grad]") {
  std::mt19937_64 rng(5);
  struct Net {
    nn::Gru<double> gru;
    nn::TensorList<double> tensors() {
      nn::TensorList<double> t;
      gru.AppendTensors("gru", t);
      return t;
    }
  } net;
  net.gru.Init(3, 4, rng);
  MatD a = RandomMat(6, 3, rng);
  MatD b = RandomMat(3, 3, rng);
  MatD r = RandomMat(2, 4, rng);
  for (bool reverse : {false, true}) {
    auto loss = [&]() { return net.gru.Forward({&a, &b}, reverse, nullptr).cwiseProduct(r).sum(); };
    Net grad = nn::ZerosLike(net);
    nn::Gru<double>::Cache cache;
    net.gru.Forward({&a, &b}, reverse, &cache);
    auto dx = net.gru.Backward(r, cache, grad.gru);
    CHECK(DirectionalGradCheck(net.tensors(), grad.tensors(), loss, 20, 11) < 1e-6);
    REQUIRE(dx.size() == 2);
    CHECK(dx[1].rows() == 3);
    const double eps = 1e-6;
    b(1, 2) += eps;
    const double plus = loss();
    b(1, 2) -= 2 * eps;
    const double minus = loss();
    b(1, 2) += eps;
    CHECK(phonefix::testing::RelErr(dx[1](1, 2), (plus - minus) / (2 * eps)) < 1e-6);
  }
}

TEST_CASE("Adam first step moves each weight by the learning rate", "[nn][adam]") {
  MatD w(1, 3);
  w << 1.0, -2.0, 0.5;
  MatD g(1, 3);
  g << 0.3, -7.0, 1e-3;
  nn::Adam<double> adam({0.01, 0.9, 0.999, 1e-8});
  adam.Step({{"w", &w}}, {{"g", &g}});
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  CHECK(w(0, 0) == Catch::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(w(0, 1) == Catch::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(w(0, 2) == Catch::Approx(0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-9));
}

TEST_CASE("Adam minimizes a quadratic", "[nn][adam]") {
  MatD w = MatD::Constant(1, 4, 3.0);
  nn::Adam<double> adam({0.05});
  for (int i = 0; i < 2000; ++i) {
    MatD g = 2.0 * (w.array() - 1.0).matrix();
    adam.Step({{"w", &w}}, {{"g", &g}});
  }
  CHECK((w.array() - 1.0).abs().maxCoeff() < 1e-2);
}

TEST_CASE("checkpoint round trip and shape checks", "[nn][checkpoint]") {
  const auto dir = std::filesystem::temp_directory_path() / "phonefix_ckpt_nn";
  std::filesystem::remove_all(dir);
  std::mt19937_64 rng(6);
  MatF a = RandomMat(3, 4, rng).cast<float>();
  MatF b = RandomMat(1, 2, rng).cast<float>();
  nn::SaveCheckpoint<float>(dir, {{"hello", 1}}, {{"a", &a}, {"b", &b}});
  CHECK(nn::LoadCheckpointConfig(dir)["hello"] == 1);
  MatF a2(3, 4), b2(1, 2);
  nn::LoadCheckpointWeights<float>(dir, {{"a", &a2}, {"b", &b2}});
  CHECK(a2 == a);
  CHECK(b2 == b);
  CHECK(std::filesystem::file_size(dir / "weights.bin") == 14 * sizeof(float));
  MatF wrong(4, 3);
  CHECK_THROWS_AS(nn::LoadCheckpointWeights<float>(dir, {{"a", &wrong}, {"b", &b2}}), Error);
  CHECK_THROWS_AS(nn::LoadCheckpointWeights<float>(dir, {{"b", &b2}, {"a", &a2}}), Error);
  CHECK_THROWS_AS(nn::LoadCheckpointConfig(dir / "absent"), Error);
}
