#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "svbrdf/gradcheck.hpp"
#include "svbrdf/rng.hpp"
#include "svbrdf/tensor.hpp"

using namespace svbrdf;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (real& v : t.data) v = real(rng.uniform(lo, hi));
  return t;
}

// Direct quadruple-loop convolution with the documented same-padding:
// (K-1)/2 zeros before, K-1-that after, out = (n-1)/stride + 1.
Tensor conv_oracle(const Tensor& x, const Tensor& w, int stride) {
  int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  int k = w.dim(0), cout = w.dim(3);
  int pad = (k - 1) / 2;
  int oh = (h - 1) / stride + 1, ow = (wd - 1) / stride + 1;
  Tensor out({oh, ow, cout});
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx)
            for (int ci = 0; ci < cin; ++ci) {
              int iy = oy * stride - pad + ky;
              int ix = ox * stride - pad + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              acc += double(x.data[size_t((iy * wd + ix) * cin + ci)]) *
                     double(w.data[size_t(((ky * k + kx) * cin + ci) * cout + co)]);
            }
        out.data[size_t((oy * ow + ox) * cout + co)] = real(acc);
      }
  return out;
}

}  // namespace

TEST_CASE("a unit 1x1 kernel convolution is the identity") {
  Rng rng(1);
  Tensor x = random_tensor({5, 4, 1}, rng);
  Tensor w({1, 1, 1, 1});
  w.data[0] = real(1);
  Tape tape;
  Tape::NodeId y = tape.conv2d(tape.input(x), tape.param(w), 1);
  const Tensor& out = tape.value(y);
  REQUIRE(out.shape == x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(out.data[i] == x.data[i]);
}

TEST_CASE("stride-2 convolution halves the spatial extent") {
  Rng rng(2);
  Tensor x = random_tensor({32, 32, 2}, rng);
  Tensor w = random_tensor({4, 4, 2, 3}, rng);
  Tape tape;
  Tape::NodeId y = tape.conv2d(tape.input(x), tape.param(w), 2);
  CHECK(tape.value(y).shape == std::vector<int>({16, 16, 3}));
}

TEST_CASE("odd input sizes round up under stride 2") {
  Rng rng(3);
  Tensor x = random_tensor({5, 7, 1}, rng);
  Tensor w = random_tensor({4, 4, 1, 1}, rng);
  Tape tape;
  Tape::NodeId y = tape.conv2d(tape.input(x), tape.param(w), 2);
  CHECK(tape.value(y).shape == std::vector<int>({3, 4, 1}));
}

TEST_CASE("convolution matches the quadruple-loop oracle on every small shape") {
  Rng rng(4);
  for (int h = 1; h <= 8; ++h)
    for (int w = 1; w <= 8; w += (h > 4 ? 3 : 1))
      for (int cin = 1; cin <= 3; ++cin)
        for (int cout = 1; cout <= 4; cout += 2)
          for (int k = 1; k <= 4; ++k)
            for (int stride : {1, 2}) {
              Tensor x = random_tensor({h, w, cin}, rng);
              Tensor wt = random_tensor({k, k, cin, cout}, rng);
              Tape tape;
              Tape::NodeId y =
                  tape.conv2d(tape.input(x), tape.param(wt), stride);
              Tensor expect = conv_oracle(x, wt, stride);
              const Tensor& got = tape.value(y);
              CAPTURE(h);
              CAPTURE(w);
              CAPTURE(cin);
              CAPTURE(cout);
              CAPTURE(k);
              CAPTURE(stride);
              REQUIRE(got.shape == expect.shape);
              for (size_t i = 0; i < got.data.size(); ++i)
                CHECK(double(got.data[i]) ==
                      doctest::Approx(double(expect.data[i])).epsilon(1e-5));
            }
}

TEST_CASE("convolution rejects channel disagreement") {
  Rng rng(5);
  Tensor x = random_tensor({4, 4, 2}, rng);
  Tensor w = random_tensor({3, 3, 3, 1}, rng);
  Tape tape;
  Tape::NodeId xi = tape.input(x), wi = tape.param(w);
  CHECK_THROWS(tape.conv2d(xi, wi, 1));
}

TEST_CASE("channel bias broadcasts over the spatial axes") {
  Rng rng(6);
  Tensor x = random_tensor({3, 2, 4}, rng);
  Tensor b({4});
  for (int c = 0; c < 4; ++c) b.data[size_t(c)] = real(0.1 * (c + 1));
  Tape tape;
  Tape::NodeId y = tape.add_channel_bias(tape.input(x), tape.param(b));
  const Tensor& out = tape.value(y);
  for (int p = 0; p < 6; ++p)
    for (int c = 0; c < 4; ++c)
      CHECK(double(out.data[size_t(p * 4 + c)]) ==
            doctest::Approx(double(x.data[size_t(p * 4 + c)]) + 0.1 * (c + 1))
                .epsilon(1e-6));
}

TEST_CASE("instance norm flattens a constant channel and reports its mean") {
  Tensor x({4, 4, 2});
  for (int p = 0; p < 16; ++p) {
    x.data[size_t(p * 2 + 0)] = real(3.25);
    x.data[size_t(p * 2 + 1)] = real(-1.5);
  }
  Tape tape;
  Tape::NodeId xi = tape.input(x);
  Tape::NodeId y = tape.instance_norm(xi);
  Tape::NodeId m = tape.channel_means(xi);
  for (real v : tape.value(y).data) CHECK(double(v) == doctest::Approx(0.0));
  CHECK(double(tape.value(m).data[0]) == doctest::Approx(3.25).epsilon(1e-6));
  CHECK(double(tape.value(m).data[1]) == doctest::Approx(-1.5).epsilon(1e-6));
}

TEST_CASE("instance norm standardizes each channel with the biased variance") {
  Rng rng(7);
  Tensor x = random_tensor({6, 5, 3}, rng, -1.0, 1.0);
  Tape tape;
  Tape::NodeId y = tape.instance_norm(tape.input(x));
  const Tensor& out = tape.value(y);
  const int n = 30;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (int p = 0; p < n; ++p) mean += double(x.data[size_t(p * 3 + c)]);
    mean /= n;
    for (int p = 0; p < n; ++p) {
      double d = double(x.data[size_t(p * 3 + c)]) - mean;
      var += d * d;
    }
    var /= n;  // biased estimator
    double inv = 1.0 / std::sqrt(var + 1e-5);
    double omean = 0.0, ovar = 0.0;
    for (int p = 0; p < n; ++p) {
      double expect = (double(x.data[size_t(p * 3 + c)]) - mean) * inv;
      CHECK(double(out.data[size_t(p * 3 + c)]) ==
            doctest::Approx(expect).epsilon(1e-5));
      omean += double(out.data[size_t(p * 3 + c)]);
      ovar += double(out.data[size_t(p * 3 + c)]) *
              double(out.data[size_t(p * 3 + c)]);
    }
    CHECK(std::abs(omean / n) < 1e-5);
    CHECK(ovar / n == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("activation values hit their reference points") {
  Tensor x({1, 1, 6});
  double in[6] = {-1.0, 0.0, 2.0, 1.0, -2.0, 1e-7};
  for (int i = 0; i < 6; ++i) x.data[size_t(i)] = real(in[i]);

  Tape tape;
  const Tensor& leaky =
      tape.value(tape.activation(tape.input(x), ActKind::leaky_relu));
  CHECK(double(leaky.data[0]) == doctest::Approx(-0.2).epsilon(1e-6));
  CHECK(double(leaky.data[1]) == doctest::Approx(0.0));
  CHECK(double(leaky.data[2]) == doctest::Approx(2.0));
  CHECK(double(leaky.data[4]) == doctest::Approx(-0.4).epsilon(1e-6));

  const Tensor& sig =
      tape.value(tape.activation(tape.input(x), ActKind::sigmoid));
  CHECK(double(sig.data[1]) == doctest::Approx(0.5));
  CHECK(double(sig.data[2]) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));

  const Tensor& selu = tape.value(tape.activation(tape.input(x), ActKind::selu));
  CHECK(double(selu.data[1]) == doctest::Approx(0.0));
  CHECK(double(selu.data[3]) == doctest::Approx(kSeluLambda).epsilon(1e-6));
  CHECK(double(selu.data[0]) ==
        doctest::Approx(kSeluLambda * kSeluAlpha * (std::exp(-1.0) - 1.0))
            .epsilon(1e-6));
  // Continuity at zero: both branches meet.
  CHECK(std::abs(double(selu.data[5])) < 1e-5);
}

TEST_CASE("nearest upsampling replicates pixels into 2x2 blocks") {
  Tensor x({1, 1, 1});
  x.data[0] = real(0.7);
  Tape tape;
  const Tensor& up = tape.value(tape.nearest_upsample2x(tape.input(x)));
  REQUIRE(up.shape == std::vector<int>({2, 2, 1}));
  for (real v : up.data) CHECK(double(v) == doctest::Approx(0.7));
}

TEST_CASE("upsampling then subsampling at the origin is the identity") {
  Rng rng(8);
  Tensor x = random_tensor({3, 4, 2}, rng);
  Tape tape;
  const Tensor& up = tape.value(tape.nearest_upsample2x(tape.input(x)));
  REQUIRE(up.shape == std::vector<int>({6, 8, 2}));
  for (int y = 0; y < 3; ++y)
    for (int xx = 0; xx < 4; ++xx)
      for (int c = 0; c < 2; ++c)
        CHECK(up.data[size_t(((2 * y) * 8 + 2 * xx) * 2 + c)] ==
              x.data[size_t((y * 4 + xx) * 2 + c)]);
}

TEST_CASE("upsampling backward accumulates each 2x2 block") {
  Rng rng(9);
  Tensor x = random_tensor({3, 3, 2}, rng);
  Tape tape;
  Tape::NodeId xi = tape.input(x);
  Tape::NodeId loss = tape.sum(tape.nearest_upsample2x(xi));
  tape.backward(loss);
  for (real v : tape.grad(xi).data) CHECK(double(v) == doctest::Approx(4.0));
}

TEST_CASE("fully connected layer is an affine map") {
  Tensor x({3});
  x.data = {real(0.5), real(-1.0), real(2.0)};
  Tensor w({3, 3});  // identity
  for (int i = 0; i < 3; ++i) w.data[size_t(i * 3 + i)] = real(1);
  Tensor b({3});
  Tape tape;
  const Tensor& y =
      tape.value(tape.fully_connected(tape.input(x), tape.param(w), tape.param(b)));
  for (int i = 0; i < 3; ++i) CHECK(y.data[size_t(i)] == x.data[size_t(i)]);

  Tensor zero({3});
  Tensor b2({2});
  b2.data = {real(0.3), real(-0.7)};
  Rng rng(10);
  Tensor w2 = random_tensor({2, 3}, rng);
  Tape tape2;
  const Tensor& y2 = tape2.value(
      tape2.fully_connected(tape2.input(zero), tape2.param(w2), tape2.param(b2)));
  CHECK(double(y2.data[0]) == doctest::Approx(0.3));
  CHECK(double(y2.data[1]) == doctest::Approx(-0.7));
}

TEST_CASE("fully connected weight gradient is the outer product") {
  Rng rng(11);
  Tensor x = random_tensor({4}, rng);
  Tensor w = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3}, rng);
  Tape tape;
  Tape::NodeId wi = tape.param(w), bi = tape.param(b);
  Tape::NodeId loss = tape.sum(tape.fully_connected(tape.input(x), wi, bi));
  tape.backward(loss);
  // d sum(Wx+b) / dW[o][i] = x[i], d/db[o] = 1.
  const Tensor& gw = tape.grad(wi);
  for (int o = 0; o < 3; ++o)
    for (int i = 0; i < 4; ++i)
      CHECK(double(gw.data[size_t(o * 4 + i)]) ==
            doctest::Approx(double(x.data[size_t(i)])).epsilon(1e-5));
  for (real v : tape.grad(bi).data) CHECK(double(v) == doctest::Approx(1.0));
}

TEST_CASE("fully connected rejects dimension mismatch") {
  Rng rng(12);
  Tensor x = random_tensor({4}, rng);
  Tensor w = random_tensor({3, 5}, rng);
  Tensor b = random_tensor({3}, rng);
  Tape tape;
  Tape::NodeId xi = tape.input(x), wi = tape.param(w), bi = tape.param(b);
  CHECK_THROWS(tape.fully_connected(xi, wi, bi));
}

TEST_CASE("channel concatenation stacks along the channel axis") {
  Rng rng(13);
  Tensor a = random_tensor({2, 2, 2}, rng);
  Tensor b = random_tensor({2, 2, 1}, rng);
  Tape tape;
  Tape::NodeId ai = tape.input(a), bi = tape.input(b);
  Tape::NodeId y = tape.concat_channels(ai, bi);
  const Tensor& out = tape.value(y);
  REQUIRE(out.shape == std::vector<int>({2, 2, 3}));
  for (int p = 0; p < 4; ++p) {
    CHECK(out.data[size_t(p * 3 + 0)] == a.data[size_t(p * 2 + 0)]);
    CHECK(out.data[size_t(p * 3 + 1)] == a.data[size_t(p * 2 + 1)]);
    CHECK(out.data[size_t(p * 3 + 2)] == b.data[size_t(p)]);
  }
  Tape::NodeId loss = tape.sum(y);
  tape.backward(loss);
  for (real v : tape.grad(ai).data) CHECK(double(v) == doctest::Approx(1.0));
  for (real v : tape.grad(bi).data) CHECK(double(v) == doctest::Approx(1.0));

  Tensor c = random_tensor({3, 2, 1}, rng);
  Tape::NodeId ci = tape.input(c);
  CHECK_THROWS(tape.concat_channels(ai, ci));
}

TEST_CASE("vector concatenation preserves order") {
  Tensor a({2}), b({3});
  a.data = {real(1), real(2)};
  b.data = {real(3), real(4), real(5)};
  Tape tape;
  const Tensor& out = tape.value(tape.concat_vec(tape.input(a), tape.input(b)));
  REQUIRE(out.shape == std::vector<int>({5}));
  for (int i = 0; i < 5; ++i) CHECK(double(out.data[size_t(i)]) == i + 1.0);
}

TEST_CASE("dropout in eval mode and at p = 0 is the identity") {
  Rng rng(14);
  Tensor x = random_tensor({4, 4, 2}, rng);
  Rng dr1(100), dr2(101);
  Tape tape;
  const Tensor& ev =
      tape.value(tape.dropout(tape.input(x), 0.5, DropoutMode::eval, dr1));
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(ev.data[i] == x.data[i]);
  const Tensor& p0 =
      tape.value(tape.dropout(tape.input(x), 0.0, DropoutMode::train, dr2));
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(p0.data[i] == x.data[i]);
}

TEST_CASE("train dropout zeroes half the elements and rescales the rest") {
  Tensor x({100, 100, 10});
  for (real& v : x.data) v = real(1);
  Rng rng(15);
  Tape tape;
  const Tensor& out =
      tape.value(tape.dropout(tape.input(x), 0.5, DropoutMode::train, rng));
  int64_t survivors = 0;
  for (real v : out.data) {
    if (double(v) != 0.0) {
      CHECK(double(v) == doctest::Approx(2.0));  // 1/(1-p) rescale
      ++survivors;
    }
  }
  double fraction = double(survivors) / double(x.data.size());
  CHECK(std::abs(fraction - 0.5) < 0.01);
}

TEST_CASE("dropout replay with the same seed reproduces the mask") {
  Rng rng(16);
  Tensor x = random_tensor({8, 8, 4}, rng);
  Rng d1(77), d2(77);
  Tape t1, t2;
  const Tensor& a =
      t1.value(t1.dropout(t1.input(x), 0.5, DropoutMode::train, d1));
  const Tensor& b =
      t2.value(t2.dropout(t2.input(x), 0.5, DropoutMode::train, d2));
  for (size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("sum backward paints all-ones") {
  Rng rng(17);
  Tensor x = random_tensor({3, 3, 2}, rng);
  Tape tape;
  Tape::NodeId xi = tape.input(x);
  Tape::NodeId loss = tape.sum(xi);
  double expect = 0.0;
  for (real v : x.data) expect += double(v);
  CHECK(double(tape.value(loss).data[0]) == doctest::Approx(expect).epsilon(1e-5));
  tape.backward(loss);
  for (real v : tape.grad(xi).data) CHECK(double(v) == 1.0);
}

TEST_CASE("gradients of parameters the loss never touches stay zero") {
  Rng rng(18);
  Tensor x = random_tensor({2, 2, 1}, rng);
  Tensor unused = random_tensor({4, 4, 1, 1}, rng);
  Tape tape;
  Tape::NodeId xi = tape.input(x);
  Tape::NodeId orphan = tape.param(unused);
  Tape::NodeId loss = tape.sum(xi);
  tape.backward(loss);
  for (real v : tape.grad(orphan).data) CHECK(double(v) == 0.0);
}

TEST_CASE("backward rejects a non-scalar loss node") {
  Rng rng(19);
  Tensor x = random_tensor({2, 2, 2}, rng);
  Tape tape;
  Tape::NodeId xi = tape.input(x);
  CHECK_THROWS(tape.backward(xi));
}

TEST_CASE("every forward op rejects non-finite values") {
  Tensor x({2, 2, 1});
  x.data[2] = real(std::numeric_limits<double>::quiet_NaN());
  Tape tape;
  CHECK_THROWS(tape.input(x));
}

TEST_CASE("mse loss node value and gradient are the quadratic rule") {
  Rng rng(20);
  Tensor x = random_tensor({2, 2, 2}, rng);
  Tensor t = random_tensor({2, 2, 2}, rng);
  Tape tape;
  Tape::NodeId xi = tape.input(x);
  Tape::NodeId loss = tape.mse_loss_node(xi, t);
  double expect = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    double d = double(x.data[i]) - double(t.data[i]);
    expect += d * d;
  }
  expect /= double(x.data.size());
  CHECK(double(tape.value(loss).data[0]) == doctest::Approx(expect).epsilon(1e-5));
  tape.backward(loss);
  const Tensor& g = tape.grad(xi);
  for (size_t i = 0; i < x.data.size(); ++i) {
    double d = double(x.data[i]) - double(t.data[i]);
    CHECK(double(g.data[i]) ==
          doctest::Approx(2.0 * d / double(x.data.size())).epsilon(1e-4));
  }
}

TEST_CASE("l1 loss node value and gradient are the signed-mean rule") {
  Rng rng(21);
  Tensor x = random_tensor({3, 3, 1}, rng);
  Tensor t = random_tensor({3, 3, 1}, rng);
  Tape tape;
  Tape::NodeId xi = tape.input(x);
  Tape::NodeId loss = tape.l1_loss_node(xi, t);
  double expect = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i)
    expect += std::abs(double(x.data[i]) - double(t.data[i]));
  expect /= double(x.data.size());
  CHECK(double(tape.value(loss).data[0]) == doctest::Approx(expect).epsilon(1e-5));
  tape.backward(loss);
  const Tensor& g = tape.grad(xi);
  for (size_t i = 0; i < x.data.size(); ++i) {
    double d = double(x.data[i]) - double(t.data[i]);
    double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    CHECK(double(g.data[i]) ==
          doctest::Approx(s / double(x.data.size())).epsilon(1e-6));
  }
}

TEST_CASE("forward passes are bit-deterministic") {
  Rng rng(22);
  Tensor x = random_tensor({6, 6, 2}, rng);
  Tensor w = random_tensor({4, 4, 2, 3}, rng);
  auto run = [&]() {
    Tape tape;
    Tape::NodeId y = tape.conv2d(tape.input(x), tape.param(w), 2);
    y = tape.instance_norm(y);
    y = tape.activation(y, ActKind::leaky_relu);
    return tape.value(y).data;
  };
  std::vector<real> a = run(), b = run();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("every tape operation passes its finite-difference suite") {
  std::vector<GradCheckResult> results = run_gradcheck();
  bool found = false;
  for (const GradCheckResult& r : results)
    if (r.name == "tensor") {
      found = true;
      CHECK(r.worst_rel <= 1e-3);
      CHECK(r.checks >= 400);
    }
  CHECK(found);
}
