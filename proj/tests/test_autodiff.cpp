#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gait/rng.hpp"
#include "gait/tensor.hpp"
#include "gait/verify.hpp"
#include "oracles.hpp"

using namespace gait;
using Mat = Tape<double>::Mat;

namespace {

Mat randm(Rng& rng, long r, long c, double lo = -1.0, double hi = 1.0) {
    return oracle::random_matrix(rng, r, c, lo, hi);
}

// Permutes the batch-entry blocks of a C×(B·T·N) value.
Mat permute_entries(const Mat& x, Shape4 sh, const std::vector<int>& perm) {
    Mat out(x.rows(), x.cols());
    const long tn = static_cast<long>(sh.t) * sh.n;
    for (int b = 0; b < sh.b; ++b) {
        out.middleCols(b * tn, tn) = x.middleCols(perm[static_cast<std::size_t>(b)] * tn, tn);
    }
    return out;
}

}  // namespace

TEST_CASE("tape basics: leaves, shapes, lazy gradients") {
    Tape<double> tape;
    Mat v(2, 3);
    v << 1, 2, 3, 4, 5, 6;
    VarId a = tape.leaf(v, false);
    const Shape4 want_flat{3, 2, 1, 1};
    CHECK(tape.shape(a) == want_flat);
    CHECK(tape.shape(a).cols() == 3);
    CHECK_FALSE(tape.requires_grad(a));
    CHECK_FALSE(tape.has_grad(a));

    const Shape4 batched{1, 2, 1, 3};
    VarId b = tape.leaf(v, batched, true);
    CHECK(tape.requires_grad(b));
    CHECK(tape.size() == 2);

    // shape/value disagreement is rejected
    const Shape4 wrong{2, 2, 1, 2};
    CHECK_THROWS_AS(tape.leaf(v, wrong, false), std::invalid_argument);
}

TEST_CASE("backward requires a scalar loss") {
    Tape<double> tape;
    VarId x = tape.leaf(Mat::Ones(2, 2), true);
    CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
}

TEST_CASE("add, scale and matmul forward values and gradients") {
    Rng rng(derive_seed(5, "autodiff.basic"));
    Tape<double> tape;
    Mat av = randm(rng, 3, 4), bv = randm(rng, 3, 4);
    VarId a = tape.leaf(av, true);
    VarId b = tape.leaf(bv, true);
    VarId s = add(tape, a, b);
    CHECK(tape.value(s) == av + bv);

    VarId sc = scale(tape, s, 2.5);
    CHECK(tape.value(sc) == (av + bv) * 2.5);

    Mat w = randm(rng, 3, 4);
    VarId loss = inner(tape, sc, w);
    tape.backward(loss);
    CHECK((tape.grad(a) - 2.5 * w).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((tape.grad(b) - 2.5 * w).cwiseAbs().maxCoeff() <= 1e-14);

    Tape<double> tape2;
    Mat mv = randm(rng, 2, 3), nv = randm(rng, 3, 4);
    VarId m = tape2.leaf(mv, true);
    VarId n = tape2.leaf(nv, true);
    VarId p = matmul(tape2, m, n);
    CHECK((tape2.value(p) - mv * nv).cwiseAbs().maxCoeff() <= 1e-14);
    Mat w2 = randm(rng, 2, 4);
    tape2.backward(inner(tape2, p, w2));
    CHECK((tape2.grad(m) - w2 * nv.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((tape2.grad(n) - mv.transpose() * w2).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("a variable used twice accumulates both contributions") {
    Tape<double> tape;
    Mat xv(1, 2);
    xv << 3.0, -1.0;
    VarId x = tape.leaf(xv, true);
    VarId y = add(tape, x, x);
    Mat w(1, 2);
    w << 2.0, 5.0;
    tape.backward(inner(tape, y, w));
    CHECK(tape.grad(x) == 2.0 * w);
}

TEST_CASE("relu forward and kink behavior") {
    Tape<double> tape;
    Mat v(1, 4);
    v << -2.0, 0.0, 1.5, -0.1;
    VarId x = tape.leaf(v, true);
    VarId y = relu(tape, x);
    Mat expect(1, 4);
    expect << 0.0, 0.0, 1.5, 0.0;
    CHECK(tape.value(y) == expect);
    Mat w = Mat::Ones(1, 4);
    tape.backward(inner(tape, y, w));
    Mat gexpect(1, 4);
    gexpect << 0.0, 0.0, 1.0, 0.0;  // the derivative at exactly 0 is defined as 0
    CHECK(tape.grad(x) == gexpect);
}

TEST_CASE("temporal convolution matches the nested-loop form") {
    Rng rng(derive_seed(5, "autodiff.conv"));
    for (int stride : {1, 2}) {
        const Shape4 sh{2, 3, 7, 4};
        Mat x = randm(rng, sh.c, sh.cols());
        Mat kernel = randm(rng, 5, 3L * sh.c);  // k = 3
        Tape<double> tape;
        VarId xv = tape.leaf(x, sh, false);
        VarId kv = tape.leaf(kernel, false);
        VarId y = conv_temporal(tape, xv, kv, 3, stride);
        const Mat want = oracle::ref_conv_temporal(x, sh, kernel, 3, stride);
        CHECK((tape.value(y) - want).cwiseAbs().maxCoeff() <= 1e-12);
        const Shape4 want_shape{2, 5, stride == 1 ? 7 : 4, 4};
        CHECK(tape.shape(y) == want_shape);
    }
}

TEST_CASE("graph convolution matches the explicit-sum form") {
    Rng rng(derive_seed(5, "autodiff.gcn"));
    const Shape4 sh{2, 4, 3, 5};
    const auto edges = oracle::random_connected_graph(rng, sh.n);
    const Mat a_hat = oracle::ref_normalized_adjacency(edges, sh.n);
    Mat x = randm(rng, sh.c, sh.cols());
    Mat w = randm(rng, sh.c, 6);
    Tape<double> tape;
    VarId xv = tape.leaf(x, sh, false);
    VarId wv = tape.leaf(w, false);
    VarId y = spatial_gcn(tape, xv, a_hat, wv);
    const Mat want = oracle::ref_spatial_gcn(x, sh, a_hat, w);
    CHECK((tape.value(y) - want).cwiseAbs().maxCoeff() <= 1e-12);
    const Shape4 want_shape{2, 6, 3, 5};
    CHECK(tape.shape(y) == want_shape);
}

TEST_CASE("batch normalization matches the per-channel reference") {
    Rng rng(derive_seed(5, "autodiff.bn"));
    const Shape4 sh{3, 4, 2, 5};
    Mat x = randm(rng, sh.c, sh.cols(), -2.0, 3.0);
    Mat gamma = randm(rng, sh.c, 1, 0.5, 1.5);
    Mat beta = randm(rng, sh.c, 1, -0.5, 0.5);
    const double eps = 1e-5;

    Tape<double> tape;
    VarId xv = tape.leaf(x, sh, false);
    VarId gv = tape.leaf(gamma, false);
    VarId bv = tape.leaf(beta, false);
    BnState<double> st = BnState<double>::init(sh.c);
    VarId y = batch_norm(tape, xv, gv, bv, st, true, 0.1, eps);

    const Mat want = oracle::ref_batch_norm_train(x, gamma.col(0), beta.col(0), eps);
    CHECK((tape.value(y) - want).cwiseAbs().maxCoeff() <= 1e-9);

    // running statistics blend in the biased batch moments
    for (int c = 0; c < sh.c; ++c) {
        double mu = x.row(c).mean();
        double var = (x.row(c).array() - mu).square().mean();
        CHECK(st.running_mean[c] == doctest::Approx(0.1 * mu).epsilon(1e-12));
        CHECK(st.running_var[c] == doctest::Approx(0.9 * 1.0 + 0.1 * var).epsilon(1e-12));
    }

    // eval mode applies the running statistics
    Tape<double> tape2;
    VarId xe = tape2.leaf(x, sh, false);
    VarId ge = tape2.leaf(gamma, false);
    VarId be = tape2.leaf(beta, false);
    VarId ye = batch_norm(tape2, xe, ge, be, st, false, 0.1, eps);
    for (int c = 0; c < sh.c; ++c) {
        for (long j = 0; j < x.cols(); ++j) {
            const double want_e = gamma(c, 0) * (x(c, j) - st.running_mean[c]) /
                                      std::sqrt(st.running_var[c] + eps) +
                                  beta(c, 0);
            CHECK(tape2.value(ye)(c, j) == doctest::Approx(want_e).epsilon(1e-12));
        }
    }

    // update_running=false leaves the state untouched
    BnState<double> frozen = BnState<double>::init(sh.c);
    Tape<double> tape3;
    VarId xf = tape3.leaf(x, sh, false);
    VarId gf = tape3.leaf(gamma, false);
    VarId bf = tape3.leaf(beta, false);
    batch_norm(tape3, xf, gf, bf, frozen, true, 0.1, eps, false);
    CHECK(frozen.running_mean.isZero(0.0));
    CHECK((frozen.running_var.array() == 1.0).all());
}

TEST_CASE("train-mode batch norm is equivariant under batch permutation") {
    Rng rng(derive_seed(5, "autodiff.bnperm"));
    const Shape4 sh{4, 3, 2, 3};
    Mat x = randm(rng, sh.c, sh.cols(), -2.0, 2.0);
    Mat gamma = Mat::Ones(sh.c, 1), beta = Mat::Zero(sh.c, 1);
    std::vector<int> perm{2, 0, 3, 1};

    auto run = [&](const Mat& input) {
        Tape<double> tape;
        VarId xv = tape.leaf(input, sh, false);
        VarId gv = tape.leaf(gamma, false);
        VarId bv = tape.leaf(beta, false);
        BnState<double> st = BnState<double>::init(sh.c);
        return Mat(tape.value(batch_norm(tape, xv, gv, bv, st, true, 0.1, 1e-5, false)));
    };
    const Mat base = run(x);
    const Mat permuted = run(permute_entries(x, sh, perm));
    CHECK((permuted - permute_entries(base, sh, perm)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("per-entry ops are independent of batch order") {
    Rng rng(derive_seed(5, "autodiff.order"));
    const Shape4 sh{3, 4, 5, 2};
    Mat x = randm(rng, sh.c, sh.cols());
    std::vector<int> perm{1, 2, 0};

    SUBCASE("relu") {
        Tape<double> t1, t2;
        const Mat a = t1.value(relu(t1, t1.leaf(x, sh, false)));
        const Mat b = t2.value(relu(t2, t2.leaf(permute_entries(x, sh, perm), sh, false)));
        CHECK(b == permute_entries(a, sh, perm));
    }
    SUBCASE("temporal convolution") {
        Mat kernel = randm(rng, 4, 3L * sh.c);
        Tape<double> t1, t2;
        const Mat a = t1.value(conv_temporal(t1, t1.leaf(x, sh, false), t1.leaf(kernel, false), 3, 1));
        const Mat b = t2.value(conv_temporal(t2, t2.leaf(permute_entries(x, sh, perm), sh, false),
                                             t2.leaf(kernel, false), 3, 1));
        CHECK((b - permute_entries(a, sh, perm)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("graph convolution") {
        const auto edges = oracle::random_connected_graph(rng, sh.n);
        const Mat a_hat = oracle::ref_normalized_adjacency(edges, sh.n);
        Mat w = randm(rng, sh.c, 3);
        Tape<double> t1, t2;
        const Mat a = t1.value(spatial_gcn(t1, t1.leaf(x, sh, false), a_hat, t1.leaf(w, false)));
        const Mat b = t2.value(spatial_gcn(t2, t2.leaf(permute_entries(x, sh, perm), sh, false),
                                           a_hat, t2.leaf(w, false)));
        CHECK((b - permute_entries(a, sh, perm)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("mean pooling averages every frame and joint per entry") {
    Rng rng(derive_seed(5, "autodiff.pool"));
    const Shape4 sh{3, 4, 2, 5};
    Mat x = randm(rng, sh.c, sh.cols());
    Tape<double> tape;
    VarId y = mean_pool_tn(tape, tape.leaf(x, sh, false));
    REQUIRE(tape.value(y).rows() == 4);
    REQUIRE(tape.value(y).cols() == 3);
    for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 4; ++c) {
            double acc = 0.0;
            for (long j = 0; j < 10; ++j) acc += x(c, b * 10 + j);
            CHECK(tape.value(y)(c, b) == doctest::Approx(acc / 10.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("linear applies weights and broadcast bias") {
    Rng rng(derive_seed(5, "autodiff.linear"));
    Mat x = randm(rng, 4, 3), w = randm(rng, 2, 4), b = randm(rng, 2, 1);
    Tape<double> tape;
    VarId y = linear(tape, tape.leaf(x, false), tape.leaf(w, false), tape.leaf(b, false));
    const Mat want = (w * x).colwise() + b.col(0);
    CHECK((tape.value(y) - want).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("l2 normalization yields unit columns and rejects zero columns") {
    Rng rng(derive_seed(5, "autodiff.l2"));
    Mat x = randm(rng, 6, 5, -4.0, 4.0);
    Tape<double> tape;
    VarId y = l2_normalize(tape, tape.leaf(x, false));
    for (long j = 0; j < 5; ++j) {
        CHECK(std::abs(tape.value(y).col(j).norm() - 1.0) <= 1e-6);
    }

    Mat bad = x;
    bad.col(2).setZero();
    Tape<double> tape2;
    CHECK_THROWS_AS(l2_normalize(tape2, tape2.leaf(bad, false)), NumericError);
}

TEST_CASE("dropout semantics") {
    Rng rng(derive_seed(5, "autodiff.dropout"));
    Mat x = randm(rng, 8, 50, 0.5, 1.5);  // all entries nonzero

    SUBCASE("eval mode and rate zero are the identity") {
        Tape<double> tape;
        VarId xv = tape.leaf(x, false);
        CHECK(dropout(tape, xv, 0.5, false, 9) == xv);
        CHECK(dropout(tape, xv, 0.0, true, 9) == xv);
    }
    SUBCASE("train mode zeroes or rescales, deterministically in the seed") {
        Tape<double> t1, t2;
        const Mat a = t1.value(dropout(t1, t1.leaf(x, false), 0.4, true, 9));
        const Mat b = t2.value(dropout(t2, t2.leaf(x, false), 0.4, true, 9));
        CHECK(a == b);
        long zeros = 0;
        for (long j = 0; j < a.size(); ++j) {
            const double v = a(j / 50, j % 50), orig = x(j / 50, j % 50);
            if (v == 0.0) {
                ++zeros;
            } else {
                CHECK(v == doctest::Approx(orig / 0.6).epsilon(1e-12));
            }
        }
        CHECK(zeros > 0);
        CHECK(zeros < a.size());
        // a different seed draws a different mask
        Tape<double> t3;
        CHECK(t3.value(dropout(t3, t3.leaf(x, false), 0.4, true, 10)) != a);
    }
    SUBCASE("backward regenerates the same mask") {
        Tape<double> tape;
        VarId xv = tape.leaf(x, true);
        VarId y = dropout(tape, xv, 0.4, true, 9);
        tape.backward(inner(tape, y, Mat::Ones(8, 50)));
        const Mat& g = tape.grad(xv);
        for (long j = 0; j < g.size(); ++j) {
            const bool value_kept = tape.value(y)(j / 50, j % 50) != 0.0;
            const bool grad_kept = g(j / 50, j % 50) != 0.0;
            CHECK(value_kept == grad_kept);
        }
    }
}

TEST_CASE("gradient verification suite passes every case") {
    const auto cases = grad_check_suite(77);
    CHECK(cases.size() >= 40);
    for (const auto& c : cases) {
        INFO(c.name << ": rel err " << c.report.max_rel_err);
        CHECK(c.report.pass(kGradCheckTol));
    }
}
