#include "gait/verify.hpp"

#include "gait/loss.hpp"
#include "gait/model.hpp"
#include "gait/rng.hpp"
#include "gait/skeleton.hpp"

namespace gait {

namespace {

using Mat = Eigen::MatrixXd;

Mat random_normal(int rows, long cols, Rng& rng, double sigma = 1.0) {
    Mat m(rows, cols);
    for (long i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, sigma);
    return m;
}

// Values bounded away from zero, so no relu kink sits inside the finite-difference window.
Mat random_offset(int rows, long cols, Rng& rng) {
    Mat m(rows, cols);
    for (long i = 0; i < m.size(); ++i) {
        const double mag = 0.2 + 0.8 * rng.uniform();
        m.data()[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    return m;
}

SkeletonDef path_skeleton(int n) {
    SkeletonDef def;
    def.name = "path" + std::to_string(n);
    for (int i = 0; i < n; ++i) def.joint_names.push_back("j" + std::to_string(i));
    for (int i = 0; i + 1 < n; ++i) def.edges.push_back({i, i + 1});
    def.validate();
    return def;
}

}  // namespace

std::vector<GradCheckCase> grad_check_suite(std::uint64_t seed) {
    std::vector<GradCheckCase> cases;
    const double h = kGradCheckStep;
    Rng rng(derive_seed(seed, "grad.suite"));

    const Shape4 shp{2, 3, 5, 4};       // small batched tensor
    const long cols = shp.cols();
    const Mat reducer = random_normal(shp.c, cols, rng);

    auto run = [&cases, h](const std::string& name,
                           const std::function<VarId(Tape<double>&, VarId)>& build, const Mat& x0,
                           Shape4 shape) {
        cases.push_back({name, grad_check<double>(build, x0, shape, h)});
    };

    // add: each operand in turn
    {
        const Mat other = random_normal(shp.c, cols, rng);
        run("add.lhs",
            [&](Tape<double>& t, VarId x) {
                VarId o = t.leaf(other, shp, false);
                return inner(t, add(t, x, o), reducer);
            },
            random_normal(shp.c, cols, rng), shp);
        run("add.rhs",
            [&](Tape<double>& t, VarId x) {
                VarId o = t.leaf(other, shp, false);
                return inner(t, add(t, o, x), reducer);
            },
            random_normal(shp.c, cols, rng), shp);
    }

    run("scale",
        [&](Tape<double>& t, VarId x) { return inner(t, scale(t, x, -1.7), reducer); },
        random_normal(shp.c, cols, rng), shp);

    // matmul: plain matrices, each operand in turn
    {
        const Mat a0 = random_normal(3, 4, rng);
        const Mat b0 = random_normal(4, 2, rng);
        const Mat red = random_normal(3, 2, rng);
        run("matmul.lhs",
            [&](Tape<double>& t, VarId x) {
                VarId b = t.leaf(b0, false);
                return inner(t, matmul(t, x, b), red);
            },
            a0, Shape4{4, 3, 1, 1});
        run("matmul.rhs",
            [&](Tape<double>& t, VarId x) {
                VarId a = t.leaf(a0, false);
                return inner(t, matmul(t, a, x), red);
            },
            b0, Shape4{2, 4, 1, 1});
    }

    run("relu",
        [&](Tape<double>& t, VarId x) { return inner(t, relu(t, x), reducer); },
        random_offset(shp.c, cols, rng), shp);

    run("dropout",
        [&](Tape<double>& t, VarId x) {
            return inner(t, dropout(t, x, 0.4, true, 12345), reducer);
        },
        random_normal(shp.c, cols, rng), shp);

    // graph convolution on a 4-joint path: input and weight gradients
    {
        const SkeletonDef skel = path_skeleton(shp.n);
        const Mat a_hat = normalize_adjacency(build_adjacency(skel)).matrix;
        const Mat w0 = random_normal(shp.c, 6, rng);
        const Mat red = random_normal(6, cols, rng);
        run("spatial_gcn.input",
            [&](Tape<double>& t, VarId x) {
                VarId w = t.leaf(w0, false);
                return inner(t, spatial_gcn(t, x, a_hat, w), red);
            },
            random_normal(shp.c, cols, rng), shp);
        const Mat x_fixed = random_normal(shp.c, cols, rng);
        run("spatial_gcn.weight",
            [&](Tape<double>& t, VarId w) {
                VarId x = t.leaf(x_fixed, shp, false);
                return inner(t, spatial_gcn(t, x, a_hat, w), red);
            },
            w0, Shape4{6, shp.c, 1, 1});
    }

    // temporal convolution, stride 1 and 2: input and kernel gradients
    for (int stride : {1, 2}) {
        const int k = 3, c_out = 4;
        const Mat kern0 = random_normal(c_out, k * shp.c, rng);
        const int t_out = (shp.t + stride - 1) / stride;
        const Mat red = random_normal(c_out, static_cast<long>(shp.b) * t_out * shp.n, rng);
        const std::string tag = "conv_temporal.s" + std::to_string(stride);
        run(tag + ".input",
            [&, stride](Tape<double>& t, VarId x) {
                VarId kv = t.leaf(kern0, false);
                return inner(t, conv_temporal(t, x, kv, k, stride), red);
            },
            random_normal(shp.c, cols, rng), shp);
        const Mat x_fixed = random_normal(shp.c, cols, rng);
        run(tag + ".kernel",
            [&, stride](Tape<double>& t, VarId kv) {
                VarId x = t.leaf(x_fixed, shp, false);
                return inner(t, conv_temporal(t, x, kv, k, stride), red);
            },
            kern0, Shape4{k * shp.c, c_out, 1, 1});
    }

    // batch normalization in train mode: input, gamma, beta gradients
    {
        const Mat g0 = Mat::Ones(shp.c, 1) + 0.1 * random_normal(shp.c, 1, rng);
        const Mat b0 = 0.1 * random_normal(shp.c, 1, rng);
        const Mat x_fixed = random_normal(shp.c, cols, rng);
        BnState<double> bn_state = BnState<double>::init(shp.c);  // untouched: updates are off
        auto bn_build = [&](Tape<double>& t, VarId x, VarId g, VarId b) {
            return inner(t, batch_norm(t, x, g, b, bn_state, true, 0.1, 1e-5, false), reducer);
        };
        run("batch_norm.input",
            [&](Tape<double>& t, VarId x) {
                VarId g = t.leaf(g0, false), b = t.leaf(b0, false);
                return bn_build(t, x, g, b);
            },
            x_fixed, shp);
        run("batch_norm.gamma",
            [&](Tape<double>& t, VarId g) {
                VarId x = t.leaf(x_fixed, shp, false), b = t.leaf(b0, false);
                return bn_build(t, x, g, b);
            },
            g0, Shape4{1, shp.c, 1, 1});
        run("batch_norm.beta",
            [&](Tape<double>& t, VarId b) {
                VarId x = t.leaf(x_fixed, shp, false), g = t.leaf(g0, false);
                return bn_build(t, x, g, b);
            },
            b0, Shape4{1, shp.c, 1, 1});
    }

    {
        const Mat red = random_normal(shp.c, shp.b, rng);
        run("mean_pool_tn",
            [&](Tape<double>& t, VarId x) { return inner(t, mean_pool_tn(t, x), red); },
            random_normal(shp.c, cols, rng), shp);
    }

    // linear head on pooled features: input, weight, bias gradients
    {
        const int c_in = 3, c_out = 5, batch = 7;
        const Mat x0 = random_normal(c_in, batch, rng);
        const Mat w0 = random_normal(c_out, c_in, rng);
        const Mat b0 = random_normal(c_out, 1, rng);
        const Mat red = random_normal(c_out, batch, rng);
        run("linear.input",
            [&](Tape<double>& t, VarId x) {
                VarId w = t.leaf(w0, false), b = t.leaf(b0, false);
                return inner(t, linear(t, x, w, b), red);
            },
            x0, Shape4{batch, c_in, 1, 1});
        run("linear.weight",
            [&](Tape<double>& t, VarId w) {
                VarId x = t.leaf(x0, false), b = t.leaf(b0, false);
                return inner(t, linear(t, x, w, b), red);
            },
            w0, Shape4{c_in, c_out, 1, 1});
        run("linear.bias",
            [&](Tape<double>& t, VarId b) {
                VarId x = t.leaf(x0, false), w = t.leaf(w0, false);
                return inner(t, linear(t, x, w, b), red);
            },
            b0, Shape4{1, c_out, 1, 1});
    }

    // unit-sphere projection, inputs bounded away from the zero column
    {
        const int dim = 6, batch = 5;
        Mat x0 = random_normal(dim, batch, rng);
        for (int c = 0; c < batch; ++c) {
            if (x0.col(c).norm() < 0.5) x0.col(c) *= 0.5 / x0.col(c).norm();
        }
        const Mat red = random_normal(dim, batch, rng);
        run("l2_normalize",
            [&](Tape<double>& t, VarId x) { return inner(t, l2_normalize(t, x), red); },
            x0, Shape4{batch, dim, 1, 1});
    }

    // contrastive loss over normalized embeddings
    {
        const int dim = 6, batch = 4;
        const std::vector<int> labels{0, 0, 1, 1};
        run("supcon_loss",
            [&](Tape<double>& t, VarId x) {
                return supcon_loss(t, l2_normalize(t, x), labels, 0.07);
            },
            random_normal(dim, batch, rng), Shape4{batch, dim, 1, 1});
    }

    // full composite: embedding network in train mode plus the batch loss
    {
        ModelConfig cfg;
        cfg.input_channels = 6;
        cfg.blocks = ModelConfig::chain({8, 8, 16}, {3}, cfg.input_channels);
        cfg.embed_dim = 10;
        cfg.dropout = 0.3;
        cfg.temporal_kernel = 3;
        cfg.skeleton = "custom";
        const SkeletonDef skel = path_skeleton(4);
        GaitModel<double> model = GaitModel<double>::create(cfg, derive_seed(seed, "grad.model"),
                                                            &skel);
        const Shape4 in_shape{4, cfg.input_channels, 6, 4};
        const Mat x_fixed = 0.7 * random_normal(in_shape.c, in_shape.cols(), rng);
        const std::vector<int> labels{0, 0, 1, 1};
        const std::uint64_t drop_seed = derive_seed(seed, "grad.dropout");

        auto forward_loss = [&](Tape<double>& t, VarId input_id,
                                const std::vector<VarId>* pids) {
            typename GaitModel<double>::ForwardOptions opt;
            opt.train = true;
            opt.dropout_seed = drop_seed;
            opt.update_running = false;
            opt.param_ids = pids;
            opt.input_id = input_id;
            auto fwd = model.forward(t, Mat{}, in_shape, opt);
            return supcon_loss(t, fwd.embeddings, labels, 0.07);
        };

        run("composite.input",
            [&](Tape<double>& t, VarId x) { return forward_loss(t, x, nullptr); },
            x_fixed, in_shape);

        for (std::size_t pi = 0; pi < model.params.size(); ++pi) {
            const auto& param = model.params[pi];
            const Shape4 pshape{static_cast<int>(param.value.cols()),
                                static_cast<int>(param.value.rows()), 1, 1};
            run("composite." + param.name,
                [&, pi](Tape<double>& t, VarId p) {
                    std::vector<VarId> pids;
                    pids.reserve(model.params.size());
                    for (std::size_t k = 0; k < model.params.size(); ++k) {
                        pids.push_back(k == pi ? p : t.leaf(model.params[k].value, false));
                    }
                    VarId input_id = t.leaf(x_fixed, in_shape, false);
                    return forward_loss(t, input_id, &pids);
                },
                param.value, pshape);
        }
    }

    return cases;
}

}  // namespace gait
