#pragma once

// Reference implementations used by the tests. Everything here is written as
// plain scalar loops straight from the underlying definitions and shares no
// code with the library (only Eigen containers and public structs are reused),
// so agreement between the two is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gait/model.hpp"
#include "gait/rng.hpp"
#include "gait/tensor.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Scalar geometry
// ---------------------------------------------------------------------------

inline double ref_angle(double dy, double dx) {
    if (dx == 0.0 && dy == 0.0) return 0.0;
    const double a = std::atan2(dy, dx);
    return a == -M_PI ? M_PI : a;
}

// Wrap into (−π, π] by repeated shifting (independent of the fmod route).
inline double ref_wrap(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a <= -M_PI) a += 2.0 * M_PI;
    return a;
}

// ---------------------------------------------------------------------------
// Feature transcription: 20 channels into a C×(T·N) matrix, column t·N + n
// ---------------------------------------------------------------------------

// neighbors[i] lists the joints connected to joint i, ascending.
inline Eigen::MatrixXd ref_features(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                    const std::vector<std::vector<int>>& neighbors) {
    const int T = static_cast<int>(x.rows());
    const int N = static_cast<int>(x.cols());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(20, static_cast<long>(T) * N);

    // Joint stream: polar coordinates of each joint about the frame centroid.
    for (int t = 0; t < T; ++t) {
        double sx = 0.0, sy = 0.0;
        for (int n = 0; n < N; ++n) {
            sx += x(t, n);
            sy += y(t, n);
        }
        const double cx = sx / N, cy = sy / N;
        for (int n = 0; n < N; ++n) {
            const double dx = x(t, n) - cx, dy = y(t, n) - cy;
            out(0, static_cast<long>(t) * N + n) = std::sqrt(dx * dx + dy * dy);
            out(1, static_cast<long>(t) * N + n) = ref_angle(dy, dx);
        }
    }

    // Acceleration stream: for each sampling period Ts in {1, 2}, the second
    // differences evaluated at frames t−Ts, t, t+Ts (x then y). Any stencil
    // that would leave [0, T) makes that (x, y) pair exactly zero.
    for (int t = 0; t < T; ++t) {
        for (int n = 0; n < N; ++n) {
            int c = 2;
            for (int Ts : {1, 2}) {
                for (int tau : {t - Ts, t, t + Ts}) {
                    double ax = 0.0, ay = 0.0;
                    if (tau - Ts >= 0 && tau + Ts < T) {
                        ax = x(tau + Ts, n) - 2.0 * x(tau, n) + x(tau - Ts, n);
                        ay = y(tau + Ts, n) - 2.0 * y(tau, n) + y(tau - Ts, n);
                    }
                    out(c++, static_cast<long>(t) * N + n) = ax;
                    out(c++, static_cast<long>(t) * N + n) = ay;
                }
            }
        }
    }

    // Bone stream: each joint's bone runs from its nearest connected joint to
    // itself (per frame, ties to the lowest joint index); length and angle plus
    // their backward differences over 1 and 2 frames, angle differences
    // wrapped. Differences reaching before frame 0 are exactly zero.
    Eigen::MatrixXd blen = Eigen::MatrixXd::Zero(T, N);
    Eigen::MatrixXd bang = Eigen::MatrixXd::Zero(T, N);
    for (int t = 0; t < T; ++t) {
        for (int n = 0; n < N; ++n) {
            if (neighbors[static_cast<std::size_t>(n)].empty()) continue;
            int best = -1;
            double best_d2 = 0.0;
            for (int j : neighbors[static_cast<std::size_t>(n)]) {
                const double dx = x(t, n) - x(t, j), dy = y(t, n) - y(t, j);
                const double d2 = dx * dx + dy * dy;
                if (best == -1 || d2 < best_d2) {
                    best = j;
                    best_d2 = d2;
                }
            }
            const double bx = x(t, n) - x(t, best), by = y(t, n) - y(t, best);
            blen(t, n) = std::sqrt(bx * bx + by * by);
            bang(t, n) = ref_angle(by, bx);
        }
    }
    for (int t = 0; t < T; ++t) {
        for (int n = 0; n < N; ++n) {
            const long col = static_cast<long>(t) * N + n;
            out(14, col) = blen(t, n);
            out(15, col) = bang(t, n);
            for (int Ts : {1, 2}) {
                if (t - Ts >= 0) {
                    out(14 + 2 * Ts, col) = blen(t, n) - blen(t - Ts, n);
                    out(15 + 2 * Ts, col) = ref_wrap(bang(t, n) - bang(t - Ts, n));
                }
            }
        }
    }
    return out;
}

// Ascending connected-joint lists straight from an edge list.
inline std::vector<std::vector<int>> ref_neighbors(const std::vector<std::pair<int, int>>& edges,
                                                   int n) {
    std::vector<std::set<int>> sets(static_cast<std::size_t>(n));
    for (const auto& [a, b] : edges) {
        sets[static_cast<std::size_t>(a)].insert(b);
        sets[static_cast<std::size_t>(b)].insert(a);
    }
    std::vector<std::vector<int>> out;
    out.reserve(sets.size());
    for (const auto& s : sets) out.emplace_back(s.begin(), s.end());
    return out;
}

// ---------------------------------------------------------------------------
// Graph normalization
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd ref_normalized_adjacency(const std::vector<std::pair<int, int>>& edges,
                                                int n) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (const auto& [a, b] : edges) {
        m(a, b) = 1.0;
        m(b, a) = 1.0;
    }
    Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) deg[i] += m(i, j);
    }
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) out(i, j) = m(i, j) / std::sqrt(deg[i] * deg[j]);
    }
    return out;
}

// Random connected graph: a random spanning tree plus a few extra edges.
inline std::vector<std::pair<int, int>> random_connected_graph(gait::Rng& rng, int n) {
    std::set<std::pair<int, int>> edges;
    for (int i = 1; i < n; ++i) {
        const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
        edges.insert({std::min(i, p), std::max(i, p)});
    }
    const int extra = n >= 3 ? static_cast<int>(rng.below(static_cast<std::uint64_t>(n))) : 0;
    for (int e = 0; e < extra; ++e) {
        const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
    }
    return {edges.begin(), edges.end()};
}

// ---------------------------------------------------------------------------
// Network layers, direct nested-loop form
// ---------------------------------------------------------------------------

// x is C×(B·T·N) with column (b·T + t)·N + n; kernel is C_out×(k·C) with
// column kk·C + c; zero padding of (k−1)/2 frames on both ends.
inline Eigen::MatrixXd ref_conv_temporal(const Eigen::MatrixXd& x, gait::Shape4 sh,
                                         const Eigen::MatrixXd& kernel, int k, int stride) {
    const int c_out = static_cast<int>(kernel.rows());
    const int t_out = (sh.t + stride - 1) / stride;
    const int pad = (k - 1) / 2;
    Eigen::MatrixXd y =
        Eigen::MatrixXd::Zero(c_out, static_cast<long>(sh.b) * t_out * sh.n);
    for (int b = 0; b < sh.b; ++b) {
        for (int to = 0; to < t_out; ++to) {
            for (int n = 0; n < sh.n; ++n) {
                const long dst = (static_cast<long>(b) * t_out + to) * sh.n + n;
                for (int co = 0; co < c_out; ++co) {
                    double acc = 0.0;
                    for (int kk = 0; kk < k; ++kk) {
                        const int ti = to * stride - pad + kk;
                        if (ti < 0 || ti >= sh.t) continue;
                        const long src = (static_cast<long>(b) * sh.t + ti) * sh.n + n;
                        for (int c = 0; c < sh.c; ++c) {
                            acc += kernel(co, static_cast<long>(kk) * sh.c + c) * x(c, src);
                        }
                    }
                    y(co, dst) = acc;
                }
            }
        }
    }
    return y;
}

// Per frame: Y_t = Wᵀ · X_t · A, all in explicit sums. w is C×C_out.
inline Eigen::MatrixXd ref_spatial_gcn(const Eigen::MatrixXd& x, gait::Shape4 sh,
                                       const Eigen::MatrixXd& a, const Eigen::MatrixXd& w) {
    const int c_out = static_cast<int>(w.cols());
    Eigen::MatrixXd y =
        Eigen::MatrixXd::Zero(c_out, static_cast<long>(sh.b) * sh.t * sh.n);
    for (long f = 0; f < static_cast<long>(sh.b) * sh.t; ++f) {
        for (int n = 0; n < sh.n; ++n) {
            for (int co = 0; co < c_out; ++co) {
                double acc = 0.0;
                for (int m = 0; m < sh.n; ++m) {
                    double xm = 0.0;
                    for (int c = 0; c < sh.c; ++c) xm += w(c, co) * x(c, f * sh.n + m);
                    acc += xm * a(m, n);
                }
                y(co, f * sh.n + n) = acc;
            }
        }
    }
    return y;
}

// Train-mode batch normalization with biased batch variance.
inline Eigen::MatrixXd ref_batch_norm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma,
                                            const Eigen::VectorXd& beta, double eps) {
    const long C = x.rows(), cols = x.cols();
    Eigen::MatrixXd y(C, cols);
    for (long c = 0; c < C; ++c) {
        double mu = 0.0;
        for (long j = 0; j < cols; ++j) mu += x(c, j);
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (long j = 0; j < cols; ++j) var += (x(c, j) - mu) * (x(c, j) - mu);
        var /= static_cast<double>(cols);
        for (long j = 0; j < cols; ++j) {
            y(c, j) = gamma[c] * (x(c, j) - mu) / std::sqrt(var + eps) + beta[c];
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// Contrastive loss, direct transcription
// ---------------------------------------------------------------------------

// z holds unit embeddings as columns. Unshifted exponentials on purpose: the
// tests keep logits small enough for that to be exact.
inline double ref_supcon(const Eigen::MatrixXd& z, const std::vector<int>& labels, double tau) {
    const int B = static_cast<int>(z.cols());
    double total = 0.0;
    int anchors = 0;
    for (int i = 0; i < B; ++i) {
        std::vector<int> pos;
        for (int p = 0; p < B; ++p) {
            if (p != i && labels[static_cast<std::size_t>(p)] == labels[static_cast<std::size_t>(i)]) {
                pos.push_back(p);
            }
        }
        if (pos.empty()) continue;
        ++anchors;
        double denom = 0.0;
        for (int a = 0; a < B; ++a) {
            if (a != i) denom += std::exp(z.col(i).dot(z.col(a)) / tau);
        }
        double li = 0.0;
        for (int p : pos) {
            li += -std::log(std::exp(z.col(i).dot(z.col(p)) / tau) / denom);
        }
        total += li / static_cast<double>(pos.size());
    }
    return anchors == 0 ? 0.0 : total / anchors;
}

// ---------------------------------------------------------------------------
// Identification protocol, brute force
// ---------------------------------------------------------------------------

struct RefCell {
    long correct = 0;
    long total = 0;
};

struct RefEval {
    std::map<std::pair<int, int>, RefCell> cells;  // (probe view, gallery view)
    long correct_total = 0;
    long scored_total = 0;
};

inline RefEval ref_eval(const std::vector<gait::Embedding>& gallery,
                        const std::vector<gait::Embedding>& probes) {
    std::set<int> gallery_views;
    for (const auto& g : gallery) gallery_views.insert(g.view);

    RefEval out;
    for (const auto& p : probes) {
        for (int gv : gallery_views) {
            int best = -1;
            double best_d = 0.0;
            for (int gi = 0; gi < static_cast<int>(gallery.size()); ++gi) {
                if (gallery[static_cast<std::size_t>(gi)].view != gv) continue;
                const double d =
                    (p.vector - gallery[static_cast<std::size_t>(gi)].vector).norm();
                if (best == -1 || d < best_d) {
                    best = gi;
                    best_d = d;
                }
            }
            if (best == -1) continue;
            RefCell& cell = out.cells[{p.view, gv}];
            cell.total += 1;
            if (gallery[static_cast<std::size_t>(best)].label == p.label) cell.correct += 1;
        }
    }
    for (const auto& [key, cell] : out.cells) {
        out.correct_total += cell.correct;
        out.scored_total += cell.total;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic test data helpers
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd random_matrix(gait::Rng& rng, long rows, long cols, double lo, double hi) {
    Eigen::MatrixXd m(rows, cols);
    for (long j = 0; j < cols; ++j) {
        for (long i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
    }
    return m;
}

inline Eigen::VectorXd random_unit_vector(gait::Rng& rng, int dim) {
    Eigen::VectorXd v(dim);
    double n2 = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = rng.normal();
        n2 = v.squaredNorm();
    } while (n2 < 1e-12);
    return v / std::sqrt(n2);
}

}  // namespace oracle
