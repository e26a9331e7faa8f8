#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmrigen/eval/embed.hpp"
#include "fmrigen/util/rng.hpp"

namespace eval = fmrigen::eval;
namespace ad = fmrigen::ad;
namespace fs = std::filesystem;
using fmrigen::Rng;
using fmrigen::ValidationError;
using fmrigen::core::VolumeSequence;

namespace {

VolumeSequence tiny_seq(const std::string& id, float fill) {
    VolumeSequence s;
    s.t = 2;
    s.d = 1;
    s.h = 2;
    s.w = 3;
    s.data.resize(12);
    for (size_t i = 0; i < s.data.size(); ++i)
        s.data[i] = fill + static_cast<float>(i) * 0.125f;
    s.subject_id = id;
    return s;
}

ad::Tensor<double> random_matrix(int n, int p, uint64_t seed, double scale = 1.0) {
    ad::Tensor<double> x({n, p});
    Rng rng(seed);
    for (auto& v : x.v) v = rng.normal() * scale;
    return x;
}

// Eigenvalues of the p x p sample covariance by cyclic Jacobi rotations.
// Deliberately the covariance route, not the Gram route the library takes.
std::vector<double> covariance_eigenvalues(const ad::Tensor<double>& x) {
    const int n = x.dim(0), p = x.dim(1);
    std::vector<double> mean(static_cast<size_t>(p), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) mean[static_cast<size_t>(j)] += x.v[i * p + j];
    for (auto& m : mean) m /= n;
    std::vector<double> c(static_cast<size_t>(p) * p, 0.0);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b)
                c[static_cast<size_t>(a) * p + b] += (x.v[i * p + a] - mean[static_cast<size_t>(a)]) *
                                                     (x.v[i * p + b] - mean[static_cast<size_t>(b)]);
    for (auto& v : c) v /= n - 1;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int a = 0; a < p; ++a)
            for (int b = a + 1; b < p; ++b) off += c[static_cast<size_t>(a) * p + b] *
                                                   c[static_cast<size_t>(a) * p + b];
        if (off < 1e-26) break;
        for (int a = 0; a < p; ++a)
            for (int b = a + 1; b < p; ++b) {
                const double apq = c[static_cast<size_t>(a) * p + b];
                if (apq == 0) continue;
                const double theta =
                    (c[static_cast<size_t>(b) * p + b] - c[static_cast<size_t>(a) * p + a]) /
                    (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double cs = 1.0 / std::sqrt(t * t + 1), sn = t * cs;
                for (int r = 0; r < p; ++r) {
                    const double ra = c[static_cast<size_t>(r) * p + a];
                    const double rb = c[static_cast<size_t>(r) * p + b];
                    c[static_cast<size_t>(r) * p + a] = cs * ra - sn * rb;
                    c[static_cast<size_t>(r) * p + b] = sn * ra + cs * rb;
                }
                for (int r = 0; r < p; ++r) {
                    const double ar = c[static_cast<size_t>(a) * p + r];
                    const double br = c[static_cast<size_t>(b) * p + r];
                    c[static_cast<size_t>(a) * p + r] = cs * ar - sn * br;
                    c[static_cast<size_t>(b) * p + r] = sn * ar + cs * br;
                }
            }
    }
    std::vector<double> eig(static_cast<size_t>(p));
    for (int a = 0; a < p; ++a) eig[static_cast<size_t>(a)] = c[static_cast<size_t>(a) * p + a];
    std::sort(eig.rbegin(), eig.rend());
    return eig;
}

double row_dist(const ad::Tensor<double>& y, int i, int j) {
    const int d = y.dim(1);
    double acc = 0;
    for (int c = 0; c < d; ++c) {
        const double diff = y.v[i * d + c] - y.v[j * d + c];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

} // namespace

TEST_CASE("flattening keeps raster order and rejects mixed grids") {
    std::vector<VolumeSequence> ds{tiny_seq("a", 0.0f), tiny_seq("b", 10.0f)};
    auto x = eval::flatten_for_projection(ds);
    REQUIRE(x.shape == std::vector<int>{2, 12});
    for (int j = 0; j < 12; ++j) {
        CHECK(x.v[static_cast<size_t>(j)] == doctest::Approx(ds[0].data[static_cast<size_t>(j)]));
        CHECK(x.v[static_cast<size_t>(12 + j)] ==
              doctest::Approx(ds[1].data[static_cast<size_t>(j)]));
    }

    std::vector<VolumeSequence> bad = ds;
    bad[1].w = 2;
    bad[1].data.resize(8);
    CHECK_THROWS_WITH_AS(eval::flatten_for_projection(bad), doctest::Contains("'b'"),
                         ValidationError);
    CHECK_THROWS_AS(eval::flatten_for_projection({}), ValidationError);
}

TEST_CASE("pca puts all variance on a collinear direction") {
    // Points on a line through a fixed direction in 4-space.
    ad::Tensor<double> x({6, 4});
    const double dir[4] = {0.5, -1.0, 2.0, 0.25};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) x.v[i * 4 + j] = (i - 2.5) * dir[j] + 7.0;
    auto r = eval::pca_reduce(x, 3);
    REQUIRE(r.k == 3);
    CHECK(r.ratios[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(r.ratios[1]) < 1e-10);
    CHECK(std::abs(r.ratios[2]) < 1e-10);
    // Rank-exhausted columns are zeroed, not noise.
    for (int i = 0; i < 6; ++i) {
        CHECK(r.y.v[static_cast<size_t>(i) * 3 + 1] == 0.0);
        CHECK(r.y.v[static_cast<size_t>(i) * 3 + 2] == 0.0);
    }
}

TEST_CASE("full-rank pca reconstructs the data") {
    auto x = random_matrix(12, 5, 42);
    auto r = eval::pca_reduce(x, 5);
    REQUIRE(r.k == 5);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 5; ++j) {
            double rec = r.mean[static_cast<size_t>(j)];
            for (int c = 0; c < 5; ++c)
                rec += r.y.v[static_cast<size_t>(i) * 5 + c] *
                       r.components.v[static_cast<size_t>(c) * 5 + j];
            CHECK(rec == doctest::Approx(x.v[static_cast<size_t>(i) * 5 + j]).epsilon(1e-8));
        }
}

TEST_CASE("pca ratios match a covariance eigendecomposition") {
    auto x = random_matrix(20, 6, 7, 2.5);
    auto r = eval::pca_reduce(x, 6);
    auto eig = covariance_eigenvalues(x);
    double total = 0;
    for (double e : eig) total += e;
    REQUIRE(r.k == 6);
    for (int c = 0; c < 6; ++c)
        CHECK(r.ratios[static_cast<size_t>(c)] ==
              doctest::Approx(eig[static_cast<size_t>(c)] / total).epsilon(1e-8));
    double sum = 0;
    for (double v : r.ratios) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("pca components are orthonormal with the sign convention") {
    auto x = random_matrix(15, 8, 99);
    auto r = eval::pca_reduce(x, 4);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            double dot = 0;
            for (int j = 0; j < 8; ++j)
                dot += r.components.v[static_cast<size_t>(a) * 8 + j] *
                       r.components.v[static_cast<size_t>(b) * 8 + j];
            CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-8));
        }
    for (int a = 0; a < 4; ++a) {
        double best = 0;
        for (int j = 0; j < 8; ++j) {
            const double v = r.components.v[static_cast<size_t>(a) * 8 + j];
            if (std::abs(v) > std::abs(best)) best = v;
        }
        CHECK(best > 0);
    }
}

TEST_CASE("pca saturates k at the sample rank") {
    auto x = random_matrix(3, 10, 5);
    auto r = eval::pca_reduce(x, 5);
    CHECK(r.k == 2); // n-1
    CHECK(r.y.shape == std::vector<int>{3, 2});
    CHECK(r.components.shape == std::vector<int>{2, 10});
    double sum = 0;
    for (double v : r.ratios) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9)); // k covers the whole rank
    CHECK_THROWS_AS(eval::pca_reduce(x, 0), ValidationError);
    CHECK_THROWS_AS(eval::pca_reduce(random_matrix(1, 4, 1), 1), ValidationError);
}

TEST_CASE("tsne keeps duplicated inputs together") {
    auto x = random_matrix(40, 6, 13);
    // Make rows 4 and 21 identical.
    for (int j = 0; j < 6; ++j) x.v[static_cast<size_t>(21) * 6 + j] = x.v[static_cast<size_t>(4) * 6 + j];
    eval::TsneOptions opt;
    opt.out_dim = 2;
    opt.perplexity = 8.0;
    opt.iters = 400;
    opt.seed = 3;
    auto y = eval::tsne_embed(x, opt);
    REQUIRE(y.shape == std::vector<int>{40, 2});
    double diam = 0;
    for (int i = 0; i < 40; ++i)
        for (int j = i + 1; j < 40; ++j) diam = std::max(diam, row_dist(y, i, j));
    // Identical inputs share the strongest affinity: the pair must end up as
    // mutual nearest neighbours, close on the scale of the whole embedding.
    auto nearest = [&](int i) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (int j = 0; j < 40; ++j)
            if (j != i && row_dist(y, i, j) < bd) {
                bd = row_dist(y, i, j);
                best = j;
            }
        return best;
    };
    CHECK(nearest(4) == 21);
    CHECK(nearest(21) == 4);
    CHECK(row_dist(y, 4, 21) < 0.1 * diam);
}

TEST_CASE("tsne separates well-spaced clusters") {
    const int per = 50;
    ad::Tensor<double> x({2 * per, 4});
    Rng rng(29);
    for (int i = 0; i < 2 * per; ++i) {
        const double off = i < per ? 0.0 : 20.0;
        for (int j = 0; j < 4; ++j) x.v[static_cast<size_t>(i) * 4 + j] = rng.normal() + off;
    }
    eval::TsneOptions opt;
    opt.out_dim = 2;
    opt.perplexity = 10.0;
    opt.iters = 500;
    opt.seed = 11;
    auto y = eval::tsne_embed(x, opt);

    // 3-nearest-neighbour purity in the embedding.
    int pure = 0;
    for (int i = 0; i < 2 * per; ++i) {
        std::vector<std::pair<double, int>> d;
        for (int j = 0; j < 2 * per; ++j)
            if (j != i) d.emplace_back(row_dist(y, i, j), j);
        std::partial_sort(d.begin(), d.begin() + 3, d.end());
        int same = 0;
        for (int k = 0; k < 3; ++k)
            if ((d[static_cast<size_t>(k)].second < per) == (i < per)) ++same;
        if (same >= 2) ++pure;
    }
    CHECK(pure >= static_cast<int>(0.95 * 2 * per));
}

TEST_CASE("tsne treats rows symmetrically") {
    // Swapping two input rows and the matching init rows swaps the outputs.
    const int n = 30;
    auto x = random_matrix(n, 5, 17);
    auto init = random_matrix(n, 2, 18, 1e-4);
    eval::TsneOptions opt;
    opt.out_dim = 2;
    opt.perplexity = 6.0;
    // The dynamics are chaotic, so rounding differences grow with iteration
    // count; a short run keeps them far below the tolerance.
    opt.iters = 10;
    opt.seed = 0;
    auto y1 = eval::tsne_embed(x, opt, init);

    auto xs = x;
    auto inits = init;
    for (int j = 0; j < 5; ++j) std::swap(xs.v[3 * 5 + j], xs.v[19 * 5 + j]);
    for (int j = 0; j < 2; ++j) std::swap(inits.v[3 * 2 + j], inits.v[19 * 2 + j]);
    auto y2 = eval::tsne_embed(xs, opt, inits);

    for (int i = 0; i < n; ++i) {
        const int src = i == 3 ? 19 : i == 19 ? 3 : i;
        for (int c = 0; c < 2; ++c)
            CHECK(y2.v[static_cast<size_t>(i) * 2 + c] ==
                  doctest::Approx(y1.v[static_cast<size_t>(src) * 2 + c]).epsilon(1e-8));
    }
}

TEST_CASE("tsne rejects infeasible perplexity") {
    auto x = random_matrix(20, 4, 1);
    eval::TsneOptions opt;
    opt.perplexity = 10.0; // needs n > 30
    CHECK_THROWS_WITH_AS(eval::tsne_embed(x, opt), doctest::Contains("perplexity"),
                         ValidationError);
    opt.perplexity = 0.0;
    CHECK_THROWS_AS(eval::tsne_embed(x, opt), ValidationError);
}

TEST_CASE("tsne is deterministic in the seed") {
    auto x = random_matrix(35, 4, 21);
    eval::TsneOptions opt;
    opt.out_dim = 3;
    opt.perplexity = 8.0;
    opt.iters = 120;
    opt.seed = 5;
    auto y1 = eval::tsne_embed(x, opt);
    auto y2 = eval::tsne_embed(x, opt);
    REQUIRE(y1.shape == y2.shape);
    for (size_t i = 0; i < y1.v.size(); ++i) CHECK(y1.v[i] == y2.v[i]);
    opt.seed = 6;
    auto y3 = eval::tsne_embed(x, opt);
    double diff = 0;
    for (size_t i = 0; i < y1.v.size(); ++i) diff += std::abs(y1.v[i] - y3.v[i]);
    CHECK(diff > 1e-6);
}

TEST_CASE("projection tags synthetic ids and writes both outputs") {
    std::vector<VolumeSequence> ds{tiny_seq("sub-01", 0.0f), tiny_seq("synth-ASD_000", 1.0f),
                                   tiny_seq("sub-02", 2.0f)};
    ad::Tensor<double> coords({3, 3});
    for (int i = 0; i < 9; ++i) coords.v[static_cast<size_t>(i)] = i * 0.5 - 2.0;
    auto proj = eval::make_projection(ds, coords, {0.6, 0.3, 0.1}, "perplexity=30");
    REQUIRE(proj.items.size() == 3);
    CHECK(proj.items[0].source == "real");
    CHECK(proj.items[1].source == "synthetic");
    CHECK(proj.items[2].source == "real");
    CHECK(proj.items[1].subject_id == "synth-ASD_000");
    CHECK(proj.items[1].coords[0] == doctest::Approx(-0.5));
    CHECK(proj.items[1].coords[2] == doctest::Approx(0.5));

    const auto csv = (fs::temp_directory_path() / "fmrigen_proj_test.csv").string();
    eval::write_projection_csv(csv, proj);
    std::ifstream is(csv);
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    CHECK(text.find("perplexity=30") != std::string::npos);
    CHECK(text.find("id,source,x,y,z") != std::string::npos);
    CHECK(text.find("synth-ASD_000,synthetic,") != std::string::npos);
    CHECK(text.find("sub-01,real,") != std::string::npos);
    fs::remove(csv);

    const auto svg = (fs::temp_directory_path() / "fmrigen_proj_test.svg").string();
    eval::write_projection_svg(svg, proj);
    std::ifstream sv(svg);
    REQUIRE(sv.good());
    std::stringstream s2;
    s2 << sv.rdbuf();
    const std::string body = s2.str();
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("#3b6bb3") != std::string::npos); // real
    CHECK(body.find("#e07b39") != std::string::npos); // synthetic
    fs::remove(svg);

    CHECK_THROWS_AS(eval::write_projection_svg(svg, proj, 0, 7), ValidationError);
    ad::Tensor<double> bad({2, 3});
    CHECK_THROWS_AS(eval::make_projection(ds, bad, {}, ""), ValidationError);
}
