#include "fmrigen/eval/embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "fmrigen/util/error.hpp"
#include "fmrigen/util/rng.hpp"

namespace fmrigen::eval {

using core::VolumeSequence;

ad::Tensor<double> flatten_for_projection(const std::vector<VolumeSequence>& dataset) {
    if (dataset.empty()) throw ValidationError("flatten_for_projection: dataset is empty");
    const auto& f = dataset.front();
    const int64_t p = static_cast<int64_t>(f.data.size());
    ad::Tensor<double> x({static_cast<int>(dataset.size()), static_cast<int>(p)});
    for (size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset[i];
        if (s.t != f.t || s.d != f.d || s.h != f.h || s.w != f.w)
            throw ValidationError("flatten_for_projection: sequence '" + s.subject_id +
                                  "' has mismatched dims");
        for (int64_t j = 0; j < p; ++j)
            x.v[static_cast<size_t>(i) * static_cast<size_t>(p) + static_cast<size_t>(j)] =
                s.data[static_cast<size_t>(j)];
    }
    return x;
}

namespace {

// Cyclic Jacobi eigensolver for a symmetric matrix stored row-major.
// Eigenvalues land in w, eigenvectors in the columns of v.
void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& w, std::vector<double>& v) {
    v.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
    auto A = [&](int r, int c) -> double& { return a[static_cast<size_t>(r) * n + c]; };
    auto V = [&](int r, int c) -> double& { return v[static_cast<size_t>(r) * n + c]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double app = A(p, p), aqq = A(q, q), apq = A(p, q);
                A(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                A(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                A(p, q) = 0.0;
                A(q, p) = 0.0;
                for (int r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = A(r, p), arq = A(r, q);
                    A(r, p) = c * arp - s * arq;
                    A(p, r) = A(r, p);
                    A(r, q) = s * arp + c * arq;
                    A(q, r) = A(r, q);
                }
                for (int r = 0; r < n; ++r) {
                    const double vrp = V(r, p), vrq = V(r, q);
                    V(r, p) = c * vrp - s * vrq;
                    V(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }
    w.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) w[static_cast<size_t>(i)] = A(i, i);
}

} // namespace

PcaResult pca_reduce(const ad::Tensor<double>& x, int k) {
    if (x.shape.size() != 2) throw ValidationError("pca_reduce expects a 2-D matrix");
    const int n = x.dim(0), p = x.dim(1);
    if (n < 2) throw ValidationError("pca_reduce needs at least 2 rows");
    if (k < 1) throw ValidationError("pca_reduce: k must be >= 1");
    const int kmax = std::min(n - 1, p);
    if (k > kmax) {
        std::cerr << "[pca] requested " << k << " components; only " << kmax
                  << " are identifiable from " << n << " x " << p << " data, using " << kmax
                  << "\n";
        k = kmax;
    }

    PcaResult res;
    res.k = k;
    res.mean.assign(static_cast<size_t>(p), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j)
            res.mean[static_cast<size_t>(j)] += x.v[static_cast<size_t>(i) * p + j];
    for (auto& m : res.mean) m /= static_cast<double>(n);
    std::vector<double> xc(static_cast<size_t>(n) * p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j)
            xc[static_cast<size_t>(i) * p + j] =
                x.v[static_cast<size_t>(i) * p + j] - res.mean[static_cast<size_t>(j)];

    // Gram (snapshot) route: eigenvectors of Xc Xc^T give the scores.
    std::vector<double> gram(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double acc = 0;
            for (int c = 0; c < p; ++c)
                acc += xc[static_cast<size_t>(i) * p + c] * xc[static_cast<size_t>(j) * p + c];
            gram[static_cast<size_t>(i) * n + j] = acc;
            gram[static_cast<size_t>(j) * n + i] = acc;
        }
    double total = 0;
    for (int i = 0; i < n; ++i) total += gram[static_cast<size_t>(i) * n + i];
    total /= static_cast<double>(n - 1); // trace of the sample covariance

    std::vector<double> w, v;
    jacobi_eigen(gram, n, w, v);
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return w[static_cast<size_t>(a)] > w[static_cast<size_t>(b)]; });

    res.y = ad::Tensor<double>({n, k});
    res.components = ad::Tensor<double>({k, p});
    res.ratios.assign(static_cast<size_t>(k), 0.0);
    const double lam_max = std::max(w[static_cast<size_t>(order[0])], 0.0);
    const double lam_tol = lam_max * n * std::numeric_limits<double>::epsilon();
    for (int j = 0; j < k; ++j) {
        const int e = order[static_cast<size_t>(j)];
        const double lam = std::max(w[static_cast<size_t>(e)], 0.0);
        const double sigma = std::sqrt(lam);
        if (lam <= lam_tol) continue; // rank exhausted, scores and ratio stay zero
        res.ratios[static_cast<size_t>(j)] = total > 0 ? (lam / (n - 1)) / total : 0.0;
        // component_j = Xc^T u_j / sigma
        std::vector<double> comp(static_cast<size_t>(p), 0.0);
        for (int i = 0; i < n; ++i) {
            const double u = v[static_cast<size_t>(i) * n + e];
            if (u == 0) continue;
            for (int c = 0; c < p; ++c) comp[static_cast<size_t>(c)] += u * xc[static_cast<size_t>(i) * p + c];
        }
        for (auto& e2 : comp) e2 /= sigma;
        int arg = 0;
        for (int c = 1; c < p; ++c)
            if (std::abs(comp[static_cast<size_t>(c)]) > std::abs(comp[static_cast<size_t>(arg)]))
                arg = c;
        const double flip = comp[static_cast<size_t>(arg)] < 0 ? -1.0 : 1.0;
        for (int c = 0; c < p; ++c)
            res.components.v[static_cast<size_t>(j) * p + c] = flip * comp[static_cast<size_t>(c)];
        for (int i = 0; i < n; ++i)
            res.y.v[static_cast<size_t>(i) * k + j] =
                flip * sigma * v[static_cast<size_t>(i) * n + e];
    }
    return res;
}

namespace {

// Row affinities at the target perplexity via binary search on precision.
std::vector<double> affinities(const std::vector<double>& d2, int n, double perplexity) {
    const double target = std::log(perplexity);
    std::vector<double> p(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> row(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double h = 0;
        for (int it = 0; it < 100; ++it) {
            double sum = 0, dsum = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i) {
                    row[static_cast<size_t>(j)] = 0;
                    continue;
                }
                const double e = std::exp(-beta * d2[static_cast<size_t>(i) * n + j]);
                row[static_cast<size_t>(j)] = e;
                sum += e;
                dsum += d2[static_cast<size_t>(i) * n + j] * e;
            }
            if (sum <= 0) {
                h = 0;
            } else {
                h = std::log(sum) + beta * dsum / sum;
                for (int j = 0; j < n; ++j) row[static_cast<size_t>(j)] /= sum;
            }
            if (std::abs(h - target) < 1e-4) break;
            if (h > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        for (int j = 0; j < n; ++j) p[static_cast<size_t>(i) * n + j] = row[static_cast<size_t>(j)];
    }
    return p;
}

} // namespace

ad::Tensor<double> tsne_embed(const ad::Tensor<double>& x, const TsneOptions& opt,
                              const ad::Tensor<double>& init) {
    if (x.shape.size() != 2) throw ValidationError("tsne_embed expects a 2-D matrix");
    const int n = x.dim(0), k = x.dim(1);
    if (opt.out_dim < 1 || opt.iters < 1 || opt.perplexity <= 0)
        throw ValidationError("tsne_embed: bad options");
    if (static_cast<double>(n) <= 3.0 * opt.perplexity)
        throw ValidationError("tsne_embed: perplexity " + std::to_string(opt.perplexity) +
                              " infeasible for " + std::to_string(n) + " points (need n > 3*perplexity)");
    if (init.shape != std::vector<int>{n, opt.out_dim})
        throw ValidationError("tsne_embed: init must be [n, out_dim]");

    std::vector<double> d2(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double acc = 0;
            for (int c = 0; c < k; ++c) {
                const double d = x.v[static_cast<size_t>(i) * k + c] -
                                 x.v[static_cast<size_t>(j) * k + c];
                acc += d * d;
            }
            d2[static_cast<size_t>(i) * n + j] = acc;
            d2[static_cast<size_t>(j) * n + i] = acc;
        }

    std::vector<double> pcond = affinities(d2, n, opt.perplexity);
    std::vector<double> pj(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            pj[static_cast<size_t>(i) * n + j] = std::max(
                (pcond[static_cast<size_t>(i) * n + j] + pcond[static_cast<size_t>(j) * n + i]) /
                    (2.0 * n),
                i == j ? 0.0 : 1e-12);

    const int od = opt.out_dim;
    ad::Tensor<double> y = init;
    std::vector<double> vel(static_cast<size_t>(n) * od, 0.0);
    std::vector<double> wmat(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> grad(static_cast<size_t>(n) * od, 0.0);
    for (int it = 0; it < opt.iters; ++it) {
        const double exag = it < 250 ? 12.0 : 1.0;
        const double mom = it < 250 ? 0.5 : 0.8;
        double wsum = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double acc = 0;
                for (int c = 0; c < od; ++c) {
                    const double d = y.v[static_cast<size_t>(i) * od + c] -
                                     y.v[static_cast<size_t>(j) * od + c];
                    acc += d * d;
                }
                const double wv = 1.0 / (1.0 + acc);
                wmat[static_cast<size_t>(i) * n + j] = wv;
                wmat[static_cast<size_t>(j) * n + i] = wv;
                wsum += 2.0 * wv;
            }
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double wv = wmat[static_cast<size_t>(i) * n + j];
                const double q = std::max(wv / wsum, 1e-12);
                const double coef =
                    4.0 * (exag * pj[static_cast<size_t>(i) * n + j] - q) * wv;
                for (int c = 0; c < od; ++c)
                    grad[static_cast<size_t>(i) * od + c] +=
                        coef * (y.v[static_cast<size_t>(i) * od + c] -
                                y.v[static_cast<size_t>(j) * od + c]);
            }
        for (size_t e = 0; e < vel.size(); ++e) {
            vel[e] = mom * vel[e] - 200.0 * grad[e];
            y.v[e] += vel[e];
        }
        for (int c = 0; c < od; ++c) {
            double m = 0;
            for (int i = 0; i < n; ++i) m += y.v[static_cast<size_t>(i) * od + c];
            m /= static_cast<double>(n);
            for (int i = 0; i < n; ++i) y.v[static_cast<size_t>(i) * od + c] -= m;
        }
    }
    return y;
}

ad::Tensor<double> tsne_embed(const ad::Tensor<double>& x, const TsneOptions& opt) {
    if (x.shape.size() != 2) throw ValidationError("tsne_embed expects a 2-D matrix");
    ad::Tensor<double> init({x.dim(0), opt.out_dim});
    Rng rng(opt.seed);
    for (auto& e : init.v) e = rng.normal() * 1e-4;
    return tsne_embed(x, opt, init);
}

ProjectionResult make_projection(const std::vector<VolumeSequence>& dataset,
                                 const ad::Tensor<double>& coords,
                                 const std::vector<double>& ratios, const std::string& metadata) {
    if (coords.dim(0) != static_cast<int>(dataset.size()))
        throw ValidationError("make_projection: row count does not match dataset size");
    ProjectionResult out;
    out.pca_ratios = ratios;
    out.metadata = metadata;
    const int k = coords.dim(1);
    for (size_t i = 0; i < dataset.size(); ++i) {
        ProjectionItem item;
        item.subject_id = dataset[i].subject_id;
        item.source = dataset[i].subject_id.rfind("synth-", 0) == 0 ? "synthetic" : "real";
        for (int c = 0; c < std::min(3, k); ++c)
            item.coords[static_cast<size_t>(c)] = coords.v[i * static_cast<size_t>(k) + c];
        out.items.push_back(std::move(item));
    }
    return out;
}

void write_projection_csv(const std::string& path, const ProjectionResult& proj) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write projection CSV '" + path + "'");
    if (!proj.metadata.empty()) os << "# " << proj.metadata << "\n";
    os << "# explained_variance_ratios:";
    for (double r : proj.pca_ratios) {
        char b[32];
        std::snprintf(b, sizeof b, " %.8g", r);
        os << b;
    }
    os << "\nid,source,x,y,z\n";
    char buf[256];
    for (const auto& it : proj.items) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g,%.10g\n", it.subject_id.c_str(),
                      it.source.c_str(), it.coords[0], it.coords[1], it.coords[2]);
        os << buf;
    }
    if (!os) throw IoError("failed writing projection CSV '" + path + "'");
}

void write_projection_svg(const std::string& path, const ProjectionResult& proj, int axis_x,
                          int axis_y) {
    if (axis_x < 0 || axis_x > 2 || axis_y < 0 || axis_y > 2 || axis_x == axis_y)
        throw ValidationError("write_projection_svg: axes must be distinct and in [0,2]");
    double lo_x = 0, hi_x = 1, lo_y = 0, hi_y = 1;
    if (!proj.items.empty()) {
        lo_x = hi_x = proj.items[0].coords[static_cast<size_t>(axis_x)];
        lo_y = hi_y = proj.items[0].coords[static_cast<size_t>(axis_y)];
        for (const auto& it : proj.items) {
            lo_x = std::min(lo_x, it.coords[static_cast<size_t>(axis_x)]);
            hi_x = std::max(hi_x, it.coords[static_cast<size_t>(axis_x)]);
            lo_y = std::min(lo_y, it.coords[static_cast<size_t>(axis_y)]);
            hi_y = std::max(hi_y, it.coords[static_cast<size_t>(axis_y)]);
        }
    }
    if (hi_x <= lo_x) hi_x = lo_x + 1;
    if (hi_y <= lo_y) hi_y = lo_y + 1;
    const double size = 640, margin = 40;
    auto sx = [&](double v) { return margin + (v - lo_x) / (hi_x - lo_x) * (size - 2 * margin); };
    auto sy = [&](double v) {
        return size - margin - (v - lo_y) / (hi_y - lo_y) * (size - 2 * margin);
    };
    std::ofstream os(path);
    if (!os) throw IoError("cannot write scatter SVG '" + path + "'");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
       << "\" viewBox=\"0 0 " << size << " " << size << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& it : proj.items) {
        const char* color = it.source == "synthetic" ? "#e07b39" : "#3b6bb3";
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\" fill-opacity=\"0.7\"/>\n",
                      sx(it.coords[static_cast<size_t>(axis_x)]),
                      sy(it.coords[static_cast<size_t>(axis_y)]), color);
        os << buf;
    }
    os << "<circle cx=\"20\" cy=\"20\" r=\"5\" fill=\"#3b6bb3\"/>"
       << "<text x=\"30\" y=\"25\" font-size=\"14\">real</text>\n"
       << "<circle cx=\"90\" cy=\"20\" r=\"5\" fill=\"#e07b39\"/>"
       << "<text x=\"100\" y=\"25\" font-size=\"14\">synthetic</text>\n"
       << "</svg>\n";
    if (!os) throw IoError("failed writing scatter SVG '" + path + "'");
}

} // namespace fmrigen::eval
