#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "detail.hpp"
#include "pipl/recon.hpp"

namespace pipl {

namespace detail {

std::vector<Field> cosine_basis(const SpaceTimeGrid& grid, int mx, int mt) {
    if (mx < 0 || mt < 0) throw InvalidInput("mode counts must be nonnegative");
    const double pi = std::numbers::pi, T = grid.horizon();
    const int my = grid.dim() == 2 ? mx : 0;
    std::vector<Field> out;
    for (int k = 0; k <= mt; ++k)
        for (int jy = 0; jy <= my; ++jy)
            for (int jx = 0; jx <= mx; ++jx)
                out.push_back(Field::sample_q(grid, [&](Point x, double t) {
                    double v = std::cos(jx * pi * (x[0] - grid.lower(0)) / (grid.upper(0) - grid.lower(0)));
                    if (grid.dim() == 2)
                        v *= std::cos(jy * pi * (x[1] - grid.lower(1)) / (grid.upper(1) - grid.lower(1)));
                    return v * std::cos(k * pi * t / T);
                }));
    return out;
}

Eigen::VectorXd tikhonov(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double alpha_rel, double* alpha_abs) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    double smax = s.size() ? s(0) : 0.0;
    double alpha = alpha_rel * smax * smax;
    if (alpha_abs) *alpha_abs = alpha;
    Eigen::VectorXd ub = svd.matrixU().transpose() * b;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(A.cols());
    for (int i = 0; i < s.size(); ++i) {
        double d = s(i) * s(i) + alpha;
        if (d > 0.0) c += (s(i) / d) * ub(i) * svd.matrixV().col(i);
    }
    return c;
}

std::vector<double> sigma_weights(const SpaceTimeGrid& grid, const std::vector<BoundaryEntry>& entries) {
    auto bw = boundary_weights(grid, entries);
    auto tw = time_weights(grid);
    std::vector<double> w(bw.size() * tw.size());
    for (std::size_t k = 0; k < tw.size(); ++k)
        for (std::size_t e = 0; e < bw.size(); ++e) w[k * bw.size() + e] = tw[k] * bw[e];
    return w;
}

std::vector<double> q_weights(const SpaceTimeGrid& grid) {
    auto sw = space_weights(grid);
    auto tw = time_weights(grid);
    std::vector<double> w(sw.size() * tw.size());
    for (std::size_t k = 0; k < tw.size(); ++k)
        for (std::size_t n = 0; n < sw.size(); ++n) w[k * sw.size() + n] = tw[k] * sw[n];
    return w;
}

void cgls(const LinearMap& B, const LinearMap& Bt, const Eigen::VectorXd& y, double alpha, int iterations,
          Eigen::VectorXd& x, const std::function<void(double)>& monitor) {
    using Vec = Eigen::VectorXd;
    Vec r = y - B(x);
    Vec s = Bt(r) - alpha * x;
    Vec p = s;
    double gamma = s.squaredNorm();
    const double stop = 1e-24 * Bt(y).squaredNorm();
    for (int it = 0; it < iterations && gamma > stop; ++it) {
        Vec q = B(p);
        double delta = q.squaredNorm() + alpha * p.squaredNorm();
        if (!(delta > 0.0)) break;
        double a = gamma / delta;
        x += a * p;
        r -= a * q;
        if (monitor) monitor(r.norm());
        s = Bt(r) - alpha * x;
        double gn = s.squaredNorm();
        p = s + (gn / gamma) * p;
        gamma = gn;
    }
}

double largest_eigenvalue(const LinearMap& B, const LinearMap& Bt, Eigen::Index cols, int iterations) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(cols);
    double lam = 0.0;
    for (int i = 0; i < iterations; ++i) {
        double nv = v.norm();
        if (nv == 0.0) return 0.0;
        v /= nv;
        Eigen::VectorXd w = Bt(B(v));
        lam = v.dot(w);
        v = std::move(w);
    }
    return lam;
}

Field normal_derivative_transpose(const SpaceTimeGrid& grid, const std::vector<BoundaryEntry>& entries,
                                  const std::vector<double>& values) {
    Field out = Field::on_q(grid);
    const std::size_t E = entries.size();
    for (std::size_t e = 0; e < E; ++e) {
        int s = 0;
        double inv = 0.0;
        switch (entries[e].face) {
        case Face::Left: s = 1; inv = 1.0 / (2.0 * grid.spacing(0)); break;
        case Face::Right: s = -1; inv = 1.0 / (2.0 * grid.spacing(0)); break;
        case Face::Bottom: s = grid.nodes(0); inv = 1.0 / (2.0 * grid.spacing(1)); break;
        case Face::Top: s = -grid.nodes(0); inv = 1.0 / (2.0 * grid.spacing(1)); break;
        }
        const int b = entries[e].node;
        for (int k = 0; k < grid.time_levels(); ++k) {
            double v = values[static_cast<std::size_t>(k) * E + e] * inv;
            out.at(k, b) += 3.0 * v;
            out.at(k, b + s) -= 4.0 * v;
            out.at(k, b + 2 * s) += v;
        }
    }
    return out;
}

}  // namespace detail

double relative_error(const Field& estimate, const Field& truth) {
    NormSpace sp = truth.support() == Support::Interior  ? NormSpace::L2Q
                   : truth.support() == Support::Initial ? NormSpace::L2Omega
                                                         : NormSpace::L2Sigma;
    double d = norm(estimate - truth, sp), r = norm(truth, sp);
    return r > 0.0 ? d / r : d;
}

nlohmann::json result_json(const ReconstructionResult& r) {
    nlohmann::json j;
    j["residuals"] = r.residuals;
    j["regularization"] = {{"method", r.regularization.method},
                           {"parameter", r.regularization.parameter},
                           {"rule", r.regularization.rule}};
    j["converged"] = r.converged;
    if (r.has_truth) j["truth_relative_error"] = r.truth_error;
    j["masked_nodes"] = r.masked.size();
    j["notes"] = r.notes;
    return j;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw InvalidInput("rank correlation needs two equal-length samples");
    auto ra = ranks(a), rb = ranks(b);
    double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
    double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace pipl
