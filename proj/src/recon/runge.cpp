#include <algorithm>
#include <cmath>
#include <numbers>

#include "detail.hpp"
#include "pipl/recon.hpp"

namespace pipl {

std::vector<RungeFit> runge_fit(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                                const Field& target, const std::vector<int>& sizes, const RungeOptions& opt) {
    if (sizes.empty()) throw InvalidInput("no basis sizes requested");
    if (target.support() != Support::Interior || !(target.grid() == grid))
        throw InvalidInput("target must be a field on Q of the fitting grid");
    if (!(opt.region_lo < opt.region_hi)) throw InvalidInput("fitting region is empty");
    const int nmax = *std::max_element(sizes.begin(), sizes.end());
    if (*std::min_element(sizes.begin(), sizes.end()) < 1) throw InvalidInput("basis sizes must be positive");

    std::vector<int> nodes = grid.boundary_nodes();
    if (opt.mode == DataMode::Partial) {
        auto banned = classify_boundary(grid, BoundaryPortion::directional(opt.omega, opt.aperture, -1));
        std::erase_if(nodes, [&](int n) { return std::binary_search(banned.begin(), banned.end(), n); });
        if (nodes.empty()) throw InvalidInput("partial mode leaves no boundary node for the data");
    }
    const std::size_t nb = nodes.size();
    const double pi = std::numbers::pi, T = grid.horizon();

    // region rows with quadrature weights
    auto w = detail::q_weights(grid);
    std::vector<std::size_t> rows;
    std::vector<double> wsq;
    for (int k = 0; k < grid.time_levels(); ++k)
        for (int n = 0; n < grid.space_nodes(); ++n) {
            double x = grid.coord(n)[0];
            if (x < opt.region_lo || x > opt.region_hi) continue;
            std::size_t i = static_cast<std::size_t>(k) * grid.space_nodes() + n;
            if (w[i] == 0.0) continue;
            rows.push_back(i);
            wsq.push_back(std::sqrt(w[i]));
        }
    if (rows.empty()) throw InvalidInput("fitting region contains no nodes");

    TangentSolver solver(grid, gamma, q);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), nmax);
    std::vector<Field> data;
    for (int i = 0; i < nmax; ++i) {
        // nested ordering: cycle through the nodes, then raise the temporal mode
        const int node = nodes[static_cast<std::size_t>(i) % nb];
        const int k = i / static_cast<int>(nb) + 1;
        Field f = Field::on_q(grid);
        for (int l = 0; l < grid.time_levels(); ++l) f.at(l, node) = std::sin((k - 0.5) * pi * grid.time(l) / T);
        Field v = solver.forward(nullptr, nullptr, &f);
        for (std::size_t r = 0; r < rows.size(); ++r) A(static_cast<Eigen::Index>(r), i) = wsq[r] * v.values()[rows[r]];
        data.push_back(std::move(f));
    }
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) b(static_cast<Eigen::Index>(r)) = wsq[r] * target.values()[rows[r]];
    const double bn = b.norm();

    std::vector<RungeFit> out;
    for (int N : sizes) {
        RungeFit fit;
        fit.basis_size = N;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A.leftCols(N), Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        Eigen::VectorXd c = Eigen::VectorXd::Zero(N);
        Eigen::VectorXd ub = svd.matrixU().transpose() * b;
        int dropped = 0;
        for (int i = 0; i < s.size(); ++i) {
            if (s(i) > opt.rcond * s(0)) {
                c += (ub(i) / s(i)) * svd.matrixV().col(i);
            } else {
                ++dropped;
            }
        }
        if (dropped > 0) fit.notes.push_back(std::to_string(dropped) + " singular directions truncated");
        Eigen::VectorXd r = A.leftCols(N) * c - b;
        fit.gap = bn > 0.0 ? r.norm() / bn : r.norm();
        fit.data = Field::on_q(grid);
        for (int i = 0; i < N; ++i) fit.data.axpy(c(i), data[static_cast<std::size_t>(i)]);
        out.push_back(std::move(fit));
    }
    return out;
}

}  // namespace pipl
