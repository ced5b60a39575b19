#include "operator.hpp"

#include <cmath>

namespace pipl::detail {

namespace {

bool has_cross_term(const DiffusionTensor& gamma) {
    double v;
    return !(gamma.entry(0, 1).is_constant(&v) && v == 0.0);
}

}  // namespace

template <class S>
Stencil<S> assemble(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, std::array<S, 2> drift,
                    double t) {
    Stencil<S> st;
    st.start.push_back(0);
    auto push = [&](int col, S v) {
        st.cols.push_back(col);
        st.vals.push_back(v);
    };
    const bool iso = gamma.is_identity();
    if (grid.dim() == 1) {
        const double h = grid.spacing(0);
        const double ih2 = 1.0 / (h * h);
        for (int i = 1; i < grid.nodes(0) - 1; ++i) {
            double gw = 1.0, ge = 1.0;
            if (!iso) {
                double x = grid.coord(i)[0];
                gw = gamma.at({x - 0.5 * h, 0.0}, t)[0];
                ge = gamma.at({x + 0.5 * h, 0.0}, t)[0];
            }
            st.rows.push_back(i);
            push(i - 1, S(-gw * ih2) + drift[0] / (2.0 * h));
            push(i, S((gw + ge) * ih2));
            push(i + 1, S(-ge * ih2) - drift[0] / (2.0 * h));
            st.start.push_back(static_cast<int>(st.cols.size()));
        }
        return st;
    }
    const double hx = grid.spacing(0), hy = grid.spacing(1);
    const double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy), ixy = 1.0 / (4.0 * hx * hy);
    const bool cross = !iso && has_cross_term(gamma);
    for (int j = 1; j < grid.nodes(1) - 1; ++j) {
        for (int i = 1; i < grid.nodes(0) - 1; ++i) {
            Point p = grid.coord(grid.node(i, j));
            double gw = 1.0, ge = 1.0, gs = 1.0, gn = 1.0;
            if (!iso) {
                gw = gamma.at({p[0] - 0.5 * hx, p[1]}, t)[0];
                ge = gamma.at({p[0] + 0.5 * hx, p[1]}, t)[0];
                gs = gamma.at({p[0], p[1] - 0.5 * hy}, t)[2];
                gn = gamma.at({p[0], p[1] + 0.5 * hy}, t)[2];
            }
            st.rows.push_back(grid.node(i, j));
            if (cross) {
                double ce = gamma.at(grid.coord(grid.node(i + 1, j)), t)[1];
                double cw = gamma.at(grid.coord(grid.node(i - 1, j)), t)[1];
                double cn = gamma.at(grid.coord(grid.node(i, j + 1)), t)[1];
                double cs = gamma.at(grid.coord(grid.node(i, j - 1)), t)[1];
                push(grid.node(i - 1, j - 1), S(-(cw + cs) * ixy));
                push(grid.node(i + 1, j - 1), S((ce + cs) * ixy));
                push(grid.node(i - 1, j + 1), S((cw + cn) * ixy));
                push(grid.node(i + 1, j + 1), S(-(ce + cn) * ixy));
            }
            push(grid.node(i, j - 1), S(-gs * ihy2) + drift[1] / (2.0 * hy));
            push(grid.node(i - 1, j), S(-gw * ihx2) + drift[0] / (2.0 * hx));
            push(grid.node(i, j), S((gw + ge) * ihx2 + (gs + gn) * ihy2));
            push(grid.node(i + 1, j), S(-ge * ihx2) - drift[0] / (2.0 * hx));
            push(grid.node(i, j + 1), S(-gn * ihy2) - drift[1] / (2.0 * hy));
            st.start.push_back(static_cast<int>(st.cols.size()));
        }
    }
    return st;
}

template <class S>
void StepMatrix<S>::factor(const SpaceTimeGrid& grid, const Stencil<S>& L, double c, const double* q,
                           int level) {
    dim_ = grid.dim();
    const int N = grid.space_nodes();
    if (dim_ == 1) {
        lower_.assign(N, S{});
        diag_.assign(N, S(1.0));
        upper_.assign(N, S{});
        for (std::size_t r = 0; r < L.rows.size(); ++r) {
            int i = L.rows[r];
            for (int p = L.start[r]; p < L.start[r + 1]; ++p) {
                int col = L.cols[p];
                S v = c * L.vals[p];
                if (col == i - 1) lower_[i] = v;
                else if (col == i) diag_[i] += v;
                else upper_[i] = v;
            }
            if (q) diag_[i] += c * q[i];
        }
        for (int i = 1; i < N; ++i) {
            S piv = diag_[i - 1];
            if (std::abs(piv) == 0.0 || !std::isfinite(std::abs(piv)))
                throw SolverError("singular step system", level);
            lower_[i] /= piv;
            diag_[i] -= lower_[i] * upper_[i - 1];
        }
        if (std::abs(diag_[N - 1]) == 0.0 || !std::isfinite(std::abs(diag_[N - 1])))
            throw SolverError("singular step system", level);
        return;
    }
    std::vector<Eigen::Triplet<S>> trip;
    trip.reserve(L.vals.size() + N);
    std::vector<char> interior(N, 0);
    for (std::size_t r = 0; r < L.rows.size(); ++r) {
        int i = L.rows[r];
        interior[i] = 1;
        for (int p = L.start[r]; p < L.start[r + 1]; ++p) trip.emplace_back(i, L.cols[p], c * L.vals[p]);
        trip.emplace_back(i, i, S(1.0) + (q ? S(c * q[i]) : S{}));
    }
    for (int i = 0; i < N; ++i)
        if (!interior[i]) trip.emplace_back(i, i, S(1.0));
    Eigen::SparseMatrix<S> A(N, N);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<S>, Eigen::COLAMDOrdering<int>>>();
    lu_->analyzePattern(A);
    lu_->factorize(A);
    if (lu_->info() != Eigen::Success) throw SolverError("singular step system", level);
}

template <class S>
void StepMatrix<S>::solve(std::vector<S>& r) const {
    const int N = static_cast<int>(r.size());
    if (dim_ == 1) {
        for (int i = 1; i < N; ++i) r[i] -= lower_[i] * r[i - 1];
        r[N - 1] /= diag_[N - 1];
        for (int i = N - 2; i >= 0; --i) r[i] = (r[i] - upper_[i] * r[i + 1]) / diag_[i];
        return;
    }
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> b(r.data(), N);
    Eigen::Matrix<S, Eigen::Dynamic, 1> x = lu_->solve(b);
    b = x;
}

template <class S>
void StepMatrix<S>::solve_transpose(std::vector<S>& r) const {
    const int N = static_cast<int>(r.size());
    if (dim_ == 1) {
        r[0] /= diag_[0];
        for (int i = 1; i < N; ++i) r[i] = (r[i] - upper_[i - 1] * r[i - 1]) / diag_[i];
        for (int i = N - 2; i >= 0; --i) r[i] -= lower_[i + 1] * r[i + 1];
        return;
    }
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> b(r.data(), N);
    Eigen::Matrix<S, Eigen::Dynamic, 1> x = lu_->transpose().solve(b);
    b = x;
}

template struct Stencil<double>;
template struct Stencil<std::complex<double>>;
template Stencil<double> assemble(const SpaceTimeGrid&, const DiffusionTensor&, std::array<double, 2>,
                                  double);
template Stencil<std::complex<double>> assemble(const SpaceTimeGrid&, const DiffusionTensor&,
                                                std::array<std::complex<double>, 2>, double);
template class StepMatrix<double>;
template class StepMatrix<std::complex<double>>;

}  // namespace pipl::detail
