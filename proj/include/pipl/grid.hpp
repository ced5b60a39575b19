#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pipl/error.hpp"

namespace pipl {

using Point = std::array<double, 2>;

/// Faces of an interval (Left, Right) or rectangle (all four).
enum class Face { Left, Right, Bottom, Top };

std::string to_string(Face face);
Face face_from_string(const std::string& name);

/// Uniform tensor grid on an interval or rectangle times [0, T].
///
/// Space nodes are numbered x-fastest: node = j * nx + i. Time levels run 0..nt.
class SpaceTimeGrid {
public:
    SpaceTimeGrid() = default;

    static SpaceTimeGrid interval(double lower, double upper, int nx, int nt, double T);
    static SpaceTimeGrid rectangle(Point lower, Point upper, int nx, int ny, int nt, double T);

    int dim() const { return dim_; }
    double lower(int axis) const { return lower_[axis]; }
    double upper(int axis) const { return upper_[axis]; }
    int nodes(int axis) const { return n_[axis]; }
    double spacing(int axis) const { return h_[axis]; }
    int time_steps() const { return nt_; }
    int time_levels() const { return nt_ + 1; }
    double horizon() const { return T_; }
    double dt() const { return dt_; }

    int space_nodes() const { return n_[0] * n_[1]; }
    int node(int i, int j = 0) const { return j * n_[0] + i; }
    std::array<int, 2> indices(int node) const { return {node % n_[0], node / n_[0]}; }
    Point coord(int node) const;
    double time(int level) const;

    bool on_boundary(int node) const;
    std::vector<Face> faces() const;
    Point normal(Face face) const;
    /// Nodes of a face in increasing tangential order (a single node in 1D).
    std::vector<int> face_nodes(Face face) const;
    std::vector<int> boundary_nodes() const;
    std::vector<int> interior_nodes() const;

    /// Stable textual hash of the grid geometry (FNV-1a over the defining parameters).
    std::string digest() const;

    bool operator==(const SpaceTimeGrid& other) const;

private:
    int dim_ = 0;
    Point lower_{0.0, 0.0};
    Point upper_{0.0, 0.0};
    std::array<int, 2> n_{1, 1};
    Point h_{0.0, 0.0};
    int nt_ = 0;
    double T_ = 0.0;
    double dt_ = 0.0;
};

/// A boundary node attached to one face; corners appear once per adjacent face.
struct BoundaryEntry {
    Face face;
    int node;
    bool operator==(const BoundaryEntry&) const = default;
};

/// Selector for a part of the lateral boundary.
class BoundaryPortion {
public:
    enum class Kind { Full, Named, Directional, Neighborhood };

    static BoundaryPortion full();
    /// Explicit node list (the observation set of the stability results).
    static BoundaryPortion named(std::vector<int> nodes, std::string name = "Gamma0");
    /// Faces with sign * (nu . omega) > aperture (>= 0 when aperture == 0).
    static BoundaryPortion directional(std::vector<double> omega, double aperture, int sign);
    static BoundaryPortion neighborhood(std::vector<Face> faces);

    Kind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    const std::vector<double>& omega() const { return omega_; }
    double aperture() const { return aperture_; }
    int sign() const { return sign_; }
    const std::vector<Face>& face_list() const { return faces_; }
    const std::vector<int>& node_list() const { return nodes_; }

    /// Entries ordered face by face, nodes in tangential order.
    std::vector<BoundaryEntry> resolve(const SpaceTimeGrid& grid) const;
    std::string describe() const;

private:
    Kind kind_ = Kind::Full;
    std::string name_ = "full";
    std::vector<double> omega_;
    double aperture_ = 0.0;
    int sign_ = 1;
    std::vector<Face> faces_;
    std::vector<int> nodes_;
};

/// Sorted, duplicate-free node indices of a portion.
std::vector<int> classify_boundary(const SpaceTimeGrid& grid, const BoundaryPortion& portion);

enum class Support { Interior, Initial, Boundary };

/// Discrete function on Q (all nodes x all levels), on Omega (one slice), or on a
/// boundary portion x all levels. Values are time-major.
template <class T>
class BasicField {
public:
    using value_type = T;

    BasicField() = default;

    static BasicField on_q(const SpaceTimeGrid& grid, T fill = T{}) {
        BasicField f;
        f.grid_ = grid;
        f.support_ = Support::Interior;
        f.width_ = grid.space_nodes();
        f.levels_ = grid.time_levels();
        f.values_.assign(static_cast<std::size_t>(f.width_) * f.levels_, fill);
        return f;
    }

    static BasicField on_omega(const SpaceTimeGrid& grid, T fill = T{}) {
        BasicField f;
        f.grid_ = grid;
        f.support_ = Support::Initial;
        f.width_ = grid.space_nodes();
        f.levels_ = 1;
        f.values_.assign(static_cast<std::size_t>(f.width_), fill);
        return f;
    }

    static BasicField on_boundary(const SpaceTimeGrid& grid, std::vector<BoundaryEntry> entries,
                                  T fill = T{}) {
        BasicField f;
        f.grid_ = grid;
        f.support_ = Support::Boundary;
        f.entries_ = std::move(entries);
        f.width_ = static_cast<int>(f.entries_.size());
        f.levels_ = grid.time_levels();
        f.values_.assign(static_cast<std::size_t>(f.width_) * f.levels_, fill);
        return f;
    }

    /// Samples fn(x, t) on every node of Q.
    static BasicField sample_q(const SpaceTimeGrid& grid, const std::function<T(Point, double)>& fn) {
        auto f = on_q(grid);
        for (int k = 0; k < f.levels_; ++k)
            for (int n = 0; n < f.width_; ++n) f.at(k, n) = fn(grid.coord(n), grid.time(k));
        return f;
    }

    static BasicField sample_omega(const SpaceTimeGrid& grid, const std::function<T(Point)>& fn) {
        auto f = on_omega(grid);
        for (int n = 0; n < f.width_; ++n) f.at(0, n) = fn(grid.coord(n));
        return f;
    }

    bool empty() const { return values_.empty(); }
    const SpaceTimeGrid& grid() const { return grid_; }
    Support support() const { return support_; }
    const std::vector<BoundaryEntry>& entries() const { return entries_; }
    int width() const { return width_; }
    int levels() const { return levels_; }

    T& at(int level, int idx) { return values_[static_cast<std::size_t>(level) * width_ + idx]; }
    const T& at(int level, int idx) const {
        return values_[static_cast<std::size_t>(level) * width_ + idx];
    }
    T* level(int k) { return values_.data() + static_cast<std::size_t>(k) * width_; }
    const T* level(int k) const { return values_.data() + static_cast<std::size_t>(k) * width_; }

    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }

    /// Slice at one time level as a field on Omega.
    BasicField slice(int k) const {
        if (support_ != Support::Interior) throw InvalidInput("slice requires a field on Q");
        auto f = on_omega(grid_);
        std::copy(level(k), level(k) + width_, f.values_.begin());
        return f;
    }

    BasicField& operator+=(const BasicField& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    BasicField& operator-=(const BasicField& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    BasicField& operator*=(T s) {
        for (auto& v : values_) v *= s;
        return *this;
    }
    friend BasicField operator+(BasicField a, const BasicField& b) { return a += b; }
    friend BasicField operator-(BasicField a, const BasicField& b) { return a -= b; }
    friend BasicField operator*(T s, BasicField a) { return a *= s; }

    /// this += s * o
    void axpy(T s, const BasicField& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : values_) m = std::max(m, static_cast<double>(std::abs(v)));
        return m;
    }

private:
    void check_same(const BasicField& o) const {
        if (o.values_.size() != values_.size() || o.support_ != support_)
            throw InvalidInput("field shape mismatch");
    }

    SpaceTimeGrid grid_;
    Support support_ = Support::Interior;
    std::vector<BoundaryEntry> entries_;
    int width_ = 0;
    int levels_ = 0;
    std::vector<T> values_;
};

using Field = BasicField<double>;
using ComplexField = BasicField<std::complex<double>>;

enum class NormSpace { L2Q, L2Omega, L2Sigma };

/// Trapezoid weights of the space nodes (product rule; 1 per node in the degenerate axis).
std::vector<double> space_weights(const SpaceTimeGrid& grid);
/// Trapezoid weights of the time levels.
std::vector<double> time_weights(const SpaceTimeGrid& grid);
/// Surface weights of boundary entries: trapezoid along each face over contiguous runs
/// (counting measure in 1D).
std::vector<double> boundary_weights(const SpaceTimeGrid& grid,
                                     const std::vector<BoundaryEntry>& entries);

double norm(const Field& field, NormSpace space);
double norm(const ComplexField& field, NormSpace space);

/// Quadrature of a * conj(b) (real part for real fields) over the support of the fields.
double inner(const Field& a, const Field& b);
std::complex<double> inner(const ComplexField& a, const ComplexField& b);
/// Quadrature of a * b without conjugation.
std::complex<double> integrate(const ComplexField& f);
double integrate(const Field& f);

/// CSV serialization: `# shape: nx[,ny],nlevels` then one block per level.
void write_field_csv(std::ostream& out, const Field& field);
/// Reads values written by write_field_csv; the grid fixes the support (Q or Omega by level count).
Field read_field_csv(std::istream& in, const SpaceTimeGrid& grid);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a(const std::string& text);

}  // namespace pipl
