#include "pipl/grid.hpp"

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace pipl {

std::string to_string(Face face) {
    switch (face) {
    case Face::Left: return "left";
    case Face::Right: return "right";
    case Face::Bottom: return "bottom";
    case Face::Top: return "top";
    }
    return "?";
}

Face face_from_string(const std::string& name) {
    if (name == "left") return Face::Left;
    if (name == "right") return Face::Right;
    if (name == "bottom") return Face::Bottom;
    if (name == "top") return Face::Top;
    throw InvalidInput("unknown face '" + name + "'");
}

SpaceTimeGrid SpaceTimeGrid::interval(double lower, double upper, int nx, int nt, double T) {
    if (nx < 3) throw InvalidInput("interval grid needs at least 3 nodes");
    if (nt < 2) throw InvalidInput("grid needs at least 2 time steps");
    if (!(upper > lower)) throw InvalidInput("interval needs upper > lower");
    if (!(T > 0.0)) throw InvalidInput("horizon must be positive");
    SpaceTimeGrid g;
    g.dim_ = 1;
    g.lower_ = {lower, 0.0};
    g.upper_ = {upper, 0.0};
    g.n_ = {nx, 1};
    g.h_ = {(upper - lower) / (nx - 1), 0.0};
    g.nt_ = nt;
    g.T_ = T;
    g.dt_ = T / nt;
    return g;
}

SpaceTimeGrid SpaceTimeGrid::rectangle(Point lower, Point upper, int nx, int ny, int nt, double T) {
    if (nx < 3 || ny < 3) throw InvalidInput("rectangle grid needs at least 3 nodes per axis");
    if (nt < 2) throw InvalidInput("grid needs at least 2 time steps");
    if (!(upper[0] > lower[0]) || !(upper[1] > lower[1]))
        throw InvalidInput("rectangle needs upper > lower on both axes");
    if (!(T > 0.0)) throw InvalidInput("horizon must be positive");
    SpaceTimeGrid g;
    g.dim_ = 2;
    g.lower_ = lower;
    g.upper_ = upper;
    g.n_ = {nx, ny};
    g.h_ = {(upper[0] - lower[0]) / (nx - 1), (upper[1] - lower[1]) / (ny - 1)};
    g.nt_ = nt;
    g.T_ = T;
    g.dt_ = T / nt;
    return g;
}

Point SpaceTimeGrid::coord(int node) const {
    auto [i, j] = indices(node);
    Point p{lower_[0] + i * h_[0], 0.0};
    if (dim_ == 2) p[1] = lower_[1] + j * h_[1];
    return p;
}

double SpaceTimeGrid::time(int level) const { return level == nt_ ? T_ : level * dt_; }

bool SpaceTimeGrid::on_boundary(int node) const {
    auto [i, j] = indices(node);
    if (i == 0 || i == n_[0] - 1) return true;
    return dim_ == 2 && (j == 0 || j == n_[1] - 1);
}

std::vector<Face> SpaceTimeGrid::faces() const {
    if (dim_ == 1) return {Face::Left, Face::Right};
    return {Face::Left, Face::Right, Face::Bottom, Face::Top};
}

Point SpaceTimeGrid::normal(Face face) const {
    switch (face) {
    case Face::Left: return {-1.0, 0.0};
    case Face::Right: return {1.0, 0.0};
    case Face::Bottom: return {0.0, -1.0};
    case Face::Top: return {0.0, 1.0};
    }
    return {0.0, 0.0};
}

std::vector<int> SpaceTimeGrid::face_nodes(Face face) const {
    std::vector<int> out;
    if (dim_ == 1) {
        if (face == Face::Left) return {0};
        if (face == Face::Right) return {n_[0] - 1};
        throw InvalidInput("1D grid has only left/right faces");
    }
    switch (face) {
    case Face::Left:
        for (int j = 0; j < n_[1]; ++j) out.push_back(node(0, j));
        break;
    case Face::Right:
        for (int j = 0; j < n_[1]; ++j) out.push_back(node(n_[0] - 1, j));
        break;
    case Face::Bottom:
        for (int i = 0; i < n_[0]; ++i) out.push_back(node(i, 0));
        break;
    case Face::Top:
        for (int i = 0; i < n_[0]; ++i) out.push_back(node(i, n_[1] - 1));
        break;
    }
    return out;
}

std::vector<int> SpaceTimeGrid::boundary_nodes() const {
    std::vector<int> out;
    for (int n = 0; n < space_nodes(); ++n)
        if (on_boundary(n)) out.push_back(n);
    return out;
}

std::vector<int> SpaceTimeGrid::interior_nodes() const {
    std::vector<int> out;
    for (int n = 0; n < space_nodes(); ++n)
        if (!on_boundary(n)) out.push_back(n);
    return out;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string SpaceTimeGrid::digest() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d|%.17g,%.17g|%.17g,%.17g|%d,%d|%d|%.17g", dim_, lower_[0],
                  lower_[1], upper_[0], upper_[1], n_[0], n_[1], nt_, T_);
    char out[32];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(fnv1a(buf)));
    return out;
}

bool SpaceTimeGrid::operator==(const SpaceTimeGrid& o) const {
    return dim_ == o.dim_ && lower_ == o.lower_ && upper_ == o.upper_ && n_ == o.n_ &&
           nt_ == o.nt_ && T_ == o.T_;
}

BoundaryPortion BoundaryPortion::full() { return BoundaryPortion{}; }

BoundaryPortion BoundaryPortion::named(std::vector<int> nodes, std::string name) {
    if (nodes.empty()) throw InvalidInput("named boundary portion needs at least one node");
    BoundaryPortion p;
    p.kind_ = Kind::Named;
    p.name_ = std::move(name);
    p.nodes_ = std::move(nodes);
    return p;
}

BoundaryPortion BoundaryPortion::directional(std::vector<double> omega, double aperture, int sign) {
    double len2 = 0.0;
    for (double w : omega) len2 += w * w;
    if (omega.empty() || omega.size() > 2 || std::abs(std::sqrt(len2) - 1.0) > 1e-12)
        throw InvalidInput("direction omega must be a unit vector");
    if (!(aperture >= 0.0)) throw InvalidInput("aperture must be nonnegative");
    if (sign != 1 && sign != -1) throw InvalidInput("sign must be +1 or -1");
    BoundaryPortion p;
    p.kind_ = Kind::Directional;
    p.name_ = sign > 0 ? "directional+" : "directional-";
    p.omega_ = std::move(omega);
    p.aperture_ = aperture;
    p.sign_ = sign;
    return p;
}

BoundaryPortion BoundaryPortion::neighborhood(std::vector<Face> faces) {
    if (faces.empty()) throw InvalidInput("neighborhood needs at least one face");
    BoundaryPortion p;
    p.kind_ = Kind::Neighborhood;
    p.name_ = "neighborhood";
    p.faces_ = std::move(faces);
    return p;
}

std::vector<BoundaryEntry> BoundaryPortion::resolve(const SpaceTimeGrid& grid) const {
    std::vector<BoundaryEntry> out;
    auto add_face = [&](Face f) {
        for (int n : grid.face_nodes(f)) out.push_back({f, n});
    };
    switch (kind_) {
    case Kind::Full:
        for (Face f : grid.faces()) add_face(f);
        break;
    case Kind::Neighborhood:
        for (Face f : grid.faces())
            if (std::find(faces_.begin(), faces_.end(), f) != faces_.end()) add_face(f);
        break;
    case Kind::Directional: {
        if (static_cast<int>(omega_.size()) != grid.dim())
            throw InvalidInput("direction omega has wrong dimension");
        for (Face f : grid.faces()) {
            Point nu = grid.normal(f);
            double s = sign_ * (nu[0] * omega_[0] + (grid.dim() == 2 ? nu[1] * omega_[1] : 0.0));
            bool take = aperture_ == 0.0 ? s >= 0.0 : s > aperture_;
            if (take) add_face(f);
        }
        break;
    }
    case Kind::Named: {
        std::set<int> wanted(nodes_.begin(), nodes_.end());
        for (int n : nodes_)
            if (n < 0 || n >= grid.space_nodes() || !grid.on_boundary(n))
                throw InvalidInput("named portion contains non-boundary node " + std::to_string(n));
        for (Face f : grid.faces())
            for (int n : grid.face_nodes(f))
                if (wanted.count(n)) out.push_back({f, n});
        break;
    }
    }
    return out;
}

std::string BoundaryPortion::describe() const {
    std::ostringstream s;
    switch (kind_) {
    case Kind::Full: s << "full"; break;
    case Kind::Named:
        s << name_ << "[" << nodes_.size() << " nodes]";
        break;
    case Kind::Directional:
        s << "directional(omega=(";
        for (std::size_t i = 0; i < omega_.size(); ++i) s << (i ? "," : "") << omega_[i];
        s << "),eps=" << aperture_ << ",sign=" << (sign_ > 0 ? "+" : "-") << ")";
        break;
    case Kind::Neighborhood:
        s << "neighborhood(";
        for (std::size_t i = 0; i < faces_.size(); ++i) s << (i ? "," : "") << to_string(faces_[i]);
        s << ")";
        break;
    }
    return s.str();
}

std::vector<int> classify_boundary(const SpaceTimeGrid& grid, const BoundaryPortion& portion) {
    std::set<int> nodes;
    for (const auto& e : portion.resolve(grid)) nodes.insert(e.node);
    return {nodes.begin(), nodes.end()};
}

namespace {

std::vector<double> trapezoid(int n, double h) {
    std::vector<double> w(n, h);
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
}

}  // namespace

std::vector<double> space_weights(const SpaceTimeGrid& grid) {
    auto wx = trapezoid(grid.nodes(0), grid.spacing(0));
    std::vector<double> wy = grid.dim() == 2 ? trapezoid(grid.nodes(1), grid.spacing(1))
                                             : std::vector<double>{1.0};
    std::vector<double> w(grid.space_nodes());
    for (int n = 0; n < grid.space_nodes(); ++n) {
        auto [i, j] = grid.indices(n);
        w[n] = wx[i] * wy[j];
    }
    return w;
}

std::vector<double> time_weights(const SpaceTimeGrid& grid) {
    return trapezoid(grid.time_levels(), grid.dt());
}

std::vector<double> boundary_weights(const SpaceTimeGrid& grid,
                                     const std::vector<BoundaryEntry>& entries) {
    std::vector<double> w(entries.size(), 0.0);
    if (grid.dim() == 1) {
        std::fill(w.begin(), w.end(), 1.0);
        return w;
    }
    // Position of each node along its face, and membership per face.
    std::map<Face, std::set<int>> present;
    auto position = [&](const BoundaryEntry& e) {
        auto [i, j] = grid.indices(e.node);
        return (e.face == Face::Left || e.face == Face::Right) ? j : i;
    };
    for (const auto& e : entries) present[e.face].insert(position(e));
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        double h = (e.face == Face::Left || e.face == Face::Right) ? grid.spacing(1) : grid.spacing(0);
        int p = position(e);
        const auto& s = present[e.face];
        if (s.count(p - 1)) w[k] += 0.5 * h;
        if (s.count(p + 1)) w[k] += 0.5 * h;
    }
    return w;
}

namespace {

template <class T, class Acc>
void quadrature(const BasicField<T>& f, Acc&& acc) {
    const auto& grid = f.grid();
    std::vector<double> ws;
    switch (f.support()) {
    case Support::Interior:
    case Support::Initial: ws = space_weights(grid); break;
    case Support::Boundary: ws = boundary_weights(grid, f.entries()); break;
    }
    std::vector<double> wt = f.levels() == 1 ? std::vector<double>{1.0} : time_weights(grid);
    for (int k = 0; k < f.levels(); ++k)
        for (int n = 0; n < f.width(); ++n) acc(wt[k] * ws[n], k, n);
}

Support required(NormSpace space) {
    switch (space) {
    case NormSpace::L2Q: return Support::Interior;
    case NormSpace::L2Omega: return Support::Initial;
    case NormSpace::L2Sigma: return Support::Boundary;
    }
    return Support::Interior;
}

template <class T>
double norm_impl(const BasicField<T>& f, NormSpace space) {
    if (f.support() != required(space)) throw InvalidInput("norm space does not match field support");
    double s = 0.0;
    quadrature(f, [&](double w, int k, int n) { s += w * std::norm(f.at(k, n)); });
    return std::sqrt(s);
}

}  // namespace

double norm(const Field& field, NormSpace space) { return norm_impl(field, space); }
double norm(const ComplexField& field, NormSpace space) { return norm_impl(field, space); }

double inner(const Field& a, const Field& b) {
    if (a.values().size() != b.values().size()) throw InvalidInput("inner product shape mismatch");
    double s = 0.0;
    quadrature(a, [&](double w, int k, int n) { s += w * a.at(k, n) * b.at(k, n); });
    return s;
}

std::complex<double> inner(const ComplexField& a, const ComplexField& b) {
    if (a.values().size() != b.values().size()) throw InvalidInput("inner product shape mismatch");
    std::complex<double> s = 0.0;
    quadrature(a, [&](double w, int k, int n) { s += w * a.at(k, n) * std::conj(b.at(k, n)); });
    return s;
}

std::complex<double> integrate(const ComplexField& f) {
    std::complex<double> s = 0.0;
    quadrature(f, [&](double w, int k, int n) { s += w * f.at(k, n); });
    return s;
}

double integrate(const Field& f) {
    double s = 0.0;
    quadrature(f, [&](double w, int k, int n) { s += w * f.at(k, n); });
    return s;
}

void write_field_csv(std::ostream& out, const Field& field) {
    if (field.support() == Support::Boundary)
        throw InvalidInput("boundary fields are written as measurement CSV");
    const auto& g = field.grid();
    out << "# shape: " << g.nodes(0);
    if (g.dim() == 2) out << "," << g.nodes(1);
    out << "," << field.levels() << "\n";
    char buf[32];
    for (int k = 0; k < field.levels(); ++k) {
        if (k) out << "\n";
        for (int j = 0; j < g.nodes(1); ++j) {
            for (int i = 0; i < g.nodes(0); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", field.at(k, g.node(i, j)));
                out << (i ? "," : "") << buf;
            }
            out << "\n";
        }
    }
}

Field read_field_csv(std::istream& in, const SpaceTimeGrid& grid) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# shape:", 0) != 0)
        throw InvalidInput("field CSV must start with '# shape:' header");
    std::vector<int> shape;
    std::stringstream hs(line.substr(8));
    for (std::string tok; std::getline(hs, tok, ',');) shape.push_back(std::stoi(tok));
    if (static_cast<int>(shape.size()) != grid.dim() + 1 || shape[0] != grid.nodes(0) ||
        (grid.dim() == 2 && shape[1] != grid.nodes(1)))
        throw InvalidInput("field CSV shape does not match grid");
    int levels = shape.back();
    Field f;
    if (levels == 1) f = Field::on_omega(grid);
    else if (levels == grid.time_levels()) f = Field::on_q(grid);
    else throw InvalidInput("field CSV level count does not match grid");
    int k = 0, j = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            if (j != 0) {
                ++k;
                j = 0;
            }
            continue;
        }
        if (k >= levels || j >= grid.nodes(1)) throw InvalidInput("field CSV has too many rows");
        std::stringstream rs(line);
        int i = 0;
        for (std::string tok; std::getline(rs, tok, ',');) {
            if (i >= grid.nodes(0)) throw InvalidInput("field CSV row too long");
            f.at(k, grid.node(i, j)) = std::stod(tok);
            ++i;
        }
        if (i != grid.nodes(0)) throw InvalidInput("field CSV row too short");
        if (++j == grid.nodes(1)) {
            ++k;
            j = 0;
        }
    }
    if (k != levels) throw InvalidInput("field CSV has too few rows");
    return f;
}

}  // namespace pipl
