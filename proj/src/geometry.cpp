#include "higgs/geometry.hpp"

#include <cmath>
#include <sstream>

namespace higgs {

TorusGrid::TorusGrid(int n, double length) : n_(n), length_(length) {
    if (n < 8) throw ShapeError("TorusGrid: N must be at least 8, got " + std::to_string(n));
    if (!(length > 0.0) || !std::isfinite(length))
        throw ShapeError("TorusGrid: side length must be positive and finite");
}

const char* to_string(FormDegree d) {
    switch (d) {
        case FormDegree::zero: return "zero";
        case FormDegree::dz: return "dz";
        case FormDegree::dzbar: return "dzbar";
        case FormDegree::top: return "top";
    }
    return "?";
}

FormDegree adjoint_degree(FormDegree d) {
    if (d == FormDegree::dz) return FormDegree::dzbar;
    if (d == FormDegree::dzbar) return FormDegree::dz;
    return d;
}

MatrixField::MatrixField(const TorusGrid& grid, int rank, FormDegree degree)
    : grid_(grid), rank_(rank), degree_(degree) {
    if (rank < 1) throw ShapeError("MatrixField: rank must be >= 1");
    data_.assign(grid.sites() * site_stride(), cplx(0.0));
}

MatrixField MatrixField::constant(const TorusGrid& grid, const Mat& m, FormDegree degree) {
    if (m.rows() != m.cols()) throw ShapeError("MatrixField::constant: matrix not square");
    MatrixField f(grid, int(m.rows()), degree);
    for (std::size_t s = 0; s < f.sites(); ++s) f.set(s, m);
    return f;
}

MatrixField MatrixField::identity(const TorusGrid& grid, int rank, FormDegree degree) {
    return constant(grid, Mat::Identity(rank, rank), degree);
}

Mat MatrixField::at(std::size_t s) const {
    Mat m(rank_, rank_);
    const cplx* p = site(s);
    for (int a = 0; a < rank_; ++a)
        for (int b = 0; b < rank_; ++b) m(a, b) = p[a * rank_ + b];
    return m;
}

void MatrixField::set(std::size_t s, const Mat& m) {
    if (m.rows() != rank_ || m.cols() != rank_) throw ShapeError("MatrixField::set: rank mismatch");
    cplx* p = site(s);
    for (int a = 0; a < rank_; ++a)
        for (int b = 0; b < rank_; ++b) p[a * rank_ + b] = m(a, b);
}

MatrixField MatrixField::with_degree(FormDegree d) const {
    MatrixField f = *this;
    f.degree_ = d;
    return f;
}

MatrixField& MatrixField::operator+=(const MatrixField& o) {
    require_same_shape(*this, o, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
}

MatrixField& MatrixField::operator-=(const MatrixField& o) {
    require_same_shape(*this, o, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
}

MatrixField& MatrixField::operator*=(cplx s) {
    for (auto& z : data_) z *= s;
    return *this;
}

MatrixField& MatrixField::axpy(cplx s, const MatrixField& o) {
    require_same_shape(*this, o, "axpy");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
    return *this;
}

double MatrixField::max_abs() const {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z));
    return m;
}

bool MatrixField::all_finite() const {
    for (const auto& z : data_)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

void MatrixField::set_zero() { std::fill(data_.begin(), data_.end(), cplx(0.0)); }

void require_same_shape(const MatrixField& a, const MatrixField& b, const char* where) {
    if (a.grid() != b.grid() || a.rank() != b.rank()) {
        std::ostringstream os;
        os << where << ": shape mismatch (N=" << a.grid().n() << ", r=" << a.rank()
           << " vs N=" << b.grid().n() << ", r=" << b.rank() << ")";
        throw ShapeError(os.str());
    }
}

void require_degree(const MatrixField& a, FormDegree d, const char* where) {
    if (a.degree() != d)
        throw ShapeError(std::string(where) + ": expected degree " + to_string(d) + ", got " +
                         to_string(a.degree()));
}

void require_finite(const MatrixField& a, const char* where) {
    if (!a.all_finite()) throw NumericalError(std::string(where) + ": non-finite entries");
}

namespace {

// out(i,j) = (c_x (f(i+1,j) - f(i-1,j)) + c_y (f(i,j+1) - f(i,j-1))) / (2h)
MatrixField stencil(const MatrixField& f, cplx cx, cplx cy) {
    MatrixField out(f.grid(), f.rank(), f.degree());
    const int n = f.grid().n();
    const std::size_t st = f.site_stride();
    const double inv2h = 1.0 / (2.0 * f.grid().spacing());
    cx *= inv2h;
    cy *= inv2h;
    const cplx* in = f.data().data();
    cplx* o = out.data().data();
    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n, im = (i + n - 1) % n;
        for (int j = 0; j < n; ++j) {
            const int jp = (j + 1) % n, jm = (j + n - 1) % n;
            const cplx* xp = in + (std::size_t(ip) * n + j) * st;
            const cplx* xm = in + (std::size_t(im) * n + j) * st;
            const cplx* yp = in + (std::size_t(i) * n + jp) * st;
            const cplx* ym = in + (std::size_t(i) * n + jm) * st;
            cplx* dst = o + (std::size_t(i) * n + j) * st;
            for (std::size_t k = 0; k < st; ++k)
                dst[k] = cx * (xp[k] - xm[k]) + cy * (yp[k] - ym[k]);
        }
    }
    return out;
}

}  // namespace

MatrixField dx_raw(const MatrixField& f) { return stencil(f, 1.0, 0.0); }
MatrixField dy_raw(const MatrixField& f) { return stencil(f, 0.0, 1.0); }
MatrixField dbar_raw(const MatrixField& f) { return stencil(f, 0.5, cplx(0.0, 0.5)); }
MatrixField dprime_raw(const MatrixField& f) { return stencil(f, 0.5, cplx(0.0, -0.5)); }

MatrixField dbar(const MatrixField& f) {
    require_degree(f, FormDegree::zero, "dbar");
    return dbar_raw(f).relabel(FormDegree::dzbar);
}

MatrixField d_prime(const MatrixField& f) {
    require_degree(f, FormDegree::zero, "d_prime");
    return dprime_raw(f).relabel(FormDegree::dz);
}

MatrixField dbar_adjoint(const MatrixField& v) {
    require_degree(v, FormDegree::dzbar, "dbar_adjoint");
    MatrixField out = dprime_raw(v);
    out *= -1.0;
    return out.relabel(FormDegree::zero);
}

MatrixField d_prime_adjoint(const MatrixField& v) {
    require_degree(v, FormDegree::dz, "d_prime_adjoint");
    MatrixField out = dbar_raw(v);
    out *= -1.0;
    return out.relabel(FormDegree::zero);
}

namespace {

FormDegree product_degree(FormDegree a, FormDegree b) {
    if (a == FormDegree::zero) return b;
    if (b == FormDegree::zero) return a;
    return FormDegree::top;
}

}  // namespace

MatrixField adjoint(const MatrixField& f) {
    MatrixField out(f.grid(), f.rank(), adjoint_degree(f.degree()));
    dispatch_rank(f.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        const int r = f.rank();
        for (std::size_t s = 0; s < f.sites(); ++s)
            SiteMap<R>(out.site(s), r, r) = ConstSiteMap<R>(f.site(s), r, r).adjoint();
    });
    return out;
}

MatrixField product(const MatrixField& a, const MatrixField& b) {
    require_same_shape(a, b, "product");
    MatrixField out(a.grid(), a.rank(), product_degree(a.degree(), b.degree()));
    dispatch_rank(a.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        for (std::size_t s = 0; s < a.sites(); ++s)
            kern::mul_add<R>(out.site(s), a.site(s), b.site(s), 1.0, a.rank());
    });
    return out;
}

MatrixField commutator(const MatrixField& a, const MatrixField& b) {
    require_same_shape(a, b, "commutator");
    MatrixField out(a.grid(), a.rank(), product_degree(a.degree(), b.degree()));
    dispatch_rank(a.rank(), [&](auto rc) {
        constexpr int R = decltype(rc)::value;
        for (std::size_t s = 0; s < a.sites(); ++s)
            kern::comm_add<R>(out.site(s), a.site(s), b.site(s), 1.0, a.rank());
    });
    return out;
}

MatrixField hermitian_part(const MatrixField& f) {
    MatrixField out = adjoint(f);
    out += f;
    out *= 0.5;
    return out.relabel(f.degree());
}

MatrixField skew_part(const MatrixField& f) {
    MatrixField out = adjoint(f);
    out *= -1.0;
    out += f;
    out *= 0.5;
    return out.relabel(f.degree());
}

MatrixField trace_free(const MatrixField& f) {
    MatrixField out = f;
    const int r = f.rank();
    for (std::size_t s = 0; s < f.sites(); ++s) {
        cplx* p = out.site(s);
        cplx tr = 0.0;
        for (int a = 0; a < r; ++a) tr += p[a * r + a];
        tr /= double(r);
        for (int a = 0; a < r; ++a) p[a * r + a] -= tr;
    }
    return out;
}

double l2_inner(const MatrixField& u, const MatrixField& v) {
    require_same_shape(u, v, "l2_inner");
    if (u.degree() != v.degree())
        throw ShapeError(std::string("l2_inner: degree mismatch ") + to_string(u.degree()) +
                         " vs " + to_string(v.degree()));
    // Re tr(u v^dagger) is the real Frobenius pairing of the entries.
    double acc = 0.0;
    const auto& a = u.data();
    const auto& b = v.data();
    for (std::size_t k = 0; k < a.size(); ++k)
        acc += a[k].real() * b[k].real() + a[k].imag() * b[k].imag();
    return acc * u.grid().cell_area();
}

double l2_norm(const MatrixField& u) { return std::sqrt(l2_inner(u, u)); }

cplx integrate_trace(const MatrixField& f) {
    const int r = f.rank();
    cplx acc = 0.0;
    for (std::size_t s = 0; s < f.sites(); ++s) {
        const cplx* p = f.site(s);
        for (int a = 0; a < r; ++a) acc += p[a * r + a];
    }
    return acc * f.grid().cell_area();
}

double sup_norm(const MatrixField& f) {
    double m = 0.0;
    const std::size_t st = f.site_stride();
    for (std::size_t s = 0; s < f.sites(); ++s) {
        const cplx* p = f.site(s);
        double acc = 0.0;
        for (std::size_t k = 0; k < st; ++k) acc += std::norm(p[k]);
        m = std::max(m, acc);
    }
    return std::sqrt(m);
}

}  // namespace higgs
