// Flat square torus lattice, matrix-valued fields and the centered
// complex derivatives used by every other module.
#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace higgs {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TorusGrid {
public:
    TorusGrid() = default;
    TorusGrid(int n, double length);

    int n() const { return n_; }
    double length() const { return length_; }
    double spacing() const { return length_ / n_; }
    double cell_area() const { return spacing() * spacing(); }
    double area() const { return length_ * length_; }
    std::size_t sites() const { return std::size_t(n_) * std::size_t(n_); }

    // periodic wrap of lattice coordinates
    std::size_t site(int i, int j) const {
        i %= n_;
        j %= n_;
        if (i < 0) i += n_;
        if (j < 0) j += n_;
        return std::size_t(i) * n_ + j;
    }
    double x(int i) const { return i * spacing(); }
    double y(int j) const { return j * spacing(); }

    bool operator==(const TorusGrid& o) const { return n_ == o.n_ && length_ == o.length_; }
    bool operator!=(const TorusGrid& o) const { return !(*this == o); }

private:
    int n_ = 8;
    double length_ = 1.0;
};

// Which component of an End(E)-valued form a field holds. Two-forms are
// stored as their dx^dy coefficient.
enum class FormDegree { zero, dz, dzbar, top };

const char* to_string(FormDegree d);

// Degree of the pointwise adjoint: (u dz)^* = u^dagger dzbar.
FormDegree adjoint_degree(FormDegree d);

class MatrixField {
public:
    MatrixField() = default;
    MatrixField(const TorusGrid& grid, int rank, FormDegree degree = FormDegree::zero);

    static MatrixField constant(const TorusGrid& grid, const Mat& m,
                                FormDegree degree = FormDegree::zero);
    static MatrixField identity(const TorusGrid& grid, int rank,
                                FormDegree degree = FormDegree::zero);

    const TorusGrid& grid() const { return grid_; }
    int rank() const { return rank_; }
    FormDegree degree() const { return degree_; }
    std::size_t sites() const { return grid_.sites(); }
    std::size_t site_stride() const { return std::size_t(rank_) * rank_; }

    cplx* site(std::size_t s) { return data_.data() + s * site_stride(); }
    const cplx* site(std::size_t s) const { return data_.data() + s * site_stride(); }

    cplx& operator()(std::size_t s, int a, int b) { return site(s)[a * rank_ + b]; }
    cplx operator()(std::size_t s, int a, int b) const { return site(s)[a * rank_ + b]; }

    Mat at(std::size_t s) const;
    void set(std::size_t s, const Mat& m);

    std::vector<cplx>& data() { return data_; }
    const std::vector<cplx>& data() const { return data_; }

    MatrixField with_degree(FormDegree d) const;
    MatrixField& relabel(FormDegree d) {
        degree_ = d;
        return *this;
    }

    MatrixField& operator+=(const MatrixField& o);
    MatrixField& operator-=(const MatrixField& o);
    MatrixField& operator*=(cplx s);
    MatrixField& axpy(cplx s, const MatrixField& o);

    friend MatrixField operator+(MatrixField a, const MatrixField& b) { return a += b; }
    friend MatrixField operator-(MatrixField a, const MatrixField& b) { return a -= b; }
    friend MatrixField operator*(cplx s, MatrixField a) { return a *= s; }
    friend MatrixField operator*(MatrixField a, cplx s) { return a *= s; }

    double max_abs() const;
    bool all_finite() const;
    void set_zero();

private:
    TorusGrid grid_;
    int rank_ = 1;
    FormDegree degree_ = FormDegree::zero;
    std::vector<cplx> data_;
};

void require_same_shape(const MatrixField& a, const MatrixField& b, const char* where);
void require_degree(const MatrixField& a, FormDegree d, const char* where);
void require_finite(const MatrixField& a, const char* where);

// Rank dispatch: kernels are written once as templates over a compile-time
// rank (1..4) with Eigen::Dynamic as fallback.
template <int R>
using SiteMat = Eigen::Matrix<cplx, R, R, Eigen::RowMajor>;
template <int R>
using SiteMap = Eigen::Map<SiteMat<R>>;
template <int R>
using ConstSiteMap = Eigen::Map<const SiteMat<R>>;

template <class F>
decltype(auto) dispatch_rank(int r, F&& f) {
    switch (r) {
        case 1: return f(std::integral_constant<int, 1>{});
        case 2: return f(std::integral_constant<int, 2>{});
        case 3: return f(std::integral_constant<int, 3>{});
        case 4: return f(std::integral_constant<int, 4>{});
        default: return f(std::integral_constant<int, Eigen::Dynamic>{});
    }
}

// Plain-loop site kernels for the hot paths (Eigen's generic small complex
// products are slow without -march tuning). Matrices are row-major r x r.
namespace kern {

template <int R>
constexpr int dim(int r) {
    if constexpr (R > 0) return R; else return r;
}

// o += s * x * y
template <int R>
inline void mul_add(cplx* o, const cplx* x, const cplx* y, cplx s, int rr) {
    const int r = dim<R>(rr);
    for (int a = 0; a < r; ++a)
        for (int c = 0; c < r; ++c) {
            cplx acc = 0.0;
            for (int b = 0; b < r; ++b) acc += x[a * r + b] * y[b * r + c];
            o[a * r + c] += s * acc;
        }
}

// o += s * [x, y]
template <int R>
inline void comm_add(cplx* o, const cplx* x, const cplx* y, cplx s, int rr) {
    const int r = dim<R>(rr);
    for (int a = 0; a < r; ++a)
        for (int c = 0; c < r; ++c) {
            cplx acc = 0.0;
            for (int b = 0; b < r; ++b) acc += x[a * r + b] * y[b * r + c] - y[a * r + b] * x[b * r + c];
            o[a * r + c] += s * acc;
        }
}

// o += s * [x, x^dagger]
template <int R>
inline void comm_dagger_add(cplx* o, const cplx* x, cplx s, int rr) {
    const int r = dim<R>(rr);
    for (int a = 0; a < r; ++a)
        for (int c = 0; c < r; ++c) {
            cplx acc = 0.0;
            for (int b = 0; b < r; ++b)
                acc += x[a * r + b] * std::conj(x[c * r + b]) - std::conj(x[b * r + a]) * x[b * r + c];
            o[a * r + c] += s * acc;
        }
}

}  // namespace kern

// Centered periodic stencils, no degree bookkeeping. dbar_raw is
// (Dx + i Dy)/2 and dprime_raw is (Dx - i Dy)/2.
MatrixField dx_raw(const MatrixField& f);
MatrixField dy_raw(const MatrixField& f);
MatrixField dbar_raw(const MatrixField& f);
MatrixField dprime_raw(const MatrixField& f);

MatrixField dbar(const MatrixField& f);    // zero -> dzbar
MatrixField d_prime(const MatrixField& f); // zero -> dz
// Adjoints under l2_inner; both are exact on the periodic lattice.
MatrixField dbar_adjoint(const MatrixField& v);    // dzbar -> zero, equals -d_prime
MatrixField d_prime_adjoint(const MatrixField& v); // dz -> zero, equals -dbar

// Pointwise algebra. Degrees: product/commutator take the degree of the
// non-zero-form factor (or zero when both are zero-forms); callers that
// wedge two one-forms relabel explicitly.
MatrixField adjoint(const MatrixField& f);
MatrixField product(const MatrixField& a, const MatrixField& b);
MatrixField commutator(const MatrixField& a, const MatrixField& b);
MatrixField hermitian_part(const MatrixField& f);
MatrixField skew_part(const MatrixField& f);
MatrixField trace_free(const MatrixField& f);

double l2_inner(const MatrixField& u, const MatrixField& v);
double l2_norm(const MatrixField& u);
cplx integrate_trace(const MatrixField& f);

// Largest pointwise Frobenius norm.
double sup_norm(const MatrixField& f);

}  // namespace higgs
