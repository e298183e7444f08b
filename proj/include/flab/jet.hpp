#pragma once

// Truncated multivariate Taylor arithmetic over the 4n real coordinates
// (x^1..x^{2n}, y^1..y^{2n}) of the slit tangent bundle.
//
// A jet stores Taylor coefficients of monomials dx^a dy^b with |a| <= max_x
// and |b| <= max_y. The complement of that set is an ideal, so products and
// analytic functions computed here are exact up to roundoff.

#include <cassert>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <tuple>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

namespace flab {

/// Monomials in `nvars` variables of total degree <= `max_degree`, graded
/// by degree. Because of the grading, the monomials of degree <= d form a
/// prefix of the list for every larger max_degree.
class MonomialSpace {
 public:
  struct Term {
    int other;
    int out;
  };
  struct DerivTerm {
    int src;
    int dst;
    double factor;
  };

  static const MonomialSpace& get(int nvars, int max_degree) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<MonomialSpace>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{nvars, max_degree}];
    if (!slot) slot.reset(new MonomialSpace(nvars, max_degree));
    return *slot;
  }

  int nvars() const { return nvars_; }
  int max_degree() const { return max_degree_; }
  int size() const { return static_cast<int>(degree_.size()); }
  int degree(int idx) const { return degree_[idx]; }
  /// Number of monomials of degree <= d.
  int prefix(int d) const { return d < 0 ? 0 : prefix_[std::min(d, max_degree_)]; }

  std::span<const int> exponents(int idx) const {
    return {exps_.data() + static_cast<size_t>(idx) * nvars_, static_cast<size_t>(nvars_)};
  }

  /// Index of a monomial, or -1 when its degree exceeds the space.
  int index_of(std::span<const int> e) const {
    int d = 0;
    for (int v : e) d += v;
    if (d > max_degree_) return -1;
    auto it = lookup_.find(encode(e));
    return it == lookup_.end() ? -1 : it->second;
  }

  /// Product of e! over the exponents; converts Taylor coefficients to partials.
  double factorial_weight(int idx) const { return fact_weight_[idx]; }

  std::span<const Term> row(int i) const {
    return {terms_.data() + row_start_[i], static_cast<size_t>(row_start_[i + 1] - row_start_[i])};
  }

  /// d/d(var): monomials with a positive exponent in `var`, mapped to the
  /// monomial of one lower degree (same index in the degree-1 space).
  std::span<const DerivTerm> derivative(int var) const { return deriv_[var]; }

 private:
  MonomialSpace(int nvars, int max_degree) : nvars_(nvars), max_degree_(max_degree) {
    std::vector<int> cur(nvars, 0);
    prefix_.assign(max_degree + 1, 0);
    for (int d = 0; d <= max_degree; ++d) {
      enumerate(cur, 0, d, d);
      prefix_[d] = size();
    }
    for (int i = 0; i < size(); ++i) lookup_[encode(exponents(i))] = i;
    fact_weight_.resize(size());
    for (int i = 0; i < size(); ++i) {
      double w = 1;
      for (int e : exponents(i))
        for (int k = 2; k <= e; ++k) w *= k;
      fact_weight_[i] = w;
    }
    std::vector<int> sum(nvars);
    row_start_.push_back(0);
    for (int i = 0; i < size(); ++i) {
      for (int j = 0; j < prefix(max_degree - degree_[i]); ++j) {
        auto a = exponents(i), b = exponents(j);
        for (int v = 0; v < nvars; ++v) sum[v] = a[v] + b[v];
        terms_.push_back({j, index_of(sum)});
      }
      row_start_.push_back(static_cast<int>(terms_.size()));
    }
    deriv_.resize(nvars);
    for (int v = 0; v < nvars; ++v) {
      for (int i = 0; i < size(); ++i) {
        auto e = exponents(i);
        if (e[v] == 0) continue;
        std::vector<int> lower(e.begin(), e.end());
        lower[v] -= 1;
        deriv_[v].push_back({i, index_of(lower), static_cast<double>(e[v])});
      }
    }
  }

  void enumerate(std::vector<int>& cur, int var, int remaining, int degree) {
    if (var == nvars_ - 1 || nvars_ == 0) {
      if (nvars_ > 0) cur[var] = remaining;
      else if (remaining != 0) return;
      exps_.insert(exps_.end(), cur.begin(), cur.end());
      degree_.push_back(degree);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      cur[var] = e;
      enumerate(cur, var + 1, remaining - e, degree);
    }
    cur[var] = 0;
  }

  std::uint64_t encode(std::span<const int> e) const {
    std::uint64_t code = 0;
    for (int v : e) code = code * static_cast<std::uint64_t>(max_degree_ + 1) + static_cast<std::uint64_t>(v);
    return code;
  }

  int nvars_;
  int max_degree_;
  std::vector<int> exps_;
  std::vector<int> degree_;
  std::vector<int> prefix_;
  std::vector<double> fact_weight_;
  std::unordered_map<std::uint64_t, int> lookup_;
  std::vector<int> row_start_;
  std::vector<Term> terms_;
  std::vector<std::vector<DerivTerm>> deriv_;
};

/// Tensor product of an x-space and a y-space; coefficient (xi, yi) is stored
/// at xi * ny + yi.
class JetSpace {
 public:
  static const JetSpace& get(int dim, int max_x, int max_y) {
    static std::mutex mutex;
    static std::map<std::tuple<int, int, int>, std::unique_ptr<JetSpace>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{dim, max_x, max_y}];
    if (!slot) slot.reset(new JetSpace(dim, max_x, max_y));
    return *slot;
  }

  int dim() const { return dim_; }
  int max_x() const { return x_->max_degree(); }
  int max_y() const { return y_->max_degree(); }
  const MonomialSpace& x() const { return *x_; }
  const MonomialSpace& y() const { return *y_; }
  int size() const { return x_->size() * y_->size(); }
  /// Highest total order carried; bounds every nilpotent power series.
  int order() const { return max_x() + max_y(); }

 private:
  JetSpace(int dim, int max_x, int max_y)
      : dim_(dim), x_(&MonomialSpace::get(dim, max_x)), y_(&MonomialSpace::get(dim, max_y)) {}
  int dim_;
  const MonomialSpace* x_;
  const MonomialSpace* y_;
};

enum class Block { X, Y };

template <class S>
inline bool is_zero(const S& s) {
  return s == S{};
}

template <class S>
class Jet {
 public:
  using Scalar = S;

  Jet() = default;
  explicit Jet(const JetSpace& space, S constant = S{}) : space_(&space), c_(space.size(), S{}) {
    c_[0] = constant;
  }

  /// The coordinate function `block`^`idx` expanded around `value`.
  static Jet variable(const JetSpace& space, Block block, int idx, S value) {
    Jet j(space, value);
    if (block == Block::X) {
      if (space.max_x() >= 1) j.c_[(1 + idx) * space.y().size()] = S{1};
    } else {
      if (space.max_y() >= 1) j.c_[1 + idx] = S{1};
    }
    return j;
  }

  bool valid() const { return space_ != nullptr; }
  const JetSpace& space() const { return *space_; }
  S value() const { return c_[0]; }
  std::vector<S>& coefficients() { return c_; }
  const std::vector<S>& coefficients() const { return c_; }
  S coeff(int xi, int yi) const { return c_[static_cast<size_t>(xi) * space_->y().size() + yi]; }

  /// Partial derivative value d^{a+b} / dx^a dy^b at the expansion point.
  S partial(std::span<const int> x_exp, std::span<const int> y_exp) const {
    int xi = space_->x().index_of(x_exp);
    int yi = space_->y().index_of(y_exp);
    if (xi < 0 || yi < 0) throw std::out_of_range("partial derivative beyond jet order");
    return coeff(xi, yi) * (space_->x().factorial_weight(xi) * space_->y().factorial_weight(yi));
  }

  /// Restriction to a smaller truncation.
  Jet truncated(int max_x, int max_y) const {
    const JetSpace& t = JetSpace::get(space_->dim(), max_x, max_y);
    if (&t == space_) return *this;
    assert(max_x <= space_->max_x() && max_y <= space_->max_y());
    Jet r(t);
    const int ny = space_->y().size(), tny = t.y().size();
    for (int xi = 0; xi < t.x().size(); ++xi)
      for (int yi = 0; yi < tny; ++yi) r.c_[static_cast<size_t>(xi) * tny + yi] = c_[static_cast<size_t>(xi) * ny + yi];
    return r;
  }

  Jet d(Block block, int var) const {
    const int mx = space_->max_x(), my = space_->max_y();
    if (block == Block::X) {
      if (mx == 0) throw std::out_of_range("x-derivative of an order-0 jet");
      const JetSpace& t = JetSpace::get(space_->dim(), mx - 1, my);
      Jet r(t);
      r.c_[0] = S{};
      const int ny = space_->y().size();
      for (const auto& dt : space_->x().derivative(var)) {
        if (dt.dst >= t.x().size()) continue;
        for (int yi = 0; yi < ny; ++yi)
          r.c_[static_cast<size_t>(dt.dst) * ny + yi] += dt.factor * c_[static_cast<size_t>(dt.src) * ny + yi];
      }
      return r;
    }
    if (my == 0) throw std::out_of_range("y-derivative of an order-0 jet");
    const JetSpace& t = JetSpace::get(space_->dim(), mx, my - 1);
    Jet r(t);
    r.c_[0] = S{};
    const int ny = space_->y().size(), tny = t.y().size();
    for (int xi = 0; xi < space_->x().size(); ++xi)
      for (const auto& dt : space_->y().derivative(var)) {
        if (dt.dst >= tny) continue;
        r.c_[static_cast<size_t>(xi) * tny + dt.dst] += dt.factor * c_[static_cast<size_t>(xi) * ny + dt.src];
      }
    return r;
  }
  Jet dx(int var) const { return d(Block::X, var); }
  Jet dy(int var) const { return d(Block::Y, var); }

  Jet& operator+=(const Jet& o) { return combine(o, S{1}); }
  Jet& operator-=(const Jet& o) { return combine(o, S{-1}); }
  Jet& operator+=(S s) {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(S s) {
    c_[0] -= s;
    return *this;
  }
  Jet& operator*=(S s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  Jet& operator/=(S s) {
    for (auto& v : c_) v /= s;
    return *this;
  }
  Jet operator-() const {
    Jet r = *this;
    for (auto& v : r.c_) v = -v;
    return r;
  }

  /// this += s * o, restricting to the common truncation when spaces differ.
  Jet& axpy(S s, const Jet& o) { return combine(o, s); }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, S s) { return a += s; }
  friend Jet operator+(S s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, S s) { return a -= s; }
  friend Jet operator-(S s, const Jet& a) { return -a + s; }
  friend Jet operator*(Jet a, S s) { return a *= s; }
  friend Jet operator*(S s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, S s) { return a /= s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    if (a.space_ != b.space_) {
      auto [ra, rb] = common(a, b);
      return ra * rb;
    }
    const JetSpace& sp = *a.space_;
    Jet out(sp);
    out.c_[0] = S{};
    const auto& X = sp.x();
    const auto& Y = sp.y();
    const int ny = Y.size();
    std::vector<char> nzb(X.size());
    for (int xi = 0; xi < X.size(); ++xi) nzb[xi] = !row_zero(b.c_.data() + static_cast<size_t>(xi) * ny, ny);
    for (int xi = 0; xi < X.size(); ++xi) {
      const S* ya = a.c_.data() + static_cast<size_t>(xi) * ny;
      if (row_zero(ya, ny)) continue;
      for (const auto& xt : X.row(xi)) {
        if (!nzb[xt.other]) continue;
        const S* yb = b.c_.data() + static_cast<size_t>(xt.other) * ny;
        S* yo = out.c_.data() + static_cast<size_t>(xt.out) * ny;
        for (int yi = 0; yi < ny; ++yi) {
          const S av = ya[yi];
          if (is_zero(av)) continue;
          for (const auto& yt : Y.row(yi)) yo[yt.out] += av * yb[yt.other];
        }
      }
    }
    return out;
  }

  /// f(this) from the Taylor coefficients taylor[k] = f^(k)(value)/k!,
  /// k = 0..order(). Horner evaluation in the nilpotent part.
  Jet compose(const std::vector<S>& taylor) const {
    const int K = space_->order();
    Jet h = *this;
    h.c_[0] = S{};
    Jet r(*space_, taylor[K]);
    for (int k = K - 1; k >= 0; --k) {
      r = r * h;
      r.c_[0] += taylor[k];
    }
    return r;
  }

  static std::pair<Jet, Jet> common(const Jet& a, const Jet& b) {
    const int mx = std::min(a.space_->max_x(), b.space_->max_x());
    const int my = std::min(a.space_->max_y(), b.space_->max_y());
    return {a.truncated(mx, my), b.truncated(mx, my)};
  }

 private:
  static bool row_zero(const S* p, int n) {
    for (int i = 0; i < n; ++i)
      if (!is_zero(p[i])) return false;
    return true;
  }

  Jet& combine(const Jet& o, S s) {
    if (o.space_ != space_) {
      auto [ra, rb] = common(*this, o);
      *this = std::move(ra);
      return combine(rb, s);
    }
    for (size_t i = 0; i < c_.size(); ++i) c_[i] += s * o.c_[i];
    return *this;
  }

  const JetSpace* space_ = nullptr;
  std::vector<S> c_;
};

using RealJet = Jet<double>;
using ComplexJet = Jet<std::complex<double>>;

template <class S>
Jet<S> inverse(const Jet<S>& a) {
  const S a0 = a.value();
  const int K = a.space().order();
  std::vector<S> t(K + 1);
  S p = S{1} / a0;
  for (int k = 0; k <= K; ++k) {
    t[k] = p;
    p *= -S{1} / a0;
  }
  return a.compose(t);
}

template <class S>
Jet<S> operator/(const Jet<S>& a, const Jet<S>& b) {
  return a * inverse(b);
}

template <class S>
Jet<S> operator/(S s, const Jet<S>& b) {
  return inverse(b) * s;
}

/// Real power a^p. Requires a positive base value unless p is an integer.
inline RealJet pow(const RealJet& a, double p) {
  const double a0 = a.value();
  const int K = a.space().order();
  std::vector<double> t(K + 1);
  double binom = 1;
  for (int k = 0; k <= K; ++k) {
    t[k] = binom * std::pow(a0, p - k);
    binom *= (p - k) / (k + 1);
  }
  return a.compose(t);
}

template <class S>
Jet<S> exp(const Jet<S>& a) {
  const int K = a.space().order();
  std::vector<S> t(K + 1);
  S e = std::exp(a.value());
  double fact = 1;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    t[k] = e / fact;
  }
  return a.compose(t);
}

template <class S>
Jet<S> log(const Jet<S>& a) {
  const S a0 = a.value();
  const int K = a.space().order();
  std::vector<S> t(K + 1);
  t[0] = std::log(a0);
  S p = S{1};
  for (int k = 1; k <= K; ++k) {
    p /= a0;
    t[k] = (k % 2 == 1 ? S{1} : S{-1}) * p / static_cast<double>(k);
  }
  return a.compose(t);
}

inline RealJet sqrt(const RealJet& a) { return pow(a, 0.5); }

/// sin and cos from one set of Taylor coefficients.
inline std::pair<RealJet, RealJet> sincos(const RealJet& a) {
  const int K = a.space().order();
  std::vector<double> ts(K + 1), tc(K + 1);
  const double s = std::sin(a.value()), c = std::cos(a.value());
  const double ds[4] = {s, c, -s, -c};
  const double dc[4] = {c, -s, -c, s};
  double fact = 1;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    ts[k] = ds[k % 4] / fact;
    tc[k] = dc[k % 4] / fact;
  }
  return {a.compose(ts), a.compose(tc)};
}

/// Complex jet built from real and imaginary parts.
inline ComplexJet make_complex(const RealJet& re, const RealJet* im) {
  ComplexJet r(re.space());
  auto& rc = r.coefficients();
  const auto& a = re.coefficients();
  for (size_t i = 0; i < a.size(); ++i) rc[i] = {a[i], 0.0};
  if (im) {
    const auto& b = im->coefficients();
    for (size_t i = 0; i < b.size(); ++i) rc[i].imag(b[i]);
  }
  return r;
}

inline ComplexJet conj(const ComplexJet& a) {
  ComplexJet r = a;
  for (auto& v : r.coefficients()) v = std::conj(v);
  return r;
}

inline RealJet real_part(const ComplexJet& a) {
  RealJet r(a.space());
  for (size_t i = 0; i < a.coefficients().size(); ++i) r.coefficients()[i] = a.coefficients()[i].real();
  return r;
}

/// Wirtinger derivatives on the coordinate pairs (k, k+n) of a 2n-block:
/// d/dw = (d/da - i d/db)/2, d/dw-bar = (d/da + i d/db)/2.
template <class S>
ComplexJet wirtinger(const Jet<S>& f, Block block, int alpha, bool barred) {
  const int n = f.space().dim() / 2;
  ComplexJet da, db;
  if constexpr (std::is_same_v<S, double>) {
    da = make_complex(f.d(block, alpha), nullptr);
    db = make_complex(f.d(block, alpha + n), nullptr);
  } else {
    da = f.d(block, alpha);
    db = f.d(block, alpha + n);
  }
  const std::complex<double> i(0, barred ? 0.5 : -0.5);
  da *= std::complex<double>(0.5, 0);
  da.axpy(i, db);
  return da;
}

/// Solve A X = B for jets by Gaussian elimination with partial pivoting on
/// the order-0 values. B is a list of right-hand-side columns.
template <class S>
std::vector<std::vector<Jet<S>>> solve(std::vector<std::vector<Jet<S>>> A, std::vector<std::vector<Jet<S>>> B) {
  const int m = static_cast<int>(A.size());
  const int ncol = B.empty() ? 0 : static_cast<int>(B[0].size());
  for (int k = 0; k < m; ++k) {
    int piv = k;
    for (int r = k + 1; r < m; ++r)
      if (std::abs(A[r][k].value()) > std::abs(A[piv][k].value())) piv = r;
    if (std::abs(A[piv][k].value()) == 0) throw std::runtime_error("singular jet matrix");
    std::swap(A[k], A[piv]);
    std::swap(B[k], B[piv]);
    const Jet<S> inv = inverse(A[k][k]);
    for (int c = k + 1; c < m; ++c) A[k][c] = A[k][c] * inv;
    for (int c = 0; c < ncol; ++c) B[k][c] = B[k][c] * inv;
    for (int r = k + 1; r < m; ++r) {
      const Jet<S> f = A[r][k];
      for (int c = k + 1; c < m; ++c) A[r][c] -= f * A[k][c];
      for (int c = 0; c < ncol; ++c) B[r][c] -= f * B[k][c];
    }
  }
  for (int k = m - 1; k >= 0; --k)
    for (int r = 0; r < k; ++r) {
      const Jet<S> f = A[r][k];
      for (int c = 0; c < ncol; ++c) B[r][c] -= f * B[k][c];
    }
  return B;
}

}  // namespace flab
