#pragma once

// Truncated multivariate power series ("jets") with dense storage indexed by
// graded-lexicographic rank, plus the trust order bookkeeping that records how
// many leading homogeneous components of a jet are meaningful.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crsphere/error.hpp"

namespace crsphere {

inline constexpr int kMaxJetVars = 8;
inline constexpr int kMaxJetDegree = 24;

struct JetContext {
  int nvars = 1;
  int degree = 0;

  friend bool operator==(const JetContext&, const JetContext&) = default;
};

/// Exponent vector of a monomial.
class MultiIndex {
 public:
  MultiIndex() = default;
  MultiIndex(std::initializer_list<int> exponents) : exps_(exponents) {}
  explicit MultiIndex(std::vector<int> exponents) : exps_(std::move(exponents)) {}

  int size() const noexcept { return static_cast<int>(exps_.size()); }
  int operator[](int v) const { return exps_.at(static_cast<std::size_t>(v)); }
  int& operator[](int v) { return exps_.at(static_cast<std::size_t>(v)); }
  std::span<const int> exponents() const noexcept { return exps_; }

  int total() const noexcept {
    int s = 0;
    for (int e : exps_) s += e;
    return s;
  }

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

 private:
  std::vector<int> exps_;
};

namespace detail {

/// Monomial enumeration and product table for one (nvars, degree) pair.
/// Instances are immutable after construction except for the lazily built
/// product table, which is guarded by a once_flag.
class Layout {
 public:
  Layout(int nvars, int degree) : nvars_(nvars), degree_(degree) {
    offsets_.assign(static_cast<std::size_t>(degree) + 2, 0);
    std::vector<std::uint8_t> current(static_cast<std::size_t>(nvars), 0);
    for (int d = 0; d <= degree; ++d) {
      offsets_[static_cast<std::size_t>(d)] = size();
      enumerate(current, 0, d);
    }
    offsets_[static_cast<std::size_t>(degree) + 1] = size();

    const int n = size();
    raise_.assign(static_cast<std::size_t>(nvars) * n, -1);
    parent_.assign(static_cast<std::size_t>(n), -1);
    parent_var_.assign(static_cast<std::size_t>(n), -1);
    std::vector<std::uint8_t> e(static_cast<std::size_t>(nvars));
    for (int i = 0; i < n; ++i) {
      std::copy_n(exponents(i), nvars, e.begin());
      for (int v = 0; v < nvars; ++v) {
        ++e[static_cast<std::size_t>(v)];
        raise_[static_cast<std::size_t>(v) * n + i] = rank(e.data());
        --e[static_cast<std::size_t>(v)];
      }
      for (int v = 0; v < nvars && i > 0; ++v) {
        if (e[static_cast<std::size_t>(v)] > 0) {
          --e[static_cast<std::size_t>(v)];
          parent_[static_cast<std::size_t>(i)] = rank(e.data());
          parent_var_[static_cast<std::size_t>(i)] = v;
          break;
        }
      }
    }
  }

  Layout(const Layout&) = delete;
  Layout& operator=(const Layout&) = delete;

  int nvars() const noexcept { return nvars_; }
  int degree() const noexcept { return degree_; }
  int size() const noexcept { return static_cast<int>(degs_.size()); }

  const std::uint8_t* exponents(int i) const noexcept {
    return exps_.data() + static_cast<std::size_t>(i) * nvars_;
  }
  int degree_of(int i) const noexcept { return degs_[static_cast<std::size_t>(i)]; }

  /// Number of monomials of total degree at most d (d may exceed the layout degree).
  int count_up_to(int d) const noexcept {
    if (d < 0) return 0;
    if (d > degree_) return size();
    return offsets_[static_cast<std::size_t>(d) + 1];
  }

  /// Rank of an exponent vector, or -1 when its degree exceeds the layout.
  int rank(const std::uint8_t* e) const {
    int total = 0;
    for (int v = 0; v < nvars_; ++v) total += e[v];
    if (total > degree_) return -1;
    auto it = ranks_.find(pack(e));
    return it == ranks_.end() ? -1 : it->second;
  }

  int rank(std::span<const int> e) const {
    std::uint8_t buf[kMaxJetVars] = {};
    for (int v = 0; v < nvars_; ++v) {
      if (e[static_cast<std::size_t>(v)] < 0) return -1;
      if (e[static_cast<std::size_t>(v)] > degree_) return -1;
      buf[v] = static_cast<std::uint8_t>(e[static_cast<std::size_t>(v)]);
    }
    return rank(buf);
  }

  /// Index of alpha_i + e_v, or -1 when that leaves the layout.
  int raise(int v, int i) const noexcept {
    return raise_[static_cast<std::size_t>(v) * size() + i];
  }
  /// Some alpha_i - e_v with alpha_i[v] > 0; used to build power chains.
  int parent(int i) const noexcept { return parent_[static_cast<std::size_t>(i)]; }
  int parent_var(int i) const noexcept { return parent_var_[static_cast<std::size_t>(i)]; }

  struct ProductTable {
    std::vector<int> start;   // size()+1 entries
    std::vector<int> target;  // rank of alpha_i + alpha_j for j < count_up_to(D - |alpha_i|)
  };

  const ProductTable& products() const {
    std::call_once(products_once_, [this] { build_products(); });
    return products_;
  }

 private:
  static std::uint64_t pack(const std::uint8_t* e, int nvars) {
    std::uint64_t key = 0;
    for (int v = 0; v < nvars; ++v) key |= static_cast<std::uint64_t>(e[v]) << (8 * v);
    return key;
  }
  std::uint64_t pack(const std::uint8_t* e) const { return pack(e, nvars_); }

  void enumerate(std::vector<std::uint8_t>& current, int var, int remaining) {
    if (var == nvars_ - 1) {
      current[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(remaining);
      ranks_.emplace(pack(current.data()), size());
      exps_.insert(exps_.end(), current.begin(), current.end());
      int total = 0;
      for (auto c : current) total += c;
      degs_.push_back(total);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      current[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(e);
      enumerate(current, var + 1, remaining - e);
    }
    current[static_cast<std::size_t>(var)] = 0;
  }

  void build_products() const {
    const int n = size();
    products_.start.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i) {
      products_.start[static_cast<std::size_t>(i) + 1] =
          products_.start[static_cast<std::size_t>(i)] + count_up_to(degree_ - degree_of(i));
    }
    products_.target.resize(static_cast<std::size_t>(products_.start.back()));
    std::uint8_t sum[kMaxJetVars] = {};
    for (int i = 0; i < n; ++i) {
      const auto* ei = exponents(i);
      const int jend = count_up_to(degree_ - degree_of(i));
      int* out = products_.target.data() + products_.start[static_cast<std::size_t>(i)];
      for (int j = 0; j < jend; ++j) {
        const auto* ej = exponents(j);
        for (int v = 0; v < nvars_; ++v) sum[v] = static_cast<std::uint8_t>(ei[v] + ej[v]);
        out[j] = rank(sum);
      }
    }
  }

  int nvars_;
  int degree_;
  std::vector<std::uint8_t> exps_;
  std::vector<int> degs_;
  std::vector<int> offsets_;
  std::unordered_map<std::uint64_t, int> ranks_;
  std::vector<int> raise_;
  std::vector<int> parent_;
  std::vector<int> parent_var_;
  mutable std::once_flag products_once_;
  mutable ProductTable products_;
};

inline std::shared_ptr<const Layout> layout_for(JetContext ctx) {
  if (ctx.nvars < 1 || ctx.nvars > kMaxJetVars) {
    throw Error(ErrorKind::invalid_input,
                "jet context needs 1.." + std::to_string(kMaxJetVars) + " variables, got " +
                    std::to_string(ctx.nvars));
  }
  if (ctx.degree < 0 || ctx.degree > kMaxJetDegree) {
    throw Error(ErrorKind::degree_overflow, "jet degree " + std::to_string(ctx.degree) +
                                                " outside 0.." + std::to_string(kMaxJetDegree));
  }
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const Layout>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{ctx.nvars, ctx.degree}];
  if (!slot) slot = std::make_shared<const Layout>(ctx.nvars, ctx.degree);
  return slot;
}

template <class T>
double magnitude(const T& x) {
  return static_cast<double>(std::abs(x));
}

}  // namespace detail

/// Truncated power series in `nvars` formal variables, total degree <= D.
/// `trust()` is the highest total degree whose coefficients are meaningful;
/// it may drop below zero after repeated differentiation, in which case no
/// coefficient can be read in trusted mode.
template <class T>
class BasicJet {
 public:
  using scalar_type = T;

  explicit BasicJet(JetContext ctx)
      : layout_(detail::layout_for(ctx)),
        coeffs_(static_cast<std::size_t>(layout_->size()), T{}),
        trust_(ctx.degree) {}

  static BasicJet constant(JetContext ctx, T value) {
    BasicJet j(ctx);
    j.coeffs_[0] = value;
    return j;
  }

  static BasicJet variable(JetContext ctx, int var) {
    BasicJet j(ctx);
    if (var < 0 || var >= ctx.nvars) {
      throw Error(ErrorKind::invalid_input, "variable index out of range");
    }
    if (ctx.degree >= 1) j.coeffs_[static_cast<std::size_t>(j.layout_->raise(var, 0))] = T{1};
    return j;
  }

  static BasicJet monomial(JetContext ctx, const MultiIndex& idx, T value) {
    BasicJet j(ctx);
    j.set_coeff(idx, value);
    return j;
  }

  JetContext context() const noexcept { return {layout_->nvars(), layout_->degree()}; }
  int nvars() const noexcept { return layout_->nvars(); }
  int degree() const noexcept { return layout_->degree(); }
  int trust() const noexcept { return trust_; }
  int size() const noexcept { return layout_->size(); }
  const detail::Layout& layout() const noexcept { return *layout_; }

  /// Copy with trust lowered to min(trust(), t).
  BasicJet with_trust(int t) const {
    BasicJet r = *this;
    r.trust_ = std::min(trust_, t);
    return r;
  }

  T operator[](int i) const { return coeffs_[static_cast<std::size_t>(i)]; }
  T& operator[](int i) { return coeffs_[static_cast<std::size_t>(i)]; }
  std::span<const T> coefficients() const noexcept { return coeffs_; }

  T constant_term() const { return coeffs_[0]; }

  MultiIndex index_at(int i) const {
    std::vector<int> e(static_cast<std::size_t>(nvars()));
    const auto* raw = layout_->exponents(i);
    for (int v = 0; v < nvars(); ++v) e[static_cast<std::size_t>(v)] = raw[v];
    return MultiIndex(std::move(e));
  }

  /// Coefficient of a monomial; zero above the truncation degree.
  T coeff(const MultiIndex& idx) const {
    check_arity(idx);
    const int r = layout_->rank(idx.exponents());
    return r < 0 ? T{} : coeffs_[static_cast<std::size_t>(r)];
  }

  void set_coeff(const MultiIndex& idx, T value) {
    check_arity(idx);
    const int r = layout_->rank(idx.exponents());
    if (r < 0) {
      throw Error(ErrorKind::degree_overflow, "monomial of degree " + std::to_string(idx.total()) +
                                                  " exceeds jet degree " + std::to_string(degree()));
    }
    coeffs_[static_cast<std::size_t>(r)] = value;
  }

  /// Coefficient read that refuses monomials above the trust order.
  T trusted_coeff(const MultiIndex& idx) const {
    if (idx.total() > trust_) {
      throw Error(ErrorKind::untrusted_read, "read of degree " + std::to_string(idx.total()) +
                                                 " beyond trust " + std::to_string(trust_));
    }
    return coeff(idx);
  }

  void set_trust(int t) { trust_ = std::min(t, degree()); }

  BasicJet& operator+=(const BasicJet& o) {
    require_same_context(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    trust_ = std::min(trust_, o.trust_);
    return *this;
  }
  BasicJet& operator-=(const BasicJet& o) {
    require_same_context(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    trust_ = std::min(trust_, o.trust_);
    return *this;
  }
  BasicJet& operator*=(T s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }
  BasicJet& operator*=(const BasicJet& o) { return *this = *this * o; }

  friend BasicJet operator+(BasicJet a, const BasicJet& b) { return a += b; }
  friend BasicJet operator-(BasicJet a, const BasicJet& b) { return a -= b; }
  friend BasicJet operator*(BasicJet a, T s) { return a *= s; }
  friend BasicJet operator*(T s, BasicJet a) { return a *= s; }
  friend BasicJet operator-(BasicJet a) {
    for (auto& c : a.coeffs_) c = -c;
    return a;
  }
  friend BasicJet operator+(BasicJet a, T s) {
    a.coeffs_[0] += s;
    return a;
  }
  friend BasicJet operator-(BasicJet a, T s) {
    a.coeffs_[0] -= s;
    return a;
  }

  friend BasicJet operator*(const BasicJet& a, const BasicJet& b) {
    a.require_same_context(b);
    BasicJet r(a.context());
    r.trust_ = std::min(a.trust_, b.trust_);
    const auto& table = a.layout_->products();
    const int n = a.size();
    T* out = r.coeffs_.data();
    const T* bc = b.coeffs_.data();
    for (int i = 0; i < n; ++i) {
      const T ai = a.coeffs_[static_cast<std::size_t>(i)];
      if (ai == T{}) continue;
      const int begin = table.start[static_cast<std::size_t>(i)];
      const int len = table.start[static_cast<std::size_t>(i) + 1] - begin;
      const int* tgt = table.target.data() + begin;
      for (int j = 0; j < len; ++j) {
        if (bc[j] != T{}) out[tgt[j]] += ai * bc[j];
      }
    }
    return r;
  }

  void require_same_context(const BasicJet& o) const {
    if (layout_ != o.layout_) {
      throw Error(ErrorKind::context_mismatch,
                  "jet contexts differ: (" + std::to_string(nvars()) + "," +
                      std::to_string(degree()) + ") vs (" + std::to_string(o.nvars()) + "," +
                      std::to_string(o.degree()) + ")");
    }
  }

 private:
  void check_arity(const MultiIndex& idx) const {
    if (idx.size() != nvars()) {
      throw Error(ErrorKind::invalid_input, "multi-index has " + std::to_string(idx.size()) +
                                                " entries, jet has " + std::to_string(nvars()) +
                                                " variables");
    }
    for (int e : idx.exponents()) {
      if (e < 0) throw Error(ErrorKind::invalid_input, "negative exponent in multi-index");
    }
  }

  std::shared_ptr<const detail::Layout> layout_;
  std::vector<T> coeffs_;
  int trust_;
};

using Complex = std::complex<double>;
using Jet = BasicJet<Complex>;

// ---------------------------------------------------------------------------
// Magnitudes and vanishing

/// Largest |c| over coefficients of total degree <= trust.
template <class T>
double max_trusted_abs(const BasicJet<T>& a) {
  if (a.trust() < 0) {
    throw TrustError(-1, "jet has no trusted coefficients (trust " + std::to_string(a.trust()) + ")");
  }
  double m = 0.0;
  const int end = a.layout().count_up_to(a.trust());
  for (int i = 0; i < end; ++i) m = std::max(m, detail::magnitude(a[i]));
  return m;
}

/// Largest |c| over all stored coefficients, trusted or not.
template <class T>
double max_abs(const BasicJet<T>& a) {
  double m = 0.0;
  for (const auto& c : a.coefficients()) m = std::max(m, detail::magnitude(c));
  return m;
}

template <class T>
bool trusted_vanishes(const BasicJet<T>& a, double threshold) {
  return max_trusted_abs(a) <= threshold;
}

// ---------------------------------------------------------------------------
// Inversion and powers

/// Multiplicative inverse by Newton iteration b <- b (2 - a b); each pass
/// doubles the number of correct homogeneous components.
template <class T>
BasicJet<T> invert(const BasicJet<T>& a) {
  const T a0 = a.constant_term();
  const double scale = std::max(1.0, max_abs(a));
  if (detail::magnitude(a0) <= 1e-14 * scale) {
    throw Error(ErrorKind::zero_constant_term, "cannot invert a jet with zero constant term");
  }
  BasicJet<T> b = BasicJet<T>::constant(a.context(), T{1} / a0);
  b.set_trust(a.trust());
  for (int correct = 1; correct <= a.degree(); correct *= 2) {
    BasicJet<T> ab = a * b;
    BasicJet<T> two_minus = -ab + T{2};
    b = b * two_minus;
  }
  // One more pass polishes the top components against accumulated roundoff.
  b = b * (-(a * b) + T{2});
  b.set_trust(a.trust());
  return b;
}

template <class T>
BasicJet<T> operator/(const BasicJet<T>& a, const BasicJet<T>& b) {
  return a * invert(b);
}

template <class T>
BasicJet<T> pow(const BasicJet<T>& a, int exponent) {
  if (exponent < 0) return pow(invert(a), -exponent);
  BasicJet<T> result = BasicJet<T>::constant(a.context(), T{1});
  result.set_trust(a.trust());
  BasicJet<T> base = a;
  while (exponent > 0) {
    if (exponent & 1) result = result * base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Differentiation

/// Formal partial derivative. The top homogeneous component of the result
/// would need degree D+1 data, so trust drops by one.
template <class T>
BasicJet<T> derive(const BasicJet<T>& a, int var) {
  if (var < 0 || var >= a.nvars()) throw Error(ErrorKind::invalid_input, "derive: bad variable");
  BasicJet<T> r(a.context());
  const auto& lay = a.layout();
  const int n = a.size();
  for (int i = 0; i < n; ++i) {
    const int up = lay.raise(var, i);
    if (up < 0) continue;
    const int e = lay.exponents(i)[var] + 1;
    r[i] = static_cast<T>(static_cast<double>(e)) * a[up];
  }
  r.set_trust(a.trust() - 1);
  return r;
}

template <class T>
BasicJet<T> derive(const BasicJet<T>& a, int var, int order) {
  BasicJet<T> r = a;
  for (int k = 0; k < order; ++k) r = derive(r, var);
  return r;
}

/// Mixed partial derivative value at the base point: coefficient times the
/// product of factorials of the exponents.
template <class T>
T read_derivative(const BasicJet<T>& a, const MultiIndex& idx) {
  T c = a.trusted_coeff(idx);
  double factor = 1.0;
  for (int e : idx.exponents()) {
    for (int k = 2; k <= e; ++k) factor *= k;
  }
  return c * static_cast<T>(factor);
}

// ---------------------------------------------------------------------------
// Structural maps

/// Same series with a lower truncation degree (and trust clipped to it).
template <class T>
BasicJet<T> truncated(const BasicJet<T>& a, int degree) {
  degree = std::min(degree, a.degree());
  BasicJet<T> r(JetContext{a.nvars(), degree});
  const int end = r.size();
  for (int i = 0; i < end; ++i) r[i] = a[i];  // graded order makes prefixes coincide
  r.set_trust(std::min(a.trust(), degree));
  return r;
}

/// Places variable v of `a` at position var_map[v] of a jet over `target`.
template <class T>
BasicJet<T> embed(const BasicJet<T>& a, JetContext target, std::span<const int> var_map) {
  if (static_cast<int>(var_map.size()) != a.nvars() || target.degree != a.degree()) {
    throw Error(ErrorKind::context_mismatch, "embed: incompatible target context");
  }
  BasicJet<T> r(target);
  std::vector<int> e(static_cast<std::size_t>(target.nvars));
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] == T{}) continue;
    std::fill(e.begin(), e.end(), 0);
    const auto* src = a.layout().exponents(i);
    for (int v = 0; v < a.nvars(); ++v) e[static_cast<std::size_t>(var_map[static_cast<std::size_t>(v)])] += src[v];
    r[r.layout().rank(e)] = a[i];
  }
  r.set_trust(a.trust());
  return r;
}

/// Renames variables in place: variable v becomes perm[v].
template <class T>
BasicJet<T> permute_variables(const BasicJet<T>& a, std::span<const int> perm) {
  return embed(a, a.context(), perm);
}

/// Evaluates the truncated polynomial at a point (offset coordinates).
template <class T>
T evaluate(const BasicJet<T>& a, std::span<const T> point) {
  if (static_cast<int>(point.size()) != a.nvars()) {
    throw Error(ErrorKind::invalid_input, "evaluate: point has wrong dimension");
  }
  std::vector<std::vector<T>> powers(point.size());
  for (std::size_t v = 0; v < point.size(); ++v) {
    powers[v].resize(static_cast<std::size_t>(a.degree()) + 1);
    powers[v][0] = T{1};
    for (int k = 1; k <= a.degree(); ++k) powers[v][static_cast<std::size_t>(k)] = powers[v][static_cast<std::size_t>(k) - 1] * point[v];
  }
  T sum{};
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] == T{}) continue;
    T term = a[i];
    const auto* e = a.layout().exponents(i);
    for (int v = 0; v < a.nvars(); ++v) term *= powers[static_cast<std::size_t>(v)][e[v]];
    sum += term;
  }
  return sum;
}

/// Fixes the variables with a value and keeps the rest (in their original
/// order) as the variables of the result. Nonzero values evaluate the
/// truncated polynomial away from its center, so the caller decides whether
/// the result is still meaningful.
template <class T>
BasicJet<T> partial_evaluate(const BasicJet<T>& a, std::span<const std::optional<T>> values) {
  if (static_cast<int>(values.size()) != a.nvars()) {
    throw Error(ErrorKind::invalid_input, "partial_evaluate: wrong number of values");
  }
  std::vector<int> free_vars;
  for (int v = 0; v < a.nvars(); ++v) {
    if (!values[static_cast<std::size_t>(v)]) free_vars.push_back(v);
  }
  if (free_vars.empty()) throw Error(ErrorKind::invalid_input, "partial_evaluate: no free variable");
  BasicJet<T> r(JetContext{static_cast<int>(free_vars.size()), a.degree()});
  std::vector<int> e(free_vars.size());
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] == T{}) continue;
    const auto* src = a.layout().exponents(i);
    T term = a[i];
    for (int v = 0; v < a.nvars(); ++v) {
      if (const auto& val = values[static_cast<std::size_t>(v)]) {
        for (int k = 0; k < src[v]; ++k) term *= *val;
      }
    }
    for (std::size_t f = 0; f < free_vars.size(); ++f) e[f] = src[free_vars[f]];
    r[r.layout().rank(e)] += term;
  }
  r.set_trust(a.trust());
  return r;
}

// ---------------------------------------------------------------------------
// Composition

namespace detail {

template <class T>
void require_zero_constant(const BasicJet<T>& g, const char* what) {
  const double scale = std::max(1.0, max_abs(g));
  if (magnitude(g.constant_term()) > 1e-10 * scale) {
    throw Error(ErrorKind::nonzero_constant_argument,
                std::string(what) + ": argument has nonzero constant term");
  }
}

/// All monomials g^beta over `lay` (which must share g's degree), built by
/// one multiplication per monomial along the parent chain, up to `max_degree`.
template <class T>
std::vector<BasicJet<T>> power_products(const Layout& lay, const std::vector<BasicJet<T>>& g,
                                        int max_degree) {
  std::vector<BasicJet<T>> pw;
  const int end = lay.count_up_to(max_degree);
  pw.reserve(static_cast<std::size_t>(end));
  BasicJet<T> one = BasicJet<T>::constant(g.front().context(), T{1});
  pw.push_back(one);
  for (int i = 1; i < end; ++i) {
    pw.push_back(pw[static_cast<std::size_t>(lay.parent(i))] *
                 g[static_cast<std::size_t>(lay.parent_var(i))]);
  }
  return pw;
}

}  // namespace detail

/// Composition a(args[0], ..., args[m-1]) for arguments with zero constant
/// term. Trust is the minimum over `a` and the arguments.
template <class T>
BasicJet<T> substitute(const BasicJet<T>& a, std::span<const BasicJet<T>> args) {
  if (static_cast<int>(args.size()) != a.nvars() || args.empty()) {
    throw Error(ErrorKind::context_mismatch, "substitute: need one argument per variable");
  }
  std::vector<BasicJet<T>> g;
  g.reserve(args.size());
  int trust = a.trust();
  for (const auto& arg : args) {
    arg.require_same_context(args.front());
    detail::require_zero_constant(arg, "substitute");
    BasicJet<T> cleaned = arg;
    cleaned[0] = T{};
    trust = std::min(trust, arg.trust());
    g.push_back(std::move(cleaned));
  }
  const JetContext out_ctx = args.front().context();
  const int degree = std::min(a.degree(), out_ctx.degree);
  BasicJet<T> src = truncated(a, degree);
  int top = 0;
  for (int i = 0; i < src.size(); ++i) {
    if (src[i] != T{}) top = std::max(top, src.layout().degree_of(i));
  }
  const auto pw = detail::power_products(src.layout(), g, top);
  BasicJet<T> r(out_ctx);
  for (int i = 0; i < static_cast<int>(pw.size()); ++i) {
    if (src[i] == T{}) continue;
    r += src[i] * pw[static_cast<std::size_t>(i)];
  }
  r.set_trust(trust);
  return r;
}

/// Solves F(x, y(x)) = 0 for the variables listed in `unknowns`, returning
/// y as jets in the remaining variables (kept in their original order).
/// F(0) must vanish and the Jacobian of F in the unknowns must be invertible
/// at 0. Uses the fixed-point iteration y <- y - J0^{-1} F(x, y), which fixes
/// one more homogeneous component per pass.
template <class T>
std::vector<BasicJet<T>> implicit_solve(std::span<const BasicJet<T>> system,
                                        std::span<const int> unknowns) {
  const int q = static_cast<int>(unknowns.size());
  if (q == 0 || static_cast<int>(system.size()) != q) {
    throw Error(ErrorKind::invalid_input, "implicit_solve: need as many equations as unknowns");
  }
  const JetContext full = system.front().context();
  const int nk = full.nvars - q;
  if (nk < 1) throw Error(ErrorKind::invalid_input, "implicit_solve: no independent variable left");
  std::vector<int> role(static_cast<std::size_t>(full.nvars), -1);  // >=0 unknown slot
  for (int s = 0; s < q; ++s) {
    const int u = unknowns[static_cast<std::size_t>(s)];
    if (u < 0 || u >= full.nvars || role[static_cast<std::size_t>(u)] >= 0) {
      throw Error(ErrorKind::invalid_input, "implicit_solve: bad unknown index");
    }
    role[static_cast<std::size_t>(u)] = s;
  }
  std::vector<int> known;
  for (int v = 0; v < full.nvars; ++v) {
    if (role[static_cast<std::size_t>(v)] < 0) known.push_back(v);
  }

  int trust = full.degree;
  for (const auto& f : system) {
    f.require_same_context(system.front());
    trust = std::min(trust, f.trust());
    const double scale = std::max(1.0, max_abs(f));
    if (detail::magnitude(f.constant_term()) > 1e-10 * scale) {
      throw Error(ErrorKind::nonzero_constant_argument, "implicit_solve: F(0) != 0");
    }
  }

  // Jacobian in the unknown block at the origin, inverted by Gauss-Jordan.
  std::vector<T> jac(static_cast<std::size_t>(q * q));
  double jmax = 0.0;
  for (int i = 0; i < q; ++i) {
    for (int s = 0; s < q; ++s) {
      const int r = system[static_cast<std::size_t>(i)].layout().raise(unknowns[static_cast<std::size_t>(s)], 0);
      const T v = r < 0 ? T{} : system[static_cast<std::size_t>(i)][r];
      jac[static_cast<std::size_t>(i * q + s)] = v;
      jmax = std::max(jmax, detail::magnitude(v));
    }
  }
  std::vector<T> inv(static_cast<std::size_t>(q * q), T{});
  for (int i = 0; i < q; ++i) inv[static_cast<std::size_t>(i * q + i)] = T{1};
  for (int col = 0; col < q; ++col) {
    int piv = col;
    for (int r = col + 1; r < q; ++r) {
      if (detail::magnitude(jac[static_cast<std::size_t>(r * q + col)]) >
          detail::magnitude(jac[static_cast<std::size_t>(piv * q + col)]))
        piv = r;
    }
    const T p = jac[static_cast<std::size_t>(piv * q + col)];
    if (detail::magnitude(p) <= 1e-12 * std::max(1.0, jmax)) {
      throw Error(ErrorKind::singular_jacobian, "implicit_solve: singular Jacobian at the origin");
    }
    for (int c = 0; c < q; ++c) {
      std::swap(jac[static_cast<std::size_t>(piv * q + c)], jac[static_cast<std::size_t>(col * q + c)]);
      std::swap(inv[static_cast<std::size_t>(piv * q + c)], inv[static_cast<std::size_t>(col * q + c)]);
    }
    for (int c = 0; c < q; ++c) {
      jac[static_cast<std::size_t>(col * q + c)] /= p;
      inv[static_cast<std::size_t>(col * q + c)] /= p;
    }
    for (int r = 0; r < q; ++r) {
      if (r == col) continue;
      const T f = jac[static_cast<std::size_t>(r * q + col)];
      if (f == T{}) continue;
      for (int c = 0; c < q; ++c) {
        jac[static_cast<std::size_t>(r * q + c)] -= f * jac[static_cast<std::size_t>(col * q + c)];
        inv[static_cast<std::size_t>(r * q + c)] -= f * inv[static_cast<std::size_t>(col * q + c)];
      }
    }
  }

  // Split each F_i into sum_beta F_{i,beta}(x) y^beta.
  const JetContext kctx{nk, full.degree};
  const auto ulay = detail::layout_for(JetContext{q, full.degree});
  std::vector<std::vector<BasicJet<T>>> parts(static_cast<std::size_t>(q));
  std::vector<int> ke(static_cast<std::size_t>(nk));
  std::vector<int> ue(static_cast<std::size_t>(q));
  const auto klay = detail::layout_for(kctx);
  for (int i = 0; i < q; ++i) {
    auto& pi = parts[static_cast<std::size_t>(i)];
    pi.assign(static_cast<std::size_t>(ulay->size()), BasicJet<T>(kctx));
    const auto& f = system[static_cast<std::size_t>(i)];
    for (int m = 0; m < f.size(); ++m) {
      if (f[m] == T{}) continue;
      const auto* e = f.layout().exponents(m);
      for (int k = 0; k < nk; ++k) ke[static_cast<std::size_t>(k)] = e[known[static_cast<std::size_t>(k)]];
      for (int s = 0; s < q; ++s) ue[static_cast<std::size_t>(s)] = e[unknowns[static_cast<std::size_t>(s)]];
      pi[static_cast<std::size_t>(ulay->rank(ue))][klay->rank(ke)] += f[m];
    }
  }

  std::vector<BasicJet<T>> y(static_cast<std::size_t>(q), BasicJet<T>(kctx));
  for (int pass = 0; pass <= full.degree; ++pass) {
    const auto pw = detail::power_products(*ulay, y, full.degree);
    std::vector<BasicJet<T>> resid(static_cast<std::size_t>(q), BasicJet<T>(kctx));
    for (int i = 0; i < q; ++i) {
      const auto& pi = parts[static_cast<std::size_t>(i)];
      for (std::size_t b = 0; b < pi.size(); ++b) {
        if (max_abs(pi[b]) == 0.0) continue;
        resid[static_cast<std::size_t>(i)] += pi[b] * pw[b];
      }
    }
    for (int s = 0; s < q; ++s) {
      for (int i = 0; i < q; ++i) {
        const T c = inv[static_cast<std::size_t>(s * q + i)];
        if (c != T{}) y[static_cast<std::size_t>(s)] -= c * resid[static_cast<std::size_t>(i)];
      }
      y[static_cast<std::size_t>(s)][0] = T{};
    }
  }
  for (auto& yi : y) yi.set_trust(trust);
  return y;
}

}  // namespace crsphere
