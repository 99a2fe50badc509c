#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"

namespace hjorlicz {

enum class NormTag { abs, sup, euclidean, l1 };

inline const char* norm_tag_name(NormTag t) {
  switch (t) {
    case NormTag::abs: return "abs";
    case NormTag::sup: return "sup";
    case NormTag::euclidean: return "euclidean";
    case NormTag::l1: return "l1";
  }
  return "abs";
}

inline constexpr double kAtomMergeTol = 1e-12;
inline constexpr std::size_t kMaxDim = 64;

inline double apply_norm(NormTag tag, std::span<const double> x) {
  switch (tag) {
    case NormTag::abs:
    case NormTag::sup: {
      double m = 0.0;
      for (double v : x) m = std::max(m, std::abs(v));
      return m;
    }
    case NormTag::euclidean: {
      double m = 0.0;
      for (double v : x) m = std::hypot(m, v);
      return m;
    }
    case NormTag::l1: {
      double m = 0.0;
      for (double v : x) m += std::abs(v);
      return m;
    }
  }
  return 0.0;
}

// Finite-support law on R^d. Atoms are kept sorted lexicographically, values
// within kAtomMergeTol (every coordinate) are merged, and probabilities are
// stored as logarithms so that tower-small masses survive.
class FiniteDist {
 public:
  FiniteDist() = default;

  static FiniteDist scalar(std::vector<double> values, std::vector<double> probs, double tol = 1e-12) {
    return from_linear(1, std::move(values), probs, NormTag::abs, tol);
  }

  static FiniteDist scalar_log(std::vector<double> values, std::vector<double> log_probs, double tol = 1e-12) {
    return FiniteDist(1, std::move(values), std::move(log_probs), NormTag::abs, tol);
  }

  static FiniteDist vector(std::size_t dim, std::vector<double> flat, std::vector<double> probs, NormTag tag,
                           double tol = 1e-12) {
    return from_linear(dim, std::move(flat), probs, tag, tol);
  }

  static FiniteDist vector_log(std::size_t dim, std::vector<double> flat, std::vector<double> log_probs, NormTag tag,
                               double tol = 1e-12) {
    return FiniteDist(dim, std::move(flat), std::move(log_probs), tag, tol);
  }

  static FiniteDist point_mass(double v) { return scalar({v}, {1.0}); }

  static FiniteDist point_mass(std::vector<double> x, NormTag tag) {
    const std::size_t d = x.size();
    return vector(d, std::move(x), {1.0}, tag);
  }

  std::size_t size() const { return log_probs_.size(); }
  std::size_t dim() const { return dim_; }
  bool is_scalar() const { return dim_ == 1; }
  NormTag norm_tag() const { return tag_; }

  double value(std::size_t i) const { return values_[i * dim_]; }
  std::span<const double> point(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  const std::vector<double>& flat_values() const { return values_; }
  double log_prob(std::size_t i) const { return log_probs_[i]; }
  double prob(std::size_t i) const { return std::exp(log_probs_[i]); }
  const std::vector<double>& log_probs() const { return log_probs_; }

  double norm_of(std::size_t i) const { return apply_norm(tag_, point(i)); }

  std::vector<double> norms() const {
    std::vector<double> r(size());
    for (std::size_t i = 0; i < size(); ++i) r[i] = norm_of(i);
    return r;
  }

  // Law of c X
  FiniteDist scaled(double c) const {
    std::vector<double> v = values_;
    for (double& x : v) x *= c;
    return FiniteDist(dim_, std::move(v), log_probs_, tag_, 1e-10);
  }

  // Law of eps X with an independent Rademacher sign.
  FiniteDist symmetrized() const {
    std::vector<double> v;
    std::vector<double> lp;
    v.reserve(2 * values_.size());
    lp.reserve(2 * size());
    for (std::size_t i = 0; i < size(); ++i) {
      for (double sgn : {1.0, -1.0}) {
        for (double x : point(i)) v.push_back(sgn * x);
        lp.push_back(log_probs_[i] - std::numbers::ln2);
      }
    }
    return FiniteDist(dim_, std::move(v), std::move(lp), tag_, 1e-10);
  }

  std::vector<double> mean() const {
    std::vector<double> m(dim_, 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      const double p = prob(i);
      for (std::size_t j = 0; j < dim_; ++j) m[j] += p * values_[i * dim_ + j];
    }
    return m;
  }

  // Law of X - E X
  FiniteDist centered() const {
    const auto m = mean();
    std::vector<double> v = values_;
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t j = 0; j < dim_; ++j) v[i * dim_ + j] -= m[j];
    }
    return FiniteDist(dim_, std::move(v), log_probs_, tag_, 1e-10);
  }

  // P(||X|| >= t), in logs
  double log_tail(double t) const {
    LogSumAccumulator acc;
    for (std::size_t i = 0; i < size(); ++i) {
      if (norm_of(i) >= t) acc.add(log_probs_[i]);
    }
    return acc.value();
  }

  double tail(double t) const { return std::exp(log_tail(t)); }

  FiniteDist(std::size_t dim, std::vector<double> flat, std::vector<double> log_probs, NormTag tag, double tol)
      : dim_(dim), tag_(tag) {
    if (dim == 0 || dim > kMaxDim) throw InvalidParameter("FiniteDist: dimension must be in [1, 64]");
    if (flat.size() != log_probs.size() * dim) throw InvalidParameter("FiniteDist: values and probabilities disagree in length");
    if (log_probs.empty()) throw InvalidParameter("FiniteDist: no atoms");
    for (double x : flat) {
      if (!std::isfinite(x)) throw InvalidParameter("FiniteDist: non-finite atom value");
    }
    for (double lp : log_probs) {
      if (std::isnan(lp) || lp > 1e-12) throw InvalidParameter("FiniteDist: probability outside [0, 1]");
    }
    std::vector<std::size_t> order(log_probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double x = flat[a * dim + j];
        const double y = flat[b * dim + j];
        if (x != y) return x < y;
      }
      return false;
    };
    std::sort(order.begin(), order.end(), less);
    auto close = [&](std::size_t a, std::size_t b) {
      for (std::size_t j = 0; j < dim; ++j) {
        if (std::abs(flat[a * dim + j] - flat[b * dim + j]) > kAtomMergeTol) return false;
      }
      return true;
    };
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i + 1;
      LogSumAccumulator acc;
      acc.add(log_probs[order[i]]);
      while (j < order.size() && close(order[i], order[j])) {
        acc.add(log_probs[order[j]]);
        ++j;
      }
      const double lp = acc.value();
      if (lp != kNegInf) {
        for (std::size_t k = 0; k < dim; ++k) values_.push_back(flat[order[i] * dim + k]);
        log_probs_.push_back(std::min(lp, 0.0));
      }
      i = j;
    }
    if (log_probs_.empty()) throw InvalidParameter("FiniteDist: all atoms have zero probability");
    const double total = log_sum_exp(log_probs_);
    if (std::abs(std::expm1(total)) > tol) {
      throw InvalidParameter("FiniteDist: probabilities sum to " + std::to_string(std::exp(total)) + ", not 1");
    }
  }

 private:
  static FiniteDist from_linear(std::size_t dim, std::vector<double> flat, std::span<const double> probs, NormTag tag,
                                double tol) {
    std::vector<double> lp(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) throw InvalidParameter("FiniteDist: probability outside [0, 1]");
      lp[i] = probs[i] == 0.0 ? kNegInf : std::log(probs[i]);
    }
    return FiniteDist(dim, std::move(flat), std::move(lp), tag, tol);
  }

  std::size_t dim_ = 1;
  NormTag tag_ = NormTag::abs;
  std::vector<double> values_;
  std::vector<double> log_probs_;
};

// N independent members sharing dimension and norm tag.
class Family {
 public:
  static Family iid(FiniteDist d, std::size_t n) {
    if (n == 0) throw InvalidParameter("Family: N must be >= 1");
    Family f;
    f.members_.push_back(std::move(d));
    f.count_ = n;
    f.iid_ = true;
    return f;
  }

  static Family independent(std::vector<FiniteDist> members) {
    if (members.empty()) throw InvalidParameter("Family: N must be >= 1");
    for (const auto& m : members) {
      if (m.dim() != members.front().dim() || m.norm_tag() != members.front().norm_tag()) {
        throw InvalidParameter("Family: members must share dimension and norm tag");
      }
    }
    Family f;
    f.count_ = members.size();
    f.members_ = std::move(members);
    f.iid_ = false;
    return f;
  }

  std::size_t size() const { return count_; }
  bool is_iid() const { return iid_; }
  const FiniteDist& member(std::size_t i) const { return iid_ ? members_.front() : members_.at(i); }
  std::size_t dim() const { return members_.front().dim(); }
  NormTag norm_tag() const { return members_.front().norm_tag(); }

  Family map(const auto& fn) const {
    Family f = *this;
    for (auto& m : f.members_) m = fn(m);
    return f;
  }

  // Product of support sizes (saturating at max double).
  double joint_support_size() const {
    double p = 1.0;
    for (std::size_t i = 0; i < size(); ++i) p *= static_cast<double>(member(i).size());
    return p;
  }

 private:
  std::vector<FiniteDist> members_;
  std::size_t count_ = 0;
  bool iid_ = false;
};

}  // namespace hjorlicz
