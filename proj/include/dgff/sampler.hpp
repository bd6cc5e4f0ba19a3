#pragma once

// DGFF samplers: sparse-Cholesky (any domain), sine-basis (boxes), Gibbs-Markov
// decomposition over non-adjacent children, and binding fields.

#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "dgff/field.hpp"
#include "dgff/potential.hpp"
#include "dgff/rng.hpp"
#include "dgff/spectral.hpp"

namespace dgff {

namespace detail {

/// Shared spectral toolkit per box shape; plans are expensive, tables are not.
inline std::shared_ptr<const BoxSpectral> box_spectral(int w, int h) {
  static std::mutex m;
  static std::map<std::pair<int, int>, std::shared_ptr<const BoxSpectral>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[{w, h}];
  if (!slot) slot = std::make_shared<const BoxSpectral>(w, h);
  return slot;
}

inline std::vector<double> white_noise(RngSpec rng, std::size_t n) {
  std::vector<double> z(n);
  Philox(rng).fill_normal(z);
  return z;
}

inline void check_disjoint_non_adjacent(const std::vector<LatticeDomainPtr>& children) {
  for (std::size_t i = 0; i < children.size(); ++i)
    for (std::size_t j = i + 1; j < children.size(); ++j)
      for (auto s : children[i]->sites()) {
        require(!children[j]->contains(s), Errc::domain, "Gibbs-Markov children overlap");
        for (auto o : kNeighborOffsets)
          require(!children[j]->contains(s + o), Errc::domain,
                  "Gibbs-Markov children must be separated by at least one site");
      }
}

}  // namespace detail

/// Centered Gaussian with covariance G^D, from the sparse Cholesky factor.
inline Field sample_dense(const GreenOperator& g, RngSpec rng) {
  const auto z = detail::white_noise(rng, g.size());
  const Eigen::VectorXd h = g.correlate(z);
  return Field(g.domain_ptr(), std::vector<double>(h.data(), h.data() + h.size()), rng);
}

/// Same law as sample_dense on a box, by the sine transform.
inline Field sample_box_spectral(const LatticeDomainPtr& box, RngSpec rng) {
  const auto b = box->as_box();
  require(b.has_value(), Errc::unsupported_domain, "spectral sampler requires a box domain");
  const auto spec = detail::box_spectral(b->w, b->h);
  return Field(box, spec->sample(detail::white_noise(rng, box->size())), rng);
}

/// Box {1..side}^2 at resolution `side`.
inline Field sample_box_spectral(int side, RngSpec rng) {
  return sample_box_spectral(std::make_shared<const LatticeDomain>(LatticeDomain::box(1, 1, side, side, side)), rng);
}

/// Draws h^D by the spectral route on boxes and by sparse Cholesky otherwise.
class DgffSampler {
 public:
  explicit DgffSampler(LatticeDomainPtr domain) : domain_(std::move(domain)) {
    if (const auto b = domain_->as_box()) {
      spectral_ = detail::box_spectral(b->w, b->h);
    } else {
      green_.emplace(domain_);
    }
  }

  const LatticeDomainPtr& domain() const { return domain_; }

  Field sample(RngSpec rng) const {
    if (spectral_) return Field(domain_, spectral_->sample(detail::white_noise(rng, domain_->size())), rng);
    return sample_dense(*green_, rng);
  }

 private:
  LatticeDomainPtr domain_;
  std::shared_ptr<const BoxSpectral> spectral_;
  std::optional<GreenOperator> green_;
};

/// Discrete harmonic extension into `sub` of values prescribed on its outer boundary.
class HarmonicExtender {
 public:
  explicit HarmonicExtender(LatticeDomainPtr sub) : sub_(std::move(sub)) {
    if (const auto b = sub_->as_box()) {
      box_ = *b;
      spectral_ = detail::box_spectral(b->w, b->h);
    } else {
      green_.emplace(sub_);
    }
  }

  const LatticeDomainPtr& domain() const { return sub_; }

  /// Values on sub's sites, in sub's site order.
  template <class Outer>
  std::vector<double> extend(Outer&& outer) const {
    if (spectral_) {
      return spectral_->harmonic_extension(
          [&](int x1, int x2) { return outer(Site{box_.x0 + x1 - 1, box_.y0 + x2 - 1}); });
    }
    const Eigen::VectorXd v = harmonic_extension(*green_, std::function<double(Site)>(outer));
    return {v.data(), v.data() + v.size()};
  }

 private:
  LatticeDomainPtr sub_;
  LatticeDomain::Box box_{};
  std::shared_ptr<const BoxSpectral> spectral_;
  std::optional<GreenOperator> green_;
};

/// h^D = phi + sum_i h^{V_i}: phi is the harmonic extension into the children of
/// an outer sample restricted to D minus the children, and the h^{V_i} are
/// independent DGFFs on the children. Children must be pairwise disjoint,
/// contained in D and non-adjacent, so that h^V factorizes over them.
class GibbsMarkovSampler {
 public:
  GibbsMarkovSampler(LatticeDomainPtr domain, std::vector<LatticeDomainPtr> children)
      : outer_(domain), children_(std::move(children)) {
    for (const auto& c : children_)
      require(c && c->is_subset_of(*domain), Errc::domain, "Gibbs-Markov child is not contained in the domain");
    detail::check_disjoint_non_adjacent(children_);
    for (const auto& c : children_) {
      extenders_.emplace_back(c);
      child_samplers_.emplace_back(c);
    }
  }

  const LatticeDomainPtr& domain() const { return outer_.domain(); }

  Field sample(RngSpec rng) const {
    Field h = outer_.sample(rng.child(0));
    h.seed_tag = rng;
    const auto& dom = *outer_.domain();
    std::vector<std::vector<double>> pieces(children_.size());
    for (std::size_t i = 0; i < children_.size(); ++i) {
      auto phi = extenders_[i].extend([&](Site s) { return h.at(s); });
      const Field inner = child_samplers_[i].sample(rng.child(i + 1));
      for (std::size_t k = 0; k < phi.size(); ++k) phi[k] += inner.values[k];
      pieces[i] = std::move(phi);
    }
    // children are separated, so writing back after all extensions is order-free
    for (std::size_t i = 0; i < children_.size(); ++i) {
      const auto& sites = children_[i]->sites();
      for (std::size_t k = 0; k < sites.size(); ++k)
        h.values[static_cast<std::size_t>(dom.index_of(sites[k]))] = pieces[i][k];
    }
    return h;
  }

 private:
  DgffSampler outer_;
  std::vector<LatticeDomainPtr> children_;
  std::vector<HarmonicExtender> extenders_;
  std::vector<DgffSampler> child_samplers_;
};

inline Field sample_gibbs_markov(const LatticeDomainPtr& domain, const std::vector<LatticeDomainPtr>& children,
                                 RngSpec rng) {
  return GibbsMarkovSampler(domain, children).sample(rng);
}

namespace detail {

inline void gibbs_markov_box_into(const LatticeDomain::Box& b, RngSpec rng, std::size_t leaf_sites,
                                  const std::function<double(Site)>& boundary, const LatticeDomain& root,
                                  std::vector<double>& out) {
  const auto spec = box_spectral(b.w, b.h);
  // this box's field = harmonic extension of the surrounding values + an independent DGFF
  std::vector<double> h = spec->sample(white_noise(rng.child(0), spec->size()));
  const auto ext = spec->harmonic_extension([&](int x1, int x2) { return boundary(Site{b.x0 + x1 - 1, b.y0 + x2 - 1}); });
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += ext[i];
  auto write = [&](int x1, int x2) {
    out[static_cast<std::size_t>(root.index_of({b.x0 + x1 - 1, b.y0 + x2 - 1}))] = h[spec->index(x1, x2)];
  };
  const bool split_x = b.w >= 3, split_y = b.h >= 3;
  if (spec->size() <= leaf_sites || (!split_x && !split_y)) {
    for (int x2 = 1; x2 <= b.h; ++x2)
      for (int x1 = 1; x1 <= b.w; ++x1) write(x1, x2);
    return;
  }
  // keep the separating cross from this sample; the quadrants are redrawn conditionally
  const int cx = split_x ? (b.w + 1) / 2 : 0, cy = split_y ? (b.h + 1) / 2 : 0;
  for (int x2 = 1; x2 <= b.h; ++x2)
    for (int x1 = 1; x1 <= b.w; ++x1)
      if (x1 == cx || x2 == cy) write(x1, x2);
  auto cross_value = [&](Site s) {
    const int x1 = s.x - b.x0 + 1, x2 = s.y - b.y0 + 1;
    if (x1 >= 1 && x1 <= b.w && x2 >= 1 && x2 <= b.h) return h[spec->index(x1, x2)];
    return boundary(s);
  };
  std::vector<std::pair<int, int>> xs, ys;  // (first, width) per part
  if (split_x) xs = {{1, cx - 1}, {cx + 1, b.w - cx}};
  else xs = {{1, b.w}};
  if (split_y) ys = {{1, cy - 1}, {cy + 1, b.h - cy}};
  else ys = {{1, b.h}};
  std::uint64_t tag = 1;
  for (const auto& [fy, hy] : ys)
    for (const auto& [fx, wx] : xs) {
      const LatticeDomain::Box q{b.x0 + fx - 1, b.y0 + fy - 1, wx, hy};
      gibbs_markov_box_into(q, rng.child(tag++), leaf_sites, cross_value, root, out);
    }
}

}  // namespace detail

/// Hierarchical Gibbs-Markov sample on a box: split along the middle row and
/// column, recurse into the four quadrants until they hold at most `leaf_sites`.
inline Field sample_gibbs_markov_box(const LatticeDomainPtr& box, RngSpec rng, std::size_t leaf_sites = 64 * 64) {
  const auto b = box->as_box();
  require(b.has_value(), Errc::unsupported_domain, "hierarchical Gibbs-Markov sampler requires a box domain");
  require(leaf_sites >= 1, Errc::precondition, "leaf size must be positive");
  std::vector<double> out(box->size());
  detail::gibbs_markov_box_into(*b, rng, leaf_sites, [](Site) { return 0.0; }, *box, out);
  return Field(box, std::move(out), rng);
}

/// phi^{D, Dt}: conditional mean on Dt of h^D given h^D on D minus Dt.
class BindingFieldSampler {
 public:
  BindingFieldSampler(LatticeDomainPtr domain, LatticeDomainPtr sub)
      : outer_(domain), sub_(std::move(sub)), extender_(sub_) {
    require(sub_->is_subset_of(*domain), Errc::domain, "binding field: Dt is not contained in D");
  }

  const LatticeDomainPtr& sub() const { return sub_; }

  Field sample(RngSpec rng) const {
    if (sub_->size() == outer_.domain()->size()) return Field(sub_, std::vector<double>(sub_->size(), 0.0), rng);
    const Field h = outer_.sample(rng);
    return Field(sub_, extender_.extend([&](Site s) { return h.at(s); }), rng);
  }

 private:
  DgffSampler outer_;
  LatticeDomainPtr sub_;
  HarmonicExtender extender_;
};

inline Field sample_binding_field(const LatticeDomainPtr& domain, const LatticeDomainPtr& sub, RngSpec rng) {
  return BindingFieldSampler(domain, sub).sample(rng);
}

}  // namespace dgff
