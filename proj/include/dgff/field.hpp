#pragma once

#include <memory>
#include <vector>

#include "dgff/domain.hpp"
#include "dgff/rng.hpp"

namespace dgff {

/// Real values on the sites of a lattice domain, implicitly zero elsewhere.
struct Field {
  LatticeDomainPtr domain;
  std::vector<double> values;
  RngSpec seed_tag{};

  Field() = default;
  Field(LatticeDomainPtr d, std::vector<double> v, RngSpec tag = {})
      : domain(std::move(d)), values(std::move(v)), seed_tag(tag) {
    require(domain && values.size() == domain->size(), Errc::contract, "field size does not match its domain");
  }

  double at(Site s) const {
    const auto i = domain->index_of(s);
    return i < 0 ? 0.0 : values[static_cast<std::size_t>(i)];
  }
  int resolution() const { return domain->resolution(); }
  std::size_t size() const { return values.size(); }
};

}  // namespace dgff
