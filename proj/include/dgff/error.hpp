#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dgff {

enum class Errc {
  degenerate_discretization,
  domain,
  precondition,
  unsupported_domain,
  insufficient_data,
  statistics,
  contract,
  resource,
  parse,
  config,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::degenerate_discretization: return "degenerate_discretization";
    case Errc::domain: return "domain_error";
    case Errc::precondition: return "precondition_error";
    case Errc::unsupported_domain: return "unsupported_domain";
    case Errc::insufficient_data: return "insufficient_data";
    case Errc::statistics: return "statistics_error";
    case Errc::contract: return "contract_error";
    case Errc::resource: return "resource_error";
    case Errc::parse: return "parse_error";
    case Errc::config: return "config_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace dgff
