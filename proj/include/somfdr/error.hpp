#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace somfdr {

enum class errc {
  input,            // missing file, bad flag value, empty required input
  parse,            // malformed row or number
  domain,           // value outside its admissible range
  duplicate,        // repeated label or gene id
  unknown_label,    // dataset column names a type absent from the rate table
  screening,        // sum(x1) == 0 but sum(x2) > 0
  exceeds_coverage, // count larger than its coverage
  length_mismatch,  // vectors disagree with the table or the dataset
  degenerate,       // quantity undefined at the given input (e.g. zero exposure)
  infeasible,       // base-measure moments cannot be matched
  numeric,          // non-finite intermediate result
};

constexpr std::string_view errc_name(errc c) {
  switch (c) {
    case errc::input: return "E_INPUT";
    case errc::parse: return "E_PARSE";
    case errc::domain: return "E_DOMAIN";
    case errc::duplicate: return "E_DUPLICATE";
    case errc::unknown_label: return "E_UNKNOWN_LABEL";
    case errc::screening: return "E_SCREENING";
    case errc::exceeds_coverage: return "E_EXCEEDS_COVERAGE";
    case errc::length_mismatch: return "E_LENGTH_MISMATCH";
    case errc::degenerate: return "E_DEGENERATE";
    case errc::infeasible: return "E_INFEASIBLE";
    case errc::numeric: return "E_NUMERIC";
  }
  return "E_UNKNOWN";
}

/// Every failure raised by the library carries one of the codes above.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

}  // namespace somfdr
