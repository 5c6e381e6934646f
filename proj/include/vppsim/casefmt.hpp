#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vppsim/network.hpp"

namespace vppsim {

enum class CaseErrorKind {
  MalformedMatrix,
  MissingSection,
  UnknownBusReference,
  DuplicateBusId,
  SchemaViolation,
  InvalidNetwork,
};

class CaseError : public std::runtime_error {
 public:
  CaseError(CaseErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  CaseErrorKind kind() const noexcept { return kind_; }

 private:
  CaseErrorKind kind_;
};

const char* to_string(CaseErrorKind kind);

// MATPOWER case subset. Honors baseMVA and these columns:
//   bus:    BUS_I BUS_TYPE PD QD GS BS (AREA) VM
//   gen:    GEN_BUS PG (QG) QMAX QMIN VG (MBASE) GEN_STATUS
//   branch: F_BUS T_BUS BR_R BR_X BR_B (RATE_A..C) TAP (SHIFT) BR_STATUS
// Trailing columns and every other mpc field are ignored. A TAP of 0 means
// no transformer. PV/slack set-points come from the first in-service
// generator's VG, falling back to the bus VM.
Network parse_matpower_case(std::string_view text);

// Native TOML case format; see docs/case-format.md.
Network parse_native_case(std::string_view text);
std::string serialize_native_case(const Network& net);

// DER sidecar for MATPOWER cases: removes conventional generators at the
// listed buses and appends DER generators with their agent annotations.
void apply_der_annotations(Network& net, std::string_view sidecar_text);

// MATPOWER export of the power-flow subset (DER metadata is dropped; DER
// generators are written as ordinary generator rows).
std::string serialize_matpower_case(const Network& net);

enum class CaseFormat { Auto, Native, Matpower };

// Loads from disk. Auto picks MATPOWER for ".m" files and native otherwise.
Network load_case(const std::filesystem::path& path, CaseFormat format = CaseFormat::Auto,
                  const std::filesystem::path& der_annotations = {});

// Parses without enforcing Network invariants so that tooling can report
// every violation. Parse-level errors (syntax, references) still throw.
Network load_case_unchecked(const std::filesystem::path& path, CaseFormat format = CaseFormat::Auto,
                            const std::filesystem::path& der_annotations = {});

std::string read_text_file(const std::filesystem::path& path);

}  // namespace vppsim
