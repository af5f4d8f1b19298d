#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spinhtm {

/// Failure categories shared by the library and the CLI exit codes.
enum class ErrorKind {
  // dataset_io
  BadMagic,
  TruncatedFile,
  DimensionOverflow,
  TrailingData,
  InvalidLabel,
  // htm_core
  LengthMismatch,
  IndexOutOfRange,
  EmptyPool,
  NotOutputNode,
  ArityMismatch,
  UntrainedChild,
  UntrainedNetwork,
  InvalidTopology,
  TopologyMismatch,
  BadNetworkFile,
  // rcn_model
  NegativeWeight,
  SingularSystem,
  TooFewColumns,
  // spin_wta
  CursorOverrun,
  // energy_model
  MissingActivity,
  // experiment
  InvalidArgument,
  UnknownAxis,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace spinhtm
