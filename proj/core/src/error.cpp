#include "spinhtm/error.hpp"

namespace spinhtm {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::DimensionOverflow: return "DimensionOverflow";
    case ErrorKind::TrailingData: return "TrailingData";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::NotOutputNode: return "NotOutputNode";
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::UntrainedChild: return "UntrainedChild";
    case ErrorKind::UntrainedNetwork: return "UntrainedNetwork";
    case ErrorKind::InvalidTopology: return "InvalidTopology";
    case ErrorKind::TopologyMismatch: return "TopologyMismatch";
    case ErrorKind::BadNetworkFile: return "BadNetworkFile";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::TooFewColumns: return "TooFewColumns";
    case ErrorKind::CursorOverrun: return "CursorOverrun";
    case ErrorKind::MissingActivity: return "MissingActivity";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnknownAxis: return "UnknownAxis";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace spinhtm
