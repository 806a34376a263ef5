#include "causal_rag/error.hpp"

namespace causal_rag {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnbalancedTags: return "UnbalancedTags";
    case ErrorKind::NestedTags: return "NestedTags";
    case ErrorKind::EmptyPhrase: return "EmptyPhrase";
    case ErrorKind::UnpairedTags: return "UnpairedTags";
    case ErrorKind::UnknownFormat: return "UnknownFormat";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::CorruptRecord: return "CorruptRecord";
    case ErrorKind::UnparseableResponse: return "UnparseableResponse";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::ProviderError: return "ProviderError";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::ReplayMiss: return "ReplayMiss";
    case ErrorKind::EmptyCompletion: return "EmptyCompletion";
    case ErrorKind::EmptyConnective: return "EmptyConnective";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

bool is_provider_failure(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ProviderError:
    case ErrorKind::TransportError:
    case ErrorKind::RateLimited:
    case ErrorKind::ReplayMiss:
    case ErrorKind::EmptyCompletion:
      return true;
    default:
      return false;
  }
}

}  // namespace causal_rag
