#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace causal_rag {

enum class ErrorKind {
  // corpus
  UnbalancedTags,
  NestedTags,
  EmptyPhrase,
  UnpairedTags,
  UnknownFormat,
  MalformedRecord,
  EmptyDataset,
  // repository
  IoError,
  SchemaVersionMismatch,
  CorruptRecord,
  UnparseableResponse,
  // embedding
  DimensionMismatch,
  ZeroVector,
  EmptyText,
  // llm gateway
  ProviderError,
  TransportError,
  RateLimited,
  ReplayMiss,
  EmptyCompletion,
  // retrieval / evaluation
  EmptyConnective,
  EmptyInput,
  InvalidConfig,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// True for the kinds that come from talking to a model or embedding endpoint.
bool is_provider_failure(ErrorKind kind);

}  // namespace causal_rag
