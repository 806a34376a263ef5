#pragma once

#include <doctest.h>

#include <functional>

#include "causal_rag/error.hpp"
#include "test_util.hpp"

namespace causal_rag::testing {

// Kind of the Error thrown by fn; fails the test when nothing is thrown.
inline ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected causal_rag::Error");
  return ErrorKind::InvalidConfig;
}

}  // namespace causal_rag::testing
