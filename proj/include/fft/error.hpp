#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fft {

// Structured parse failure: 1-based line number plus reason. All text
// parsers in this library are total over this error type.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class FlowErrorKind { bad_magic, truncated, non_finite, bad_dims, trailing_data };

// Structured failure while decoding a binary flow file.
class FlowError : public std::runtime_error {
 public:
  FlowError(FlowErrorKind kind, const std::string& detail)
      : std::runtime_error(name(kind) + (detail.empty() ? "" : ": " + detail)), kind_(kind) {}

  FlowErrorKind kind() const { return kind_; }

 private:
  static std::string name(FlowErrorKind k) {
    switch (k) {
      case FlowErrorKind::bad_magic: return "bad magic";
      case FlowErrorKind::truncated: return "truncated file";
      case FlowErrorKind::non_finite: return "non-finite value";
      case FlowErrorKind::bad_dims: return "bad dimensions";
      case FlowErrorKind::trailing_data: return "trailing data";
    }
    return "flow error";
  }
  FlowErrorKind kind_;
};

// A frame step required a flow field that was not provided.
class MissingFlowError : public std::runtime_error {
 public:
  explicit MissingFlowError(std::int64_t frame)
      : std::runtime_error("missing flow to previous frame at frame " + std::to_string(frame)),
        frame_(frame) {}

  std::int64_t frame() const { return frame_; }

 private:
  std::int64_t frame_;
};

// A refiner broke its contract (wrong output shape or score range).
class RefinerError : public std::runtime_error {
 public:
  explicit RefinerError(const std::string& what) : std::runtime_error(what) {}
};

// Ground truth and predictions do not cover compatible frame ranges.
class FrameRangeError : public std::runtime_error {
 public:
  explicit FrameRangeError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid synthetic sequence specification.
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fft
