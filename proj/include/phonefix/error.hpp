// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phonefix {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kWindowTooLong,
  kSegmentOutOfRange,
  kSegmentTooLong,
  kUnsupportedFormat,
  kCorruptFile,
  kRateMismatch,
  kFadeOutOfRange,
  kMissingAlignment,
  kUnknownPhoneme,
  kFrameCountMismatch,
  kTooFewItems,
  kPhonemeAbsent,
  kInvalidConfig,
  kEmptySegment,
  kTooFewClasses,
  kPhonemeTooRare,
  kSamePhoneme,
  kUtteranceTooShort,
  kInvalidPhoneme,
  kBlendTooWide,
  kExternalVocoderFailed,
  kNoDonor,
  kModelMissing,
  kIo,
};

inline std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kWindowTooLong: return "WindowTooLong";
    case ErrorCode::kSegmentOutOfRange: return "SegmentOutOfRange";
    case ErrorCode::kSegmentTooLong: return "SegmentTooLong";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kRateMismatch: return "RateMismatch";
    case ErrorCode::kFadeOutOfRange: return "FadeOutOfRange";
    case ErrorCode::kMissingAlignment: return "MissingAlignment";
    case ErrorCode::kUnknownPhoneme: return "UnknownPhoneme";
    case ErrorCode::kFrameCountMismatch: return "FrameCountMismatch";
    case ErrorCode::kTooFewItems: return "TooFewItems";
    case ErrorCode::kPhonemeAbsent: return "PhonemeAbsent";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kEmptySegment: return "EmptySegment";
    case ErrorCode::kTooFewClasses: return "TooFewClasses";
    case ErrorCode::kPhonemeTooRare: return "PhonemeTooRare";
    case ErrorCode::kSamePhoneme: return "SamePhoneme";
    case ErrorCode::kUtteranceTooShort: return "UtteranceTooShort";
    case ErrorCode::kInvalidPhoneme: return "InvalidPhoneme";
    case ErrorCode::kBlendTooWide: return "BlendTooWide";
    case ErrorCode::kExternalVocoderFailed: return "ExternalVocoderFailed";
    case ErrorCode::kNoDonor: return "NoDonor";
    case ErrorCode::kModelMissing: return "ModelMissing";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

// All library failures surface as this exception; code() identifies the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ToString(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) Fail(code, what);
}

}  // namespace phonefix
