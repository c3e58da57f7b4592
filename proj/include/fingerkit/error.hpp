#pragma once

#include <stdexcept>
#include <string>

namespace fingerkit {

enum class ErrorCode {
  // midi
  MalformedHeader,
  TruncatedChunk,
  UnsupportedDivision,
  MalformedEvent,
  Overlong,
  Truncated,
  TickOverflow,
  OutOfRange,
  // keyboard / images
  BadImage,
  NoBrightRegion,
  BadCalibration,
  // pose
  EmptyStream,
  BadHeader,
  // press inference
  EmptyFrameList,
  LengthMismatch,
  // audio
  NotRiff,
  UnsupportedCodec,
  NoOnset,
  // tagger
  EmptyCorpus,
  CorpusFormat,
  BadModel,
  // simulator / cli
  BadConfig,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedChunk: return "TruncatedChunk";
    case ErrorCode::UnsupportedDivision: return "UnsupportedDivision";
    case ErrorCode::MalformedEvent: return "MalformedEvent";
    case ErrorCode::Overlong: return "Overlong";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::TickOverflow: return "TickOverflow";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BadImage: return "BadImage";
    case ErrorCode::NoBrightRegion: return "NoBrightRegion";
    case ErrorCode::BadCalibration: return "BadCalibration";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::EmptyFrameList: return "EmptyFrameList";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotRiff: return "NotRiff";
    case ErrorCode::UnsupportedCodec: return "UnsupportedCodec";
    case ErrorCode::NoOnset: return "NoOnset";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::CorpusFormat: return "CorpusFormat";
    case ErrorCode::BadModel: return "BadModel";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fingerkit
