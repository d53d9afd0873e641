#pragma once

#include <stdexcept>
#include <string>

namespace elqa {

/// Base of every error raised by the library. `code()` is the stable error
/// name used on the wire and in CLI diagnostics (e.g. "MalformedRow").
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)), detail_(detail) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string code_;
  std::string detail_;
};

#define ELQA_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& detail) : Error(#Name, detail) {} \
  }

// signal_store
ELQA_DEFINE_ERROR(MissingFile);
ELQA_DEFINE_ERROR(MalformedRow);
ELQA_DEFINE_ERROR(DanglingReference);
ELQA_DEFINE_ERROR(UnknownField);
ELQA_DEFINE_ERROR(UnknownMeasurement);
ELQA_DEFINE_ERROR(IoError);

// synth_gen
ELQA_DEFINE_ERROR(InvalidConfig);

// preprocess
ELQA_DEFINE_ERROR(EmptyInput);
ELQA_DEFINE_ERROR(DegenerateVariance);
ELQA_DEFINE_ERROR(DegenerateTimes);
ELQA_DEFINE_ERROR(LengthMismatch);
ELQA_DEFINE_ERROR(MissingDataExcessive);
ELQA_DEFINE_ERROR(AllMissing);
ELQA_DEFINE_ERROR(FlatVoltage);

// miners
ELQA_DEFINE_ERROR(BadK);
ELQA_DEFINE_ERROR(BadParam);
ELQA_DEFINE_ERROR(UnknownMethod);
ELQA_DEFINE_ERROR(InvalidMatrix);

// dashboard_core
ELQA_DEFINE_ERROR(DuplicateRegistration);
ELQA_DEFINE_ERROR(NoHandler);
ELQA_DEFINE_ERROR(InvalidPayload);
ELQA_DEFINE_ERROR(UnknownParameter);
ELQA_DEFINE_ERROR(RevisionGap);
ELQA_DEFINE_ERROR(UnknownModel);
ELQA_DEFINE_ERROR(SchemaViolation);

// cleansing_app
ELQA_DEFINE_ERROR(UnknownCircuit);
ELQA_DEFINE_ERROR(BadTemplate);

// sync_server
ELQA_DEFINE_ERROR(UnknownDashboard);
ELQA_DEFINE_ERROR(UnknownSession);
ELQA_DEFINE_ERROR(MalformedMessage);

#undef ELQA_DEFINE_ERROR

}  // namespace elqa
