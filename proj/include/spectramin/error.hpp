#pragma once

#include <stdexcept>
#include <string>

namespace spectramin {

// Errors caused by bad inputs (files, configs, arguments) report as
// validation failures; everything else is a runtime failure.
enum class ErrorCategory { Validation, Runtime };

class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what, ErrorCategory category)
        : std::runtime_error(what), code_(std::move(code)), category_(category) {}

    const std::string& code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_; }

private:
    std::string code_;
    ErrorCategory category_;
};

#define SPECTRAMIN_ERROR(Name, Category)                                    \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& what)                              \
            : Error(#Name, #Name ": " + what, ErrorCategory::Category) {}   \
    }

SPECTRAMIN_ERROR(InvalidSpectrum, Validation);
SPECTRAMIN_ERROR(InvalidGrid, Validation);
SPECTRAMIN_ERROR(ZeroVector, Runtime);
SPECTRAMIN_ERROR(EmptyClass, Validation);
SPECTRAMIN_ERROR(ParseError, Validation);
SPECTRAMIN_ERROR(ManifestError, Validation);
SPECTRAMIN_ERROR(ConfigError, Validation);
SPECTRAMIN_ERROR(EmptyIntersection, Validation);
SPECTRAMIN_ERROR(SingleClassError, Validation);
SPECTRAMIN_ERROR(ArchError, Validation);
SPECTRAMIN_ERROR(DivergedError, Runtime);
SPECTRAMIN_ERROR(ModelFormatError, Validation);
SPECTRAMIN_ERROR(FormulaError, Validation);
SPECTRAMIN_ERROR(MissingLines, Validation);
SPECTRAMIN_ERROR(NoPeaksError, Runtime);
SPECTRAMIN_ERROR(ClassListMismatch, Validation);
SPECTRAMIN_ERROR(StatsError, Validation);

#undef SPECTRAMIN_ERROR

} // namespace spectramin
