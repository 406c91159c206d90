#pragma once

#include <stdexcept>
#include <string>

namespace vidharness {

/// Base of every error the harness raises. `kind()` carries the stable
/// error name used in logs, manifests and CLI messages.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define VIDHARNESS_DEFINE_ERROR(Name)                                    \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& what) : Error(#Name, what) {}   \
    }

// media
VIDHARNESS_DEFINE_ERROR(UnsupportedFormat);
VIDHARNESS_DEFINE_ERROR(ProbeFailure);
VIDHARNESS_DEFINE_ERROR(NotAVideo);
VIDHARNESS_DEFINE_ERROR(InvalidOverlap);
VIDHARNESS_DEFINE_ERROR(ToolFailure);

// providers
VIDHARNESS_DEFINE_ERROR(ProviderUnavailable);
VIDHARNESS_DEFINE_ERROR(ReplayMiss);
VIDHARNESS_DEFINE_ERROR(MalformedProviderOutput);

// parsing
VIDHARNESS_DEFINE_ERROR(BadTimestamp);
VIDHARNESS_DEFINE_ERROR(NoAnswerFound);

// benchmark
VIDHARNESS_DEFINE_ERROR(SchemaError);
VIDHARNESS_DEFINE_ERROR(TemplateError);

// scoring
VIDHARNESS_DEFINE_ERROR(EmptyVector);
VIDHARNESS_DEFINE_ERROR(NoRecords);
VIDHARNESS_DEFINE_ERROR(MissingCondition);

// knowledge graph
VIDHARNESS_DEFINE_ERROR(NoValidOutputs);
VIDHARNESS_DEFINE_ERROR(DuplicateModelName);
VIDHARNESS_DEFINE_ERROR(NegativeWeight);
VIDHARNESS_DEFINE_ERROR(UnknownSource);
VIDHARNESS_DEFINE_ERROR(UnknownCenter);
VIDHARNESS_DEFINE_ERROR(IoError);

// configuration
VIDHARNESS_DEFINE_ERROR(ConfigError);

#undef VIDHARNESS_DEFINE_ERROR

}  // namespace vidharness
