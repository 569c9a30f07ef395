#pragma once

#include <stdexcept>
#include <string>

namespace guard {

// Base class for every error the library raises deliberately.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define GUARD_DEFINE_ERROR(Name)                                              \
    struct Name : Error {                                                     \
        explicit Name(const std::string& what) : Error(what) {}               \
    }

// text analysis
GUARD_DEFINE_ERROR(EmptyLexicon);
GUARD_DEFINE_ERROR(SpanMismatch);

// gateway
GUARD_DEFINE_ERROR(MissingCredential);
GUARD_DEFINE_ERROR(Timeout);
GUARD_DEFINE_ERROR(RateLimited);
GUARD_DEFINE_ERROR(CassetteMiss);
GUARD_DEFINE_ERROR(MalformedProviderReply);

// defense
GUARD_DEFINE_ERROR(EmptyInput);
GUARD_DEFINE_ERROR(MalformedOutcome);

// attack generation
GUARD_DEFINE_ERROR(NoEditSites);

// datasets and evaluation
GUARD_DEFINE_ERROR(ParseError);
GUARD_DEFINE_ERROR(UnknownLabel);
GUARD_DEFINE_ERROR(UnmappableReply);
GUARD_DEFINE_ERROR(EmptyDCorrect);
GUARD_DEFINE_ERROR(EmptyPairs);

// study kit
GUARD_DEFINE_ERROR(InsufficientItems);
GUARD_DEFINE_ERROR(NoItems);
GUARD_DEFINE_ERROR(OutOfRangeLikert);
GUARD_DEFINE_ERROR(DuplicateRating);
GUARD_DEFINE_ERROR(MissingAnnotator);
GUARD_DEFINE_ERROR(AllZeroDifferences);
GUARD_DEFINE_ERROR(NoDiscordantPairs);
GUARD_DEFINE_ERROR(IncompleteMatrix);

// configuration
GUARD_DEFINE_ERROR(ConfigError);
GUARD_DEFINE_ERROR(ResourceError);

#undef GUARD_DEFINE_ERROR

}  // namespace guard
