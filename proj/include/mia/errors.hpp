#pragma once

#include <stdexcept>
#include <string>

namespace mia {

/// Base of every error the harness raises. `kind()` is the stable tag written
/// into outcome records when an error is captured instead of propagated.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define MIA_DEFINE_ERROR(Name, Base)                                            \
    class Name : public Base {                                                  \
    public:                                                                     \
        explicit Name(const std::string& what) : Base(#Name, what) {}           \
                                                                                \
    protected:                                                                  \
        Name(std::string kind, const std::string& what)                         \
            : Base(std::move(kind), what) {}                                    \
    };

// corpus
MIA_DEFINE_ERROR(UnparseableDocument, Error)
MIA_DEFINE_ERROR(NoEligibleChunk, Error)
MIA_DEFINE_ERROR(InsufficientData, Error)

// perturb
MIA_DEFINE_ERROR(ParaphraseParseError, Error)
MIA_DEFINE_ERROR(PoolExhausted, Error)
MIA_DEFINE_ERROR(ChunkTooShort, Error)

// gateway
MIA_DEFINE_ERROR(GatewayError, Error)
MIA_DEFINE_ERROR(AuthError, GatewayError)
MIA_DEFINE_ERROR(RateLimitExhausted, GatewayError)
MIA_DEFINE_ERROR(TransportError, GatewayError)
MIA_DEFINE_ERROR(CacheMiss, GatewayError)

class ProviderError : public GatewayError {
public:
    ProviderError(int status, const std::string& body_excerpt)
        : GatewayError("ProviderError",
                       "provider returned HTTP " + std::to_string(status) + ": " + body_excerpt),
          status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

// attacks
MIA_DEFINE_ERROR(ParseError, Error)
MIA_DEFINE_ERROR(NullAnswer, ParseError)
MIA_DEFINE_ERROR(FatalConfigError, Error)

// metrics / report
MIA_DEFINE_ERROR(DegenerateLabels, Error)
MIA_DEFINE_ERROR(MisalignedOutcomes, Error)
MIA_DEFINE_ERROR(IoError, Error)

#undef MIA_DEFINE_ERROR

}  // namespace mia
