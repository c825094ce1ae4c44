#pragma once

#include <stdexcept>
#include <string>

namespace gpob {

/// Base class for every failure raised by the solvers. `kind()` is a stable
/// identifier (e.g. "NonConvergence") used by the pipeline manifest.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define GPOB_DEFINE_ERROR(Name)                                                        \
    class Name : public Error {                                                        \
    public:                                                                            \
        explicit Name(const std::string& what) : Error(#Name, what) {}                 \
    };

GPOB_DEFINE_ERROR(InvalidArgument)
GPOB_DEFINE_ERROR(DomainError)
GPOB_DEFINE_ERROR(SingularPreconditioner)
GPOB_DEFINE_ERROR(LinearSolveFailure)
GPOB_DEFINE_ERROR(LineSearchStall)
GPOB_DEFINE_ERROR(SeedFailure)
GPOB_DEFINE_ERROR(BadGeometry)
GPOB_DEFINE_ERROR(EllipticityLoss)
GPOB_DEFINE_ERROR(InsufficientRange)
GPOB_DEFINE_ERROR(UnderResolved)
GPOB_DEFINE_ERROR(VortexContamination)
GPOB_DEFINE_ERROR(AmbiguousCore)
GPOB_DEFINE_ERROR(VortexEscape)
GPOB_DEFINE_ERROR(EigenIterationFailure)
GPOB_DEFINE_ERROR(SpeedOutOfRange)
GPOB_DEFINE_ERROR(GramSingular)
GPOB_DEFINE_ERROR(IoError)
GPOB_DEFINE_ERROR(MissingArtifact)

#undef GPOB_DEFINE_ERROR

/// Raised by iterative methods that exhaust their iteration budget.
class NonConvergence : public Error {
public:
    NonConvergence(int iterations, double final_residual, const std::string& what = "")
        : Error("NonConvergence", what + " (iterations=" + std::to_string(iterations) +
                                      ", residual=" + std::to_string(final_residual) + ")"),
          iterations_(iterations), final_residual_(final_residual) {}
    int iterations() const noexcept { return iterations_; }
    double final_residual() const noexcept { return final_residual_; }

private:
    int iterations_;
    double final_residual_;
};

}  // namespace gpob
