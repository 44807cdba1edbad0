// error.hpp — the single exception type thrown by the library.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qmem {

enum class ErrorKind {
    invalid_dimension,
    invalid_embedding,
    dimension_mismatch,
    invalid_state,
    invalid_parameters,
    degenerate_drive,
    singular_detuning,
    invalid_regime,
    nonphysical_pair,
    invalid_pulse,
    uncalibrated_protocol,
    calibration_failed,
    step_size,
    integration_diverged,
    weak_drive,
    fit_failed,
    insufficient_data,
    insufficient_span,
    reconstruction,
    config,
    usage,
};

constexpr std::string_view to_string(ErrorKind k) noexcept {
    switch (k) {
        case ErrorKind::invalid_dimension: return "invalid-dimension";
        case ErrorKind::invalid_embedding: return "invalid-embedding";
        case ErrorKind::dimension_mismatch: return "dimension-mismatch";
        case ErrorKind::invalid_state: return "invalid-state";
        case ErrorKind::invalid_parameters: return "invalid-parameters";
        case ErrorKind::degenerate_drive: return "degenerate-drive";
        case ErrorKind::singular_detuning: return "singular-detuning";
        case ErrorKind::invalid_regime: return "invalid-regime";
        case ErrorKind::nonphysical_pair: return "nonphysical-pair";
        case ErrorKind::invalid_pulse: return "invalid-pulse";
        case ErrorKind::uncalibrated_protocol: return "uncalibrated-protocol";
        case ErrorKind::calibration_failed: return "calibration-failed";
        case ErrorKind::step_size: return "step-size";
        case ErrorKind::integration_diverged: return "integration-diverged";
        case ErrorKind::weak_drive: return "weak-drive";
        case ErrorKind::fit_failed: return "fit-failed";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::insufficient_span: return "insufficient-span";
        case ErrorKind::reconstruction: return "reconstruction";
        case ErrorKind::config: return "config";
        case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace qmem
