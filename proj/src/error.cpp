#include "oasis/error.hpp"

namespace oasis {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Configuration: return "configuration_error";
    case ErrorKind::InvalidLabel: return "invalid_label";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::Degenerate: return "degenerate_input";
    case ErrorKind::Range: return "range_error";
    case ErrorKind::Validation: return "validation_error";
    case ErrorKind::Io: return "io_error";
    case ErrorKind::Contract: return "contract_violation";
    }
    return "unknown_error";
}

void fail(ErrorKind kind, const std::string& message)
{
    throw Error(kind, message);
}

} // namespace oasis
