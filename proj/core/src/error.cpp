#include "pbound/error.hpp"

namespace pbound {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Uncontrollable: return "uncontrollable";
    case ErrorKind::Conditioning: return "conditioning";
    case ErrorKind::Certification: return "certification";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Config: return "config";
    }
    return "unknown";
}

}  // namespace pbound
