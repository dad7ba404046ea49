#include "vesselseg/error.hpp"

namespace vesselseg {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptData: return "CorruptData";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InvalidSigma: return "InvalidSigma";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::SeedOutOfBounds: return "SeedOutOfBounds";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InsufficientPixels: return "InsufficientPixels";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::SingleClassDataset: return "SingleClassDataset";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::CorruptModel: return "CorruptModel";
        case ErrorCode::LayerLocked: return "LayerLocked";
        case ErrorCode::CorruptProject: return "CorruptProject";
    }
    return "Unknown";
}

}  // namespace vesselseg
