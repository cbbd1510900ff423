#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace caeigs {

enum class Errc {
    non_positive_bitrate,
    invalid_config,
    malformed_record,
    invariant_violation,
    non_monotone_frame_index,
    malformed_row,
    duplicate_point,
    missing_quality_column,
    unsupported_version,
    shape_mismatch,
    corrupt_payload,
    empty_input,
    window_not_full,
    empty_dataset,
    channel_mismatch,
    single_class_dataset,
    missing_measurement,
    empty_hull,
    too_few_points,
    no_overlap,
    degenerate_variance,
    grid_mismatch,
    missing_bundle,
    stream_length_mismatch,
    io,
};

constexpr std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::non_positive_bitrate: return "NonPositiveBitrate";
        case Errc::invalid_config: return "InvalidConfig";
        case Errc::malformed_record: return "MalformedRecord";
        case Errc::invariant_violation: return "InvariantViolation";
        case Errc::non_monotone_frame_index: return "NonMonotoneFrameIndex";
        case Errc::malformed_row: return "MalformedRow";
        case Errc::duplicate_point: return "DuplicatePoint";
        case Errc::missing_quality_column: return "MissingQualityColumn";
        case Errc::unsupported_version: return "UnsupportedVersion";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::corrupt_payload: return "CorruptPayload";
        case Errc::empty_input: return "EmptyInput";
        case Errc::window_not_full: return "WindowNotFull";
        case Errc::empty_dataset: return "EmptyDataset";
        case Errc::channel_mismatch: return "ChannelMismatch";
        case Errc::single_class_dataset: return "SingleClassDataset";
        case Errc::missing_measurement: return "MissingMeasurement";
        case Errc::empty_hull: return "EmptyHull";
        case Errc::too_few_points: return "TooFewPoints";
        case Errc::no_overlap: return "NoOverlap";
        case Errc::degenerate_variance: return "DegenerateVariance";
        case Errc::grid_mismatch: return "GridMismatch";
        case Errc::missing_bundle: return "MissingBundle";
        case Errc::stream_length_mismatch: return "StreamLengthMismatch";
        case Errc::io: return "IoError";
    }
    return "Unknown";
}

// Every fault raised by the library. Parsers put the line number into the
// message; code() is what callers branch on.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace caeigs
