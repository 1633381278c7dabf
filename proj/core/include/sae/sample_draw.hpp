#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace sae {

enum class DesignTag {
    SRS,
    StratifiedSRS,
    /// Midzuno's scheme: first unit proportional to size, the rest by SRSWOR.
    MidzunoPPS,
    /// Generalised Midzuno (complementary elimination) attaining pi proportional to size.
    MidzunoExactPPS,
};

[[nodiscard]] std::string_view to_string(DesignTag tag) noexcept;
[[nodiscard]] DesignTag design_tag_from_string(std::string_view text);

/// A without-replacement sample. `positions` index the population's unit vector;
/// `unit_ids` carry the matching identifiers. pi and weights are aligned with both.
struct SampleDraw {
    std::vector<std::size_t> positions;
    std::vector<std::int64_t> unit_ids;
    std::vector<double> pi;
    std::vector<double> weights;
    DesignTag design_tag{DesignTag::SRS};

    [[nodiscard]] std::size_t size() const noexcept { return positions.size(); }
    bool operator==(const SampleDraw &) const = default;
};

} // namespace sae
