/// @file render.hpp
/// Deterministic plot rendering. The encoder emits stored-deflate PNG data
/// and text uses an embedded bitmap font, so identical (segment, config)
/// inputs produce byte-identical files on every platform.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tsab/core.hpp"

namespace tsab::render {

class RenderError : public DomainError {
public:
    using DomainError::DomainError;
};

enum class XAxisMode { Index, Timestamp };

using Rgb = std::array<std::uint8_t, 3>;

struct RenderConfig {
    int width_px = 1200;
    int height_px = 400;
    int line_width_px = 1;
    XAxisMode x_axis_mode = XAxisMode::Index;
    int tick_count_target = 6;
    int font_scale = 1;  // multiplier on the 5x7 embedded font
    int margin_px = 60;
    Rgb background{255, 255, 255};
    Rgb foreground{31, 119, 180};
    Rgb axis_color{0, 0, 0};

    void validate() const;
};

/// Renders the segment's series as a PNG. Ground-truth intervals are never
/// drawn; the image shows only the data and labeled axes.
std::vector<std::uint8_t> render_plot(const Segment& segment, const RenderConfig& config);

void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& png);

}  // namespace tsab::render
