#include "tsab/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <string>

#include "tsab/util.hpp"

namespace tsab::render {

namespace {

// ---------------------------------------------------------------------------
// Embedded 5x7 font (digits plus the punctuation tick labels need).
// ---------------------------------------------------------------------------

struct Glyph {
    char ch;
    std::array<std::uint8_t, 7> rows;  // 5 LSBs per row, MSB-left
};

constexpr Glyph kGlyphs[] = {
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
    {'-', {0b00000, 0b00000, 0b00000, 0b11111, 0b00000, 0b00000, 0b00000}},
    {'+', {0b00000, 0b00100, 0b00100, 0b11111, 0b00100, 0b00100, 0b00000}},
    {'.', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100}},
    {':', {0b00000, 0b01100, 0b01100, 0b00000, 0b01100, 0b01100, 0b00000}},
    {' ', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000}},
    {'e', {0b00000, 0b00000, 0b01110, 0b10001, 0b11111, 0b10000, 0b01110}},
};

const Glyph* find_glyph(char c) {
    for (const auto& g : kGlyphs) {
        if (g.ch == c) return &g;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Canvas
// ---------------------------------------------------------------------------

class Canvas {
public:
    Canvas(int w, int h, Rgb bg) : w_(w), h_(h), px_(std::size_t(w) * std::size_t(h) * 3) {
        for (std::size_t i = 0; i < px_.size(); i += 3) {
            px_[i] = bg[0];
            px_[i + 1] = bg[1];
            px_[i + 2] = bg[2];
        }
    }

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        const std::size_t i = (std::size_t(y) * std::size_t(w_) + std::size_t(x)) * 3;
        px_[i] = c[0];
        px_[i + 1] = c[1];
        px_[i + 2] = c[2];
    }

    void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) set(x, y, c);
        }
    }

    // Bresenham with a square brush of side `width`.
    void line(int x0, int y0, int x1, int y1, Rgb c, int width) {
        const int half = std::max(0, (width - 1) / 2);
        int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
        int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        for (;;) {
            fill_rect(x0 - half, y0 - half, x0 - half + width - 1, y0 - half + width - 1, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void text(int x, int y, const std::string& s, Rgb c, int scale) {
        int cx = x;
        for (const char ch : s) {
            if (const Glyph* g = find_glyph(ch)) {
                for (int row = 0; row < 7; ++row) {
                    for (int col = 0; col < 5; ++col) {
                        if (g->rows[std::size_t(row)] & (1 << (4 - col))) {
                            fill_rect(cx + col * scale, y + row * scale, cx + (col + 1) * scale - 1,
                                      y + (row + 1) * scale - 1, c);
                        }
                    }
                }
            }
            cx += 6 * scale;
        }
    }

    static int text_width(const std::string& s, int scale) {
        return int(s.size()) * 6 * scale - scale;
    }

    int width() const { return w_; }
    int height() const { return h_; }
    const std::vector<std::uint8_t>& pixels() const { return px_; }

private:
    int w_, h_;
    std::vector<std::uint8_t> px_;
};

// ---------------------------------------------------------------------------
// PNG encoding (stored-deflate; no external compressor, fully deterministic)
// ---------------------------------------------------------------------------

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0xffffffffu) {
    static std::uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (std::uint32_t n = 0; n < 256; ++n) {
            std::uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[n] = c;
        }
        init = true;
    }
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

void push_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                const std::vector<std::uint8_t>& payload) {
    push_u32(out, std::uint32_t(payload.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const std::uint32_t crc = crc32(out.data() + start, out.size() - start) ^ 0xffffffffu;
    push_u32(out, crc);
}

std::vector<std::uint8_t> zlib_store(const std::vector<std::uint8_t>& raw) {
    std::vector<std::uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    std::size_t pos = 0;
    do {
        const std::size_t n = std::min<std::size_t>(raw.size() - pos, 65535);
        const bool last = pos + n == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(std::uint8_t(n & 0xff));
        z.push_back(std::uint8_t(n >> 8));
        z.push_back(std::uint8_t(~n & 0xff));
        z.push_back(std::uint8_t((~n >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + std::ptrdiff_t(pos), raw.begin() + std::ptrdiff_t(pos + n));
        pos += n;
    } while (pos < raw.size());
    // Adler-32 of the uncompressed data.
    std::uint32_t a = 1, b = 0;
    for (const auto byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    push_u32(z, (b << 16) | a);
    return z;
}

std::vector<std::uint8_t> encode_png(const Canvas& canvas) {
    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

    std::vector<std::uint8_t> ihdr;
    push_u32(ihdr, std::uint32_t(canvas.width()));
    push_u32(ihdr, std::uint32_t(canvas.height()));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    push_chunk(out, "IHDR", ihdr);

    std::vector<std::uint8_t> raw;
    raw.reserve(std::size_t(canvas.height()) * (std::size_t(canvas.width()) * 3 + 1));
    const auto& px = canvas.pixels();
    for (int y = 0; y < canvas.height(); ++y) {
        raw.push_back(0);  // filter: none
        const std::size_t off = std::size_t(y) * std::size_t(canvas.width()) * 3;
        raw.insert(raw.end(), px.begin() + std::ptrdiff_t(off),
                   px.begin() + std::ptrdiff_t(off + std::size_t(canvas.width()) * 3));
    }
    push_chunk(out, "IDAT", zlib_store(raw));
    push_chunk(out, "IEND", {});
    return out;
}

// ---------------------------------------------------------------------------
// Tick selection
// ---------------------------------------------------------------------------

double nice_step(double span, int target) {
    double best = 1.0;
    double best_diff = std::numeric_limits<double>::infinity();
    for (int exp = -9; exp <= 12; ++exp) {
        for (const double mant : {1.0, 2.0, 5.0}) {
            const double step = mant * std::pow(10.0, exp);
            const double count = span / step;
            const double diff = std::abs(count - double(target));
            if (diff < best_diff) {
                best_diff = diff;
                best = step;
            }
        }
    }
    return best;
}

double nice_time_step(double span, int target) {
    static const double steps[] = {1,     5,     15,    30,     60,     300,   900,
                                   1800,  3600,  10800, 21600,  43200,  86400, 604800,
                                   2592000, 31536000};
    double best = steps[0];
    double best_diff = std::numeric_limits<double>::infinity();
    for (const double step : steps) {
        const double diff = std::abs(span / step - double(target));
        if (diff < best_diff) {
            best_diff = diff;
            best = step;
        }
    }
    return best;
}

std::string format_value(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

void RenderConfig::validate() const {
    if (width_px < 100 || height_px < 100) {
        throw RenderError("plot must be at least 100x100 pixels");
    }
    if (tick_count_target < 2) {
        throw RenderError("tick_count_target must be >= 2");
    }
    if (line_width_px < 1 || font_scale < 1 || margin_px < 0) {
        throw RenderError("invalid render configuration");
    }
}

std::vector<std::uint8_t> render_plot(const Segment& segment, const RenderConfig& config) {
    config.validate();
    const TimeSeries& series = segment.series;
    const std::int64_t t = series.length();
    if (t < 2) {
        throw RenderError("cannot render a series shorter than 2 points");
    }
    if (config.x_axis_mode == XAxisMode::Timestamp && !series.timestamps) {
        throw RenderError("timestamp axis requested for a series without timestamps");
    }

    Canvas canvas(config.width_px, config.height_px, config.background);
    const int left = config.margin_px;
    const int right = config.width_px - config.margin_px - 1;
    const int top = config.margin_px / 2;
    const int bottom = config.height_px - config.margin_px - 1;
    if (right - left < 10 || bottom - top < 10) {
        throw RenderError("margins leave no plot area");
    }

    double vmin = series.values[0], vmax = series.values[0];
    for (const double v : series.values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (vmax - vmin <= 0.0) {
        vmin -= 1.0;
        vmax += 1.0;
    } else {
        const double pad = 0.05 * (vmax - vmin);
        vmin -= pad;
        vmax += pad;
    }

    const auto x_of = [&](double index1) {
        return left + int(std::llround((index1 - 1.0) / double(t - 1) * double(right - left)));
    };
    const auto y_of = [&](double v) {
        return bottom - int(std::llround((v - vmin) / (vmax - vmin) * double(bottom - top)));
    };

    // Axes.
    canvas.line(left, top, left, bottom, config.axis_color, 1);
    canvas.line(left, bottom, right, bottom, config.axis_color, 1);

    const int fs = config.font_scale;

    // Y ticks.
    {
        const double step = nice_step(vmax - vmin, std::max(2, config.tick_count_target / 2));
        for (double v = std::ceil(vmin / step) * step; v <= vmax + 1e-12; v += step) {
            const double vv = std::abs(v) < step * 1e-9 ? 0.0 : v;
            const int y = y_of(vv);
            canvas.line(left - 4, y, left, y, config.axis_color, 1);
            const std::string label = format_value(vv);
            canvas.text(left - 6 - Canvas::text_width(label, fs), y - 3 * fs, label,
                        config.axis_color, fs);
        }
    }

    // X ticks.
    if (config.x_axis_mode == XAxisMode::Index) {
        const double step = std::max(1.0, nice_step(double(t - 1), config.tick_count_target));
        for (double v = std::ceil(1.0 / step) * step; v <= double(t); v += step) {
            const std::int64_t idx = std::int64_t(std::llround(v));
            if (idx < 1 || idx > t) continue;
            const int x = x_of(double(idx));
            canvas.line(x, bottom, x, bottom + 4, config.axis_color, 1);
            const std::string label = std::to_string(idx);
            canvas.text(x - Canvas::text_width(label, fs) / 2, bottom + 6, label,
                        config.axis_color, fs);
        }
    } else {
        const auto& stamps = *series.timestamps;
        const double span = stamps.back() - stamps.front();
        const double step = nice_time_step(span, std::max(2, config.tick_count_target / 2));
        for (double tv = std::ceil(stamps.front() / step) * step; tv <= stamps.back() + 1e-9;
             tv += step) {
            // Interpolate the fractional index of this epoch value.
            const auto it = std::lower_bound(stamps.begin(), stamps.end(), tv);
            double fidx;
            if (it == stamps.begin()) {
                fidx = 1.0;
            } else if (it == stamps.end()) {
                fidx = double(t);
            } else {
                const std::size_t hi = std::size_t(it - stamps.begin());
                const double frac = (tv - stamps[hi - 1]) / (stamps[hi] - stamps[hi - 1]);
                fidx = double(hi) + frac;  // 1-based: hi is index of right neighbor
            }
            const int x = x_of(fidx);
            canvas.line(x, bottom, x, bottom + 4, config.axis_color, 1);
            const std::string label = util::format_timestamp(tv);
            canvas.text(x - Canvas::text_width(label, fs) / 2, bottom + 6, label,
                        config.axis_color, fs);
        }
    }

    // Data polyline. Every point is drawn; no down-sampling.
    int px = x_of(1.0), py = y_of(series.values[0]);
    for (std::int64_t i = 2; i <= t; ++i) {
        const int x = x_of(double(i));
        const int y = y_of(series.values[std::size_t(i - 1)]);
        canvas.line(px, py, x, y, config.foreground, config.line_width_px);
        px = x;
        py = y;
    }

    return encode_png(canvas);
}

void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& png) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw RenderError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(png.data()), std::streamsize(png.size()));
}

}  // namespace tsab::render
