#include "mambo/viz.hpp"

#include "mambo/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace mambo {

namespace {

void check_grid(const Vec& v, int H, int W) {
    if (H < 1 || W < 1 || v.size() != static_cast<Eigen::Index>(H) * W)
        throw ShapeError("map size does not match the H x W grid");
}

std::vector<unsigned char> header(const char* magic, int w, int h, bool maxval) {
    std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n";
    if (maxval) s += "255\n";
    return {s.begin(), s.end()};
}

// Blue -> white -> red.
void colour(double t, unsigned char* rgb) {
    t = std::clamp(t, 0.0, 1.0);
    double r, g, b;
    if (t < 0.5) {
        r = g = 2 * t;
        b = 1.0;
    } else {
        r = 1.0;
        g = b = 2 * (1 - t);
    }
    rgb[0] = static_cast<unsigned char>(std::lround(255 * r));
    rgb[1] = static_cast<unsigned char>(std::lround(255 * g));
    rgb[2] = static_cast<unsigned char>(std::lround(255 * b));
}

}  // namespace

std::vector<unsigned char> heatmap_ppm(const Vec& values, int H, int W, int scale) {
    check_grid(values, H, W);
    if (scale < 1) throw ConfigError("heatmap scale must be >= 1");
    const double lo = values.minCoeff(), hi = values.maxCoeff();
    auto out = header("P6", W * scale, H * scale, true);
    for (int y = 0; y < H * scale; ++y)
        for (int x = 0; x < W * scale; ++x) {
            const double v = values[(y / scale) * W + x / scale];
            unsigned char rgb[3];
            colour(hi > lo ? (v - lo) / (hi - lo) : 0.5, rgb);
            out.insert(out.end(), rgb, rgb + 3);
        }
    return out;
}

std::vector<unsigned char> mask_pgm(const BackgroundSet& J, int H, int W) {
    auto out = header("P5", W, H, true);
    std::vector<unsigned char> px(static_cast<std::size_t>(H) * W, 0);
    for (int k : J.indices) {
        if (k < 0 || k >= H * W) throw IndexError("background index out of range");
        px[static_cast<std::size_t>(k)] = 255;
    }
    out.insert(out.end(), px.begin(), px.end());
    return out;
}

std::string grid_csv(const Vec& values, int H, int W) {
    check_grid(values, H, W);
    std::string s;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (c) s += ',';
            s += format_double(values[r * W + c]);
        }
        s += '\n';
    }
    return s;
}

Vec parse_grid_csv(const std::string& text, int* H, int* W) {
    std::vector<double> vals;
    std::istringstream in(text);
    std::string line;
    int rows = 0, cols = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        int n = 0;
        while (std::getline(ls, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError("grid CSV has a non-numeric cell");
            }
            ++n;
        }
        if (cols >= 0 && n != cols) throw DataError("grid CSV rows differ in length");
        cols = n;
        ++rows;
    }
    if (H) *H = rows;
    if (W) *W = std::max(cols, 0);
    return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void write_sample_maps(const std::string& dir, const std::string& id, const Vec& refined_sim, const Vec& delta,
                       const BackgroundSet& J, int H, int W) {
    std::filesystem::create_directories(dir);
    const std::string base = (std::filesystem::path(dir) / id).string();
    auto text = [](const std::string& s) { return std::vector<unsigned char>(s.begin(), s.end()); };
    constexpr int kScale = 16;
    write_file_bytes(base + "_sim.ppm", heatmap_ppm(refined_sim, H, W, kScale));
    write_file_bytes(base + "_sim.csv", text(grid_csv(refined_sim, H, W)));
    write_file_bytes(base + "_mask.pgm", mask_pgm(J, H, W));
    write_file_bytes(base + "_delta.ppm", heatmap_ppm(delta, H, W, kScale));
    write_file_bytes(base + "_delta.csv", text(grid_csv(delta, H, W)));
}

}  // namespace mambo
