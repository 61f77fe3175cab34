#pragma once

#include "mambo/core.hpp"

#include <string>
#include <vector>

namespace mambo {

// Binary PPM (P6), one pixel per patch scaled by `scale`, blue (low) to red (high), min-max normalized.
std::vector<unsigned char> heatmap_ppm(const Vec& values, int H, int W, int scale = 1);

// Binary PGM (P5), one pixel per patch: 255 = extracted background, 0 = kept.
std::vector<unsigned char> mask_pgm(const BackgroundSet& J, int H, int W);

// H rows of W comma-separated values, %.17g.
std::string grid_csv(const Vec& values, int H, int W);
Vec parse_grid_csv(const std::string& text, int* H = nullptr, int* W = nullptr);

// Writes <dir>/<id>_sim.{ppm,csv}, <id>_mask.pgm, <id>_delta.{ppm,csv}.
void write_sample_maps(const std::string& dir, const std::string& id, const Vec& refined_sim, const Vec& delta,
                       const BackgroundSet& J, int H, int W);

}  // namespace mambo
