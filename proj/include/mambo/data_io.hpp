#pragma once

#include "mambo/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mambo {

struct SyntheticSpec {
    int d = 32;
    int M = 8;
    int num_ood_classes = 8;
    int shots = 4;
    int eval_per_class = 50;
    int H = 4;
    int W = 4;
    int pool_size = 6;           // shared background archetypes
    double coverage_min = 0.1;   // foreground fraction range
    double coverage_max = 0.4;
    double noise = 0.15;
    double common_weight = 2.0;  // weight of the direction shared by every patch
    double near_ood = 0.5;       // cosine between an OOD direction and its paired ID direction
    std::uint64_t seed = 0;
    Vec common_direction;        // empty: drawn from the seed

    void validate() const;
};

struct SyntheticData {
    Mat id_archetypes;   // M x d, unit rows
    Mat ood_archetypes;  // num_ood_classes x d
    Mat bg_archetypes;   // pool_size x d
    Dataset train;
    Dataset id_test;
    Dataset ood_test;    // labels absent
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// |J n bg| / |J u bg|; both empty counts as an exact match.
double extraction_iou(const BackgroundSet& J, const std::vector<bool>& true_background);

// ---- feature dump ("MMBO", version 1, little-endian) ----

inline constexpr std::uint16_t kDumpVersion = 1;
inline constexpr std::uint16_t kDumpFlagBackground = 1u << 0;
inline constexpr std::uint16_t kDumpFlagMasks = 1u << 1;

struct DumpRecord {
    std::int32_t label = -1;  // -1 marks OOD
    std::vector<float> global;
    std::vector<float> local;  // H*W*d
    std::vector<std::uint8_t> mask;  // empty unless the dump carries masks; 1 = background

    bool operator==(const DumpRecord&) const = default;
};

struct FeatureDump {
    std::uint32_t d = 0, M = 0, H = 0, W = 0;
    std::vector<float> class_text;  // M*d
    std::optional<std::vector<float>> background;
    bool has_masks = false;
    std::vector<DumpRecord> records;

    bool operator==(const FeatureDump&) const = default;
};

std::vector<unsigned char> serialize_dump(const FeatureDump& dump);
FeatureDump parse_dump(const std::vector<unsigned char>& bytes);
void write_dump(const std::string& path, const FeatureDump& dump);
FeatureDump read_dump(const std::string& path);

FeatureDump make_dump(const Dataset& data, const Mat& class_text, const Vec* background, int H, int W);
// Converts to f64 bundles, renormalizing each vector.
Dataset dump_bundles(const FeatureDump& dump);
Mat dump_class_text(const FeatureDump& dump);
std::optional<Vec> dump_background(const FeatureDump& dump);

// ---- checkpoint ("MMBC"): config text plus f64 prompt tensors ----

struct Checkpoint {
    std::string config_text;
    PromptSet prompt;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

std::vector<unsigned char> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes);

std::string csv_field(const std::string& s);
std::string format_double(double v);  // shortest round-trip form via %.17g

}  // namespace mambo
