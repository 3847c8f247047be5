#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "lab/extension_field.hpp"
#include "lab/kakeya_tubes.hpp"
#include "lab/report.hpp"
#include "lab/two_scale_chain.hpp"

namespace lab {

using json = nlohmann::ordered_json;

std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(const std::string& text);
// Little-endian 64-bit floats.
std::string encode_doubles(const double* data, std::size_t count);
std::vector<double> decode_doubles(const std::string& text);

std::string sha1_hex(const std::string& text);
// SHA-1 of the compact dump; ordered_json keeps key order stable.
std::string config_hash(const json& config);

json to_json(const CapSystem& caps);
// Rebuilds the system and checks the quadrature nodes against the stored ones.
CapSystem cap_system_from_json(const json& j);

json to_json(const TubeFamily& family);
TubeFamily tube_family_from_json(const json& j);

json to_json(const TwoScaleTrace& trace);
json to_json(const RatioReport& r);

// <stem>.bin holds interleaved little-endian complex64 values, <stem>.json
// the grid and provenance.
void write_field(const std::string& stem, const Field& f, const json& provenance = json::object());

void write_json(const std::string& path, const json& j);

}  // namespace lab
