#pragma once

#include "forge/image.hpp"
#include "forge/material.hpp"
#include "forge/tensor.hpp"

#include <string>

namespace forge {

/// Decodes an 8- or 16-bit gray/RGB PNG into [0,1] floats (alpha stripped).
Tensor<float> read_png(const std::string& path);

/// Encodes a 1- or 3-channel [0,1] tensor; bit_depth is 8 or 16.
void write_png(const std::string& path, const Tensor<float>& img, int bit_depth = 16);

/// Reads a photo as display-encoded RGB; grayscale inputs are replicated.
LdrImage<float> read_ldr_photo(const std::string& path);

/// One directory per material with fixed names: diffuse/specular/roughness
/// as 16-bit linear values, normal as 16-bit RGB with channel = n*0.5 + 0.5.
void save_maps(const std::string& dir, const SvbrdfMaps<float>& maps);
SvbrdfMaps<float> load_maps(const std::string& dir);

}  // namespace forge
