#pragma once

#include <cstdint>
#include <string>

#include "entangle/rng.hpp"
#include "entangle/tensor.hpp"

namespace entangle {

inline constexpr std::size_t kSceneIntrinsicDim = 4;

/// Scene description consumed by the sprite renderer.
/// azimuth, light_azimuth in [-pi, pi); elevation in [-pi/4, pi/4];
/// intrinsic entries in [0, 1] (radius, aspect, texture frequency, texture phase).
struct SceneParams {
  double azimuth = 0.0;
  double elevation = 0.0;
  double light_azimuth = 0.0;
  Tensor intrinsic;
};

SceneParams random_scene(Rng& rng);

/// Deterministic side x side grayscale sprite in [0,1], returned rank-2.
///
/// An ellipse whose in-plane orientation tracks azimuth (half a turn across the
/// azimuth range, so every azimuth in [-pi, pi) renders a distinct image), whose
/// aspect tracks elevation, shaded by cos(light_azimuth - pixel angle), with
/// radii and texture taken from the intrinsic vector.
Tensor render_sprite(const SceneParams& p, std::size_t side);

Tensor flatten(const Tensor& t);

/// Binary PGM (P5), maxval 255. Values are clamped to [0,1] before quantizing.
void write_pgm(const Tensor& image, const std::string& path);

}  // namespace entangle
