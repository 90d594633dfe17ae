#include "entangle/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace entangle {

namespace {
constexpr double kPi = 3.14159265358979323846;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
}  // namespace

SceneParams random_scene(Rng& rng) {
  SceneParams p;
  p.azimuth = rng.uniform(-kPi, kPi);
  p.elevation = rng.uniform(-kPi / 4.0, kPi / 4.0);
  p.light_azimuth = rng.uniform(-kPi, kPi);
  p.intrinsic = Tensor::zeros({kSceneIntrinsicDim});
  for (std::size_t i = 0; i < kSceneIntrinsicDim; ++i) p.intrinsic[i] = rng.uniform();
  return p;
}

Tensor render_sprite(const SceneParams& p, std::size_t side) {
  if (side < 8) throw std::invalid_argument("render_sprite: side must be >= 8");
  require_vector(p.intrinsic, kSceneIntrinsicDim, "render_sprite");

  const double i0 = p.intrinsic[0], i1 = p.intrinsic[1], i2 = p.intrinsic[2],
               i3 = p.intrinsic[3];
  const double theta = p.azimuth / 2.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double a = 0.42 + 0.30 * i0;
  const double b = a * (0.30 + 0.35 * i1) * (1.0 + 0.55 * std::sin(p.elevation));
  const double tex_freq = 1.0 + 3.0 * i2;
  const double tex_phase = 2.0 * kPi * i3;

  Tensor img = Tensor::zeros({side, side});
  for (std::size_t row = 0; row < side; ++row) {
    double v = 1.0 - 2.0 * (static_cast<double>(row) + 0.5) / static_cast<double>(side);
    for (std::size_t col = 0; col < side; ++col) {
      double u = 2.0 * (static_cast<double>(col) + 0.5) / static_cast<double>(side) - 1.0;
      double major = ct * u + st * v;
      double minor = -st * u + ct * v;
      double r = std::sqrt((major / a) * (major / a) + (minor / b) * (minor / b));
      double coverage = std::clamp((1.08 - r) / 0.16, 0.0, 1.0);
      if (coverage == 0.0) continue;
      double base = 0.45 + 0.33 * (major / a) +
                    0.12 * std::sin(2.0 * kPi * tex_freq * (minor / b) + tex_phase);
      double shade = 0.62 + 0.38 * std::cos(p.light_azimuth - std::atan2(v, u));
      img.at(row, col) = clamp01(coverage * base * shade);
    }
  }
  return img;
}

Tensor flatten(const Tensor& t) { return Tensor::vec(t.values()); }

void write_pgm(const Tensor& image, const std::string& path) {
  if (image.rank() != 2) throw std::invalid_argument("write_pgm: expected a rank-2 tensor");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  for (std::size_t i = 0; i < image.size(); ++i) {
    unsigned char byte = static_cast<unsigned char>(std::lround(clamp01(image[i]) * 255.0));
    out.write(reinterpret_cast<const char*>(&byte), 1);
  }
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

}  // namespace entangle
