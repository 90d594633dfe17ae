#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "entangle/cfn.hpp"
#include "entangle/experiments.hpp"
#include "entangle/nn.hpp"
#include "entangle/render.hpp"
#include "entangle/taskdata.hpp"

namespace py = pybind11;
using namespace entangle;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<double> data(a.data(), a.data() + a.size());
  if (a.ndim() == 1) return Tensor::vec(std::move(data));
  if (a.ndim() == 2)
    return Tensor::matrix(static_cast<std::size_t>(a.shape(0)),
                          static_cast<std::size_t>(a.shape(1)), std::move(data));
  throw std::invalid_argument("expected a rank-1 or rank-2 array");
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

using InArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "entangle core operations";

  m.def(
      "apply_primitive",
      [](const std::string& name, const InArray& v) {
        return array_from_tensor(apply_primitive(primitive_from_name(name), tensor_from_array(v)));
      },
      py::arg("name"), py::arg("v"),
      "Apply one of the eight primitive vector functions by name.");

  m.def("primitive_names", [] {
    std::vector<std::string> names;
    for (int i = 0; i < kNumPrimitives; ++i)
      names.push_back(primitive_name(static_cast<PrimitiveId>(i)));
    return names;
  });

  m.def(
      "sample_batch",
      [](std::uint64_t seed, std::size_t dim, std::size_t batch_size,
         const std::optional<std::string>& task) {
        std::optional<PrimitiveId> id;
        if (task) id = primitive_from_name(*task);
        py::list out;
        for (const TaskSample& s : sample_batch(seed, dim, batch_size, id)) {
          py::dict d;
          d["input"] = array_from_tensor(s.input);
          d["task"] = primitive_name(s.task);
          d["one_hot"] = array_from_tensor(s.one_hot);
          d["target"] = array_from_tensor(s.target);
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("seed"), py::arg("dim") = 10, py::arg("batch_size") = 20,
      py::arg("task") = std::nullopt);

  m.def(
      "softmax", [](const InArray& x) { return array_from_tensor(softmax(tensor_from_array(x))); },
      py::arg("x"));

  m.def(
      "prelu",
      [](const InArray& x, double a) { return array_from_tensor(prelu(tensor_from_array(x), a)); },
      py::arg("x"), py::arg("a"));

  m.def(
      "sharpen",
      [](const InArray& w, double gamma, double sigma, std::uint64_t seed, double epsilon_floor) {
        Rng rng(seed);
        WeightVector wv{tensor_from_array(w)};
        return array_from_tensor(sharpen(wv, gamma, sigma, sigma > 0.0 ? &rng : nullptr,
                                         epsilon_floor)
                                     .w);
      },
      py::arg("w"), py::arg("gamma"), py::arg("sigma") = 0.0, py::arg("seed") = 0,
      py::arg("epsilon_floor") = 1e-6,
      "Noise-and-sharpen a weight vector: (w + N(0, sigma^2))^gamma, renormalized.");

  m.def(
      "disentanglement",
      [](const std::vector<InArray>& weights) {
        std::vector<WeightVector> wvs;
        wvs.reserve(weights.size());
        for (const auto& w : weights) wvs.push_back(WeightVector{tensor_from_array(w)});
        return disentanglement(wvs);
      },
      py::arg("weights"), "Mean L2 norm of the weight vectors over a batch.");

  m.def(
      "gaussian_kl_to_standard",
      [](const InArray& mu, const InArray& sigma) {
        return gaussian_kl_to_standard(tensor_from_array(mu), tensor_from_array(sigma));
      },
      py::arg("mu"), py::arg("sigma"));

  m.def(
      "render_sprite",
      [](double azimuth, double elevation, double light_azimuth, const InArray& intrinsic,
         std::size_t side) {
        SceneParams p;
        p.azimuth = azimuth;
        p.elevation = elevation;
        p.light_azimuth = light_azimuth;
        p.intrinsic = tensor_from_array(intrinsic);
        return array_from_tensor(render_sprite(p, side));
      },
      py::arg("azimuth"), py::arg("elevation"), py::arg("light_azimuth"), py::arg("intrinsic"),
      py::arg("side") = 32);

  m.def("ffn_param_count", [](std::size_t dim) {
    return count_params(FfnBaseline(dim, kNumPrimitives, 0).params());
  }, py::arg("dim") = 10);

  m.def("cfn_param_count", [] {
    CfnConfig cfg;
    return count_params(CfnModel(cfg, 0).params());
  });

#ifdef ENTANGLE_VERSION
  m.attr("__version__") = ENTANGLE_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
