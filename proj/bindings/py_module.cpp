#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "p2f/clustering.hpp"
#include "p2f/evidence.hpp"
#include "p2f/losses.hpp"
#include "p2f/matching.hpp"
#include "p2f/metrics.hpp"
#include "p2f/special.hpp"
#include "p2f/world.hpp"

namespace py = pybind11;

namespace {

p2f::world::Split parse_split(const std::string& name) {
    if (name == "train") return p2f::world::Split::train;
    if (name == "val_closed") return p2f::world::Split::val_closed;
    if (name == "val_open") return p2f::world::Split::val_open;
    throw py::value_error("unknown split '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_p2f, m) {
    m.doc() = "evidential mask segmentation core";

    m.def("lgamma", &p2f::special::lgamma, py::arg("x"));
    m.def("digamma", &p2f::special::digamma, py::arg("x"));

    m.def(
        "beta_nll",
        [](const std::vector<double>& alpha, const std::vector<double>& beta,
           const std::vector<double>& y) {
            const std::size_t n = alpha.size();
            return p2f::beta_nll(p2f::Tensor::from_data({n}, alpha),
                                 p2f::Tensor::from_data({n}, beta),
                                 p2f::Tensor::from_data({n}, y))
                .value();
        },
        py::arg("alpha"), py::arg("beta"), py::arg("y"));

    m.def(
        "symmetric_dice",
        [](const std::vector<double>& alpha, const std::vector<double>& beta,
           const std::vector<double>& y) {
            const std::size_t n = alpha.size();
            return p2f::symmetric_dice(p2f::Tensor::from_data({n}, alpha),
                                       p2f::Tensor::from_data({n}, beta),
                                       p2f::Tensor::from_data({n}, y))
                .value();
        },
        py::arg("alpha"), py::arg("beta"), py::arg("y"));

    m.def(
        "expected_mask",
        [](const std::vector<double>& alpha, const std::vector<double>& beta) {
            const std::size_t n = alpha.size();
            return p2f::expected_mask(p2f::Tensor::from_data({n}, alpha),
                                      p2f::Tensor::from_data({n}, beta))
                .data();
        },
        py::arg("alpha"), py::arg("beta"));

    m.def(
        "hungarian",
        [](const std::vector<std::vector<double>>& cost) {
            p2f::CostMatrix cm;
            cm.rows = cost.size();
            cm.cols = cost.empty() ? 0 : cost[0].size();
            for (const auto& row : cost) {
                if (row.size() != cm.cols) throw py::value_error("ragged cost matrix");
                cm.costs.insert(cm.costs.end(), row.begin(), row.end());
            }
            return p2f::hungarian(cm);
        },
        py::arg("cost"));

    m.def(
        "evidential_sample",
        [](const std::vector<double>& uncertainty, std::size_t budget, std::uint64_t seed) {
            p2f::SplitMix64 rng(seed);
            return p2f::evidential_sample(uncertainty, budget, rng);
        },
        py::arg("uncertainty"), py::arg("budget"), py::arg("seed"));

    m.def(
        "dbscan_cosine",
        [](const std::vector<std::vector<double>>& points, double eps,
           std::size_t min_samples) {
            std::vector<double> flat;
            const std::size_t dim = points.empty() ? 1 : points[0].size();
            for (const auto& pt : points) {
                if (pt.size() != dim) throw py::value_error("ragged point list");
                flat.insert(flat.end(), pt.begin(), pt.end());
            }
            return p2f::dbscan_cosine(flat, dim, eps, min_samples);
        },
        py::arg("points"), py::arg("eps") = 0.04, py::arg("min_samples") = 17);

    m.def(
        "generate_sample",
        [](std::uint64_t seed, const std::string& split, std::size_t index, std::size_t size) {
            p2f::world::SceneSpec spec;
            spec.seed = seed;
            spec.size = size;
            p2f::world::Sample s = p2f::world::generate_sample(spec, parse_split(split), index);
            py::dict out;
            out["image"] = s.image;
            out["class_map"] = s.label.class_map;
            out["instance_map"] = s.label.instance_map;
            out["height"] = s.label.height;
            out["width"] = s.label.width;
            return out;
        },
        py::arg("seed"), py::arg("split"), py::arg("index"), py::arg("size") = 64);

    m.def(
        "pixel_anomaly_metrics",
        [](const std::vector<double>& scores, const std::vector<bool>& gt_anomaly) {
            std::vector<std::uint8_t> gt, roi(scores.size(), 1);
            for (bool b : gt_anomaly) gt.push_back(b ? 1 : 0);
            const p2f::PixelAnomalyResult r = p2f::pixel_anomaly_metrics(scores, gt, roi);
            return py::make_tuple(r.ap, r.fpr_at_95tpr);
        },
        py::arg("scores"), py::arg("gt_anomaly"));
}
