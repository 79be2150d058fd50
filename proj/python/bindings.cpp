#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "prnet/dataset.hpp"
#include "prnet/eval.hpp"
#include "prnet/gradcheck.hpp"
#include "prnet/losses.hpp"
#include "prnet/prn.hpp"

namespace py = pybind11;
using namespace prnet;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    std::vector<size_t> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<size_t>(arr.shape(i));
    Tensor t(std::move(shape));
    std::copy(arr.data(), arr.data() + arr.size(), t.data());
    return t;
}

py::array_t<double> to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> arr(shape);
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

LandmarkSet to_landmarks(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2 || arr.shape(1) != 2) {
        throw ValidationError("landmarks must be an (N, 2) array");
    }
    LandmarkSet lm;
    lm.points.resize(static_cast<size_t>(arr.shape(0)));
    auto view = arr.unchecked<2>();
    for (py::ssize_t i = 0; i < arr.shape(0); ++i) {
        lm.points[static_cast<size_t>(i)] = {view(i, 0), view(i, 1)};
    }
    return lm;
}

py::array_t<double> from_landmarks(const LandmarkSet& lm) {
    py::array_t<double> arr({static_cast<py::ssize_t>(lm.points.size()), py::ssize_t(2)});
    auto view = arr.mutable_unchecked<2>();
    for (size_t i = 0; i < lm.points.size(); ++i) {
        view(static_cast<py::ssize_t>(i), 0) = lm.points[i].x;
        view(static_cast<py::ssize_t>(i), 1) = lm.points[i].y;
    }
    return arr;
}

std::vector<Triplet> to_triplets(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                                 const py::array_t<double, py::array::c_style | py::array::forcecast>& p,
                                 const py::array_t<double, py::array::c_style | py::array::forcecast>& n) {
    Tensor ta = to_tensor(a), tp = to_tensor(p), tn = to_tensor(n);
    if (ta.rank() != 2 || !ta.same_shape(tp) || !ta.same_shape(tn)) {
        throw ShapeMismatch("anchor/positive/negative must share one (T, E) shape");
    }
    std::vector<Triplet> out;
    for (size_t i = 0; i < ta.dim(0); ++i) {
        out.push_back({ta.row_slice(i), tp.row_slice(i), tn.row_slice(i)});
    }
    return out;
}

// report rows in the same "metric, operating point, value" order as the files
std::vector<std::tuple<std::string, double, double>> report_rows(const EvalReport& r) {
    std::vector<std::tuple<std::string, double, double>> rows;
    for (auto [p, v] : r.tar_at_far) rows.emplace_back("tar_at_far", p, v);
    for (auto [p, v] : r.tar_threshold) rows.emplace_back("tar_threshold", p, v);
    for (auto [p, v] : r.rank_n) rows.emplace_back("rank_n", static_cast<double>(p), v);
    for (auto [p, v] : r.tpir_at_fpir) rows.emplace_back("tpir_at_fpir", p, v);
    for (auto [p, v] : r.tpir_threshold) rows.emplace_back("tpir_threshold", p, v);
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Pairwise relational face recognition core";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("enumerate_pairs", &enumerate_pairs, py::arg("n"),
          "All (i, j) with i < j in lexicographic order.");

    m.def("landmark_subset", &landmark_subset, py::arg("total"), py::arg("count"),
          "Evenly spaced ascending subset of landmark indices.");

    m.def(
        "aggregate",
        [](const std::vector<std::tuple<size_t, size_t, py::array_t<double>>>& relations) {
            std::vector<Relation> rel;
            for (const auto& [i, j, v] : relations) rel.push_back({i, j, to_tensor(v)});
            return to_array(aggregate(std::move(rel)));
        },
        py::arg("relations"),
        "Order-independent sum of (i, j, vector) relation triples.");

    m.def(
        "align",
        [](const py::array_t<double>& landmarks, double output_size) {
            AlignResult res = align_face(to_landmarks(landmarks), output_size);
            py::dict out;
            out["aligned"] = from_landmarks(res.aligned);
            out["rotation"] = res.transform.rotation;
            out["scale"] = res.transform.scale;
            out["dx"] = res.transform.dx;
            out["dy"] = res.transform.dy;
            return out;
        },
        py::arg("landmarks"), py::arg("output_size") = 140.0,
        "Upright-align a 68-point annotation into the square output frame.");

    m.def(
        "roi_project",
        [](const py::array_t<double>& points, double input_size, size_t fmap_size) {
            LandmarkSet pts = to_landmarks(points);
            RoiSpec spec;
            spec.input_size = input_size;
            spec.fmap_size = fmap_size;
            py::array_t<py::ssize_t> out(
                {static_cast<py::ssize_t>(pts.points.size()), py::ssize_t(2)});
            auto view = out.mutable_unchecked<2>();
            for (size_t i = 0; i < pts.points.size(); ++i) {
                auto [row, col] = roi_project(pts.points[i], spec);
                view(static_cast<py::ssize_t>(i), 0) = static_cast<py::ssize_t>(row);
                view(static_cast<py::ssize_t>(i), 1) = static_cast<py::ssize_t>(col);
            }
            return out;
        },
        py::arg("points"), py::arg("input_size") = 140.0, py::arg("fmap_size") = 9,
        "Project (x, y) points onto feature-map (row, col) cells.");

    m.def(
        "face_template", [] { return from_landmarks(face_template()); },
        "The undeformed 68-point template in a 100x100 frame.");

    m.def(
        "triplet_ratio_loss",
        [](const py::array_t<double>& anchor, const py::array_t<double>& positive,
           const py::array_t<double>& negative, double margin, bool mean) {
            return triplet_ratio_loss(to_triplets(anchor, positive, negative), margin, nullptr,
                                      mean);
        },
        py::arg("anchor"), py::arg("positive"), py::arg("negative"), py::arg("margin") = 0.1,
        py::arg("mean") = false,
        "Distance-ratio hinge over (T, E) triplet rows.");

    m.def(
        "pairwise_loss",
        [](const py::array_t<double>& anchor, const py::array_t<double>& positive, bool mean) {
            return pairwise_loss(to_triplets(anchor, positive, positive), nullptr, mean);
        },
        py::arg("anchor"), py::arg("positive"), py::arg("mean") = false,
        "Sum of squared anchor-positive distances over (T, E) rows.");

    m.def(
        "verify_pairs",
        [](const py::array_t<double>& embeddings,
           const std::vector<std::tuple<size_t, size_t, bool>>& pairs) {
            std::vector<PairLabel> pl;
            for (const auto& [a, b, same] : pairs) pl.push_back({a, b, same});
            return report_rows(verify_pairs(to_tensor(embeddings), pl));
        },
        py::arg("embeddings"), py::arg("pairs"),
        "Verification sweep; rows mirror the report file records.");

    m.def(
        "identify",
        [](const py::array_t<double>& gallery, const std::vector<size_t>& gallery_labels,
           const py::array_t<double>& probes, const std::vector<size_t>& probe_labels) {
            return report_rows(
                identify(to_tensor(gallery), gallery_labels, to_tensor(probes), probe_labels));
        },
        py::arg("gallery"), py::arg("gallery_labels"), py::arg("probes"), py::arg("probe_labels"),
        "Rank-N and open-set identification; rows mirror the report file records.");

    m.def(
        "gradcheck",
        [](const std::string& target, size_t seeds) {
            py::dict out;
            for (const TargetReport& r : run_gradcheck(target, seeds)) {
                out[py::str(r.target)] = r.max_rel_err;
            }
            return out;
        },
        py::arg("target") = "all", py::arg("seeds") = 3,
        "Finite-difference audit; returns max relative error per module.");
}
