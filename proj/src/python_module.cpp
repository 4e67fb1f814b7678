#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "limetree/blackbox.hpp"
#include "limetree/error.hpp"
#include "limetree/experiments.hpp"
#include "limetree/explanations.hpp"
#include "limetree/fidelity.hpp"
#include "limetree/image.hpp"
#include "limetree/interpretable_domain.hpp"
#include "limetree/lime_baseline.hpp"
#include "limetree/pipeline.hpp"
#include "limetree/sampling.hpp"
#include "limetree/surrogate_tree.hpp"

namespace py = pybind11;
using namespace limetree;
using nlohmann::json;

namespace {

py::object to_python(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_python(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<InterpretablePoint> points_of(const std::vector<std::string>& bits) {
  std::vector<InterpretablePoint> out;
  for (const auto& b : bits) out.push_back(InterpretablePoint::from_string(b));
  return out;
}

std::vector<std::string> strings_of(const std::vector<InterpretablePoint>& points) {
  std::vector<std::string> out;
  for (const auto& p : points) out.push_back(p.to_string());
  return out;
}

std::vector<std::size_t> resolve_classes(const BlackBox& bb, const InterpretableDomain& domain,
                                         const std::optional<std::vector<std::size_t>>& classes, std::size_t top) {
  if (classes) return *classes;
  return top_classes(bb, domain, top);
}

OcclusionStrategy occlusion_of(const std::string& name) {
  if (name == "mean") return OcclusionStrategy::mean();
  require(name == "black", "occlusion must be 'black' or 'mean'");
  return OcclusionStrategy::solid();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-class surrogate tree explanations";

  py::register_exception<Error>(m, "LimetreeError", PyExc_ValueError);

  py::class_<InterpretableDomain>(m, "Domain")
      .def_static(
          "image_grid",
          [](const py::bytes& image, std::size_t rows, std::size_t cols, const std::string& occlusion) {
            const std::string raw = image;
            RgbImage rgb = decode_rgb_image(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
            auto seg = build_grid_segmentation(rgb.width(), rgb.height(), rows, cols);
            return InterpretableDomain::image(std::move(rgb), std::move(seg), occlusion_of(occlusion));
          },
          py::arg("image"), py::arg("rows"), py::arg("cols"), py::arg("occlusion") = "black")
      .def_static(
          "image_mask",
          [](const py::bytes& image, const py::bytes& mask, const std::string& occlusion) {
            const std::string raw = image, mraw = mask;
            RgbImage rgb = decode_rgb_image(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
            const LabelImage labels =
                decode_label_image(std::span(reinterpret_cast<const std::uint8_t*>(mraw.data()), mraw.size()));
            return InterpretableDomain::image(std::move(rgb), Segmentation(labels), occlusion_of(occlusion));
          },
          py::arg("image"), py::arg("mask"), py::arg("occlusion") = "black")
      .def_static("text", py::overload_cast<const std::string&>(&InterpretableDomain::text), py::arg("text"))
      .def_static("tokens", &InterpretableDomain::tokens, py::arg("tokens"))
      .def_property_readonly("d", &InterpretableDomain::dimension)
      .def_property_readonly("kind", [](const InterpretableDomain& d) { return to_string(d.kind()); })
      .def_property_readonly("bijective", &InterpretableDomain::bijective)
      .def("merged", &InterpretableDomain::merged, py::arg("groups"))
      .def("render_png",
           [](const InterpretableDomain& d, const std::string& bits) {
             const auto png = encode_png(std::get<RgbImage>(d.from_interpretable(InterpretablePoint::from_string(bits))));
             return py::bytes(reinterpret_cast<const char*>(png.data()), png.size());
           })
      .def("render_text",
           [](const InterpretableDomain& d, const std::string& bits) {
             return std::get<TokenSequence>(d.from_interpretable(InterpretablePoint::from_string(bits))).joined();
           })
      .def("to_json", [](const InterpretableDomain& d) { return to_python(d.to_json()); });

  py::class_<BlackBox, std::shared_ptr<BlackBox>>(m, "BlackBox")
      .def_property_readonly("class_count", &BlackBox::class_count)
      .def(
          "predict",
          [](const BlackBox& bb, const InterpretableDomain& domain, const std::vector<std::string>& bits) {
            return predict_points(bb, domain, points_of(bits)).to_rows();
          },
          py::arg("domain"), py::arg("points"));
  m.def(
      "black_box",
      [](const py::object& descriptor, const InterpretableDomain& domain) {
        return std::const_pointer_cast<BlackBox>(make_black_box(from_python(descriptor), domain));
      },
      py::arg("descriptor"), py::arg("domain"));

  py::class_<SurrogateTree>(m, "Tree")
      .def_property_readonly("d", &SurrogateTree::dimension)
      .def_property_readonly("depth", &SurrogateTree::depth)
      .def_property_readonly("width", &SurrogateTree::width)
      .def_property_readonly("classes", &SurrogateTree::classes)
      .def_property_readonly("variant", [](const SurrogateTree& t) { return to_string(t.meta().variant); })
      .def("leaves", &SurrogateTree::leaves)
      .def("predict", [](const SurrogateTree& t, const std::string& bits) {
        return t.predict(InterpretablePoint::from_string(bits));
      })
      .def("leaf_of", [](const SurrogateTree& t, const std::string& bits) {
        return t.leaf_of(InterpretablePoint::from_string(bits));
      })
      .def("minimal_set",
           [](const SurrogateTree& t) {
             std::map<std::size_t, std::string> out;
             for (const auto& [leaf, p] : minimal_set(t)) out[leaf] = p.to_string();
             return out;
           })
      .def("importance", &feature_importance)
      .def("rule", [](const SurrogateTree& t, std::size_t leaf) { return to_python(extract_rule(t, leaf).to_json()); })
      .def("to_json", [](const SurrogateTree& t) { return t.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) { return SurrogateTree::from_json(json::parse(text)); });

  m.def("enumerate_domain", [](std::size_t d) { return strings_of(enumerate_domain(d)); }, py::arg("d"));
  m.def(
      "cosine_distance",
      [](const std::string& a, const std::string& b) {
        return cosine_distance(InterpretablePoint::from_string(a), InterpretablePoint::from_string(b));
      },
      py::arg("a"), py::arg("b"));
  m.def("exponential_kernel", &exponential_kernel, py::arg("distance"), py::arg("width") = kDefaultKernelWidth);
  m.def(
      "loss_limetree",
      [](const std::vector<std::vector<double>>& f, const std::vector<std::vector<double>>& g,
         const std::vector<double>& weights, bool halve) {
        return loss_limetree(Matrix::from_rows(f), Matrix::from_rows(g), weights, halve);
      },
      py::arg("f"), py::arg("g"), py::arg("weights"), py::arg("halve") = true);

  m.def(
      "fit_limetree",
      [](const BlackBox& bb, const InterpretableDomain& domain, std::optional<std::vector<std::size_t>> classes,
         std::size_t top, double epsilon, std::size_t samples, std::uint64_t seed) {
        SamplingOptions options;
        options.samples = samples;
        options.seed = seed;
        const auto sample = build_sample(domain.dimension(), options);
        const auto cls = resolve_classes(bb, domain, classes, top);
        auto fit = fit_limetree(bb, domain, sample, cls, epsilon, domain.dimension());
        return py::make_tuple(fit.tree, to_python(fit.report.to_json()));
      },
      py::arg("black_box"), py::arg("domain"), py::arg("classes") = py::none(), py::arg("top") = 3,
      py::arg("epsilon") = 0.95, py::arg("samples") = 1000, py::arg("seed") = 0);
  m.def(
      "relabel_leaves",
      [](const SurrogateTree& t, const BlackBox& bb, const InterpretableDomain& domain) {
        return relabel_leaves(t, bb, domain);
      },
      py::arg("tree"), py::arg("black_box"), py::arg("domain"));
  m.def(
      "fit_complete",
      [](const BlackBox& bb, const InterpretableDomain& domain, std::optional<std::vector<std::size_t>> classes,
         std::size_t top) { return fit_complete(bb, domain, resolve_classes(bb, domain, classes, top)); },
      py::arg("black_box"), py::arg("domain"), py::arg("classes") = py::none(), py::arg("top") = 3);
  m.def(
      "verify_fidelity",
      [](const SurrogateTree& t, const BlackBox& bb, const InterpretableDomain& domain, const std::string& scope) {
        return to_python(verify_fidelity(t, bb, domain, parse_fidelity_scope(scope)).to_json());
      },
      py::arg("tree"), py::arg("black_box"), py::arg("domain"), py::arg("scope") = "minimal-set");
  m.def(
      "counterfactual",
      [](const py::object& query, const SurrogateTree& t, const InterpretableDomain& domain, const BlackBox& bb) {
        const json q = from_python(query);
        CounterfactualQuery parsed = CounterfactualQuery::from_json(q);
        if (!q.contains("oracle")) parsed.oracle = default_oracle(t);
        return to_python(counterfactual(parsed, t, domain, &bb).to_json());
      },
      py::arg("query"), py::arg("tree"), py::arg("domain"), py::arg("black_box"));
  m.def(
      "what_if",
      [](const std::string& bits, const SurrogateTree& t, const InterpretableDomain& domain, const BlackBox& bb,
         std::optional<std::string> oracle) {
        const Oracle o = oracle ? parse_oracle(*oracle) : default_oracle(t);
        return to_python(what_if(InterpretablePoint::from_string(bits), o, t, domain, &bb).to_json());
      },
      py::arg("point"), py::arg("tree"), py::arg("domain"), py::arg("black_box"), py::arg("oracle") = py::none());
  m.def(
      "shortest_explanation",
      [](std::size_t c, const SurrogateTree& t, const InterpretableDomain& domain, const BlackBox& bb,
         std::optional<std::string> oracle) {
        const Oracle o = oracle ? parse_oracle(*oracle) : default_oracle(t);
        return to_python(shortest_explanation(c, t, domain, &bb, o).to_json());
      },
      py::arg("class_index"), py::arg("tree"), py::arg("domain"), py::arg("black_box"), py::arg("oracle") = py::none());
  m.def(
      "render_tree", [](const SurrogateTree& t, const InterpretableDomain& domain) {
        return to_python(render_tree(t, domain));
      },
      py::arg("tree"), py::arg("domain"));

  m.def(
      "fit_ridge",
      [](const std::vector<std::string>& points, const std::vector<double>& y, const std::vector<double>& w,
         double alpha) {
        const auto s = fit_ridge(points_of(points), y, w, alpha);
        return py::make_tuple(s.intercept, s.coefficients);
      },
      py::arg("points"), py::arg("targets"), py::arg("weights"), py::arg("alpha") = kDefaultRidgeAlpha);

  m.def(
      "explain",
      [](const InterpretableDomain& domain, const BlackBox& bb, std::size_t top, double epsilon, std::size_t samples,
         std::uint64_t seed) {
        ExplainOptions o;
        o.top = top;
        o.epsilon = epsilon;
        o.samples = samples;
        o.seed = seed;
        return to_python(explain(domain, bb, o));
      },
      py::arg("domain"), py::arg("black_box"), py::arg("top") = 3, py::arg("epsilon") = 0.95,
      py::arg("samples") = 1000, py::arg("seed") = 0);

  m.def(
      "bench_fidelity",
      [](const std::string& family, std::size_t trials, std::size_t d, std::size_t top, std::size_t class_count,
         std::uint64_t seed, double epsilon) {
        ExperimentConfig c;
        c.family = parse_synthetic_kind(family);
        c.trials = trials;
        c.d = d;
        c.top = top;
        c.class_count = class_count;
        c.seed = seed;
        c.epsilon = epsilon;
        std::ostringstream out;
        py::gil_scoped_release release;
        run_fidelity_experiment(c).write_csv(out);
        return out.str();
      },
      py::arg("family") = "segment-logit", py::arg("trials") = 100, py::arg("d") = 8, py::arg("top") = 3,
      py::arg("class_count") = 10, py::arg("seed") = 42, py::arg("epsilon") = 0.99);
}
