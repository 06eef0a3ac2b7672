#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "deguv/checkpoint.hpp"
#include "deguv/evalkit.hpp"
#include "deguv/runner.hpp"

namespace py = pybind11;
using namespace deguv;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const F32& a) {
    std::vector<int> shape;
    shape.reserve(std::size_t(a.ndim()));
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(int(a.shape(i)));
    Tensor t(shape);
    std::memcpy(t.data(), a.data(), sizeof(float) * std::size_t(t.size()));
    return t;
}

F32 array_from(const Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (int d : t.shape()) shape.push_back(d);
    F32 a(shape);
    std::memcpy(a.mutable_data(), t.data(), sizeof(float) * std::size_t(t.size()));
    return a;
}

py::tuple obs_arrays(const Observation& o) {
    U8 rgb({py::ssize_t(o.k), py::ssize_t(o.h), py::ssize_t(o.w), py::ssize_t(3)});
    std::memcpy(rgb.mutable_data(), o.rgb.data(), o.rgb.size());
    F32 depth({py::ssize_t(o.k), py::ssize_t(o.h), py::ssize_t(o.w)});
    std::memcpy(depth.mutable_data(), o.depth.data(), o.depth.size() * sizeof(float));
    return py::make_tuple(std::move(rgb), std::move(depth));
}

Observation obs_from(const U8& rgb, const F32& depth) {
    if (rgb.ndim() != 4 || rgb.shape(3) != 3)
        throw DataError("rgb must be [k, h, w, 3] uint8");
    if (depth.ndim() != 3 || depth.shape(0) != rgb.shape(0) || depth.shape(1) != rgb.shape(1) ||
        depth.shape(2) != rgb.shape(2))
        throw DataError("depth must be [k, h, w] matching the rgb stack");
    Observation o;
    o.k = int(rgb.shape(0));
    o.h = int(rgb.shape(1));
    o.w = int(rgb.shape(2));
    o.rgb.resize(std::size_t(rgb.size()));
    std::memcpy(o.rgb.data(), rgb.data(), o.rgb.size());
    o.depth.resize(std::size_t(depth.size()));
    std::memcpy(o.depth.data(), depth.data(), o.depth.size() * sizeof(float));
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "depth-guided masking agent lab (C++ core)";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<RunConfig>(m, "Config")
        .def(py::init<>())
        .def_static("parse", &RunConfig::parse, py::arg("text"))
        .def_static("load", &RunConfig::load, py::arg("path"))
        .def("set", &RunConfig::set_override, py::arg("key"), py::arg("value"),
             "Apply one override; bare keys resolve to their dotted form.")
        .def("validate", &RunConfig::validate)
        .def("canonical", &RunConfig::canonical)
        .def("compat_hash", &RunConfig::compat_hash)
        .def("ablation_tags", &RunConfig::ablation_tags);

    py::class_<MiniManipEnv>(m, "Env")
        .def(py::init([](const RunConfig& cfg) { return MiniManipEnv(cfg.env); }),
             py::arg("config") = RunConfig{})
        .def(
            "reset",
            [](MiniManipEnv& env, std::uint64_t seed, const std::string& mode) {
                return obs_arrays(env.reset(seed, mode_from_string(mode)));
            },
            py::arg("seed"), py::arg("mode") = "train",
            "Returns (rgb [k,h,w,3] uint8, depth [k,h,w] float32).")
        .def("step",
             [](MiniManipEnv& env, const std::array<float, 3>& action) {
                 StepResult sr = env.step(action);
                 py::tuple obs = obs_arrays(sr.obs);
                 return py::make_tuple(obs[0], obs[1], sr.reward, sr.done);
             })
        .def("oracle", &MiniManipEnv::oracle)
        .def("done", &MiniManipEnv::done)
        .def("relevance_mask", [](const MiniManipEnv& env) {
            const EnvParams& p = env.params();
            std::vector<std::uint8_t> mask = env.relevance_mask();
            U8 a({py::ssize_t(p.resolution), py::ssize_t(p.resolution)});
            std::memcpy(a.mutable_data(), mask.data(), mask.size());
            return a;
        });

    py::class_<DeGuVAgent>(m, "Agent")
        .def(py::init<const RunConfig&>(), py::arg("config"))
        .def_static(
            "from_checkpoint",
            [](const std::string& path) {
                Checkpoint ck = Checkpoint::load(path);
                RunConfig cfg = RunConfig::parse(ck.get_text("config"));
                auto agent = std::make_unique<DeGuVAgent>(cfg);
                restore_agent(ck, *agent);
                return agent;
            },
            py::arg("path"))
        .def(
            "act",
            [](const DeGuVAgent& a, const U8& rgb, const F32& depth, bool deterministic,
               std::uint64_t seed) {
                Observation o = obs_from(rgb, depth);
                if (deterministic) return a.act(o, nullptr);
                Rng rng(seed);
                return a.act(o, &rng);
            },
            py::arg("rgb"), py::arg("depth"), py::arg("deterministic") = true,
            py::arg("seed") = 0)
        .def(
            "mask",
            [](const DeGuVAgent& a, const F32& depth) {
                if (depth.ndim() != 4) throw DataError("depth must be [B, k, h, w]");
                return array_from(a.masker().forward(tensor_from(depth)));
            },
            py::arg("depth"), "Depth batch [B,k,h,w] -> mask batch in [0,1].")
        .def_property_readonly("update_count", &DeGuVAgent::update_count)
        .def_property_readonly("config_text",
                               [](const DeGuVAgent& a) { return a.config().canonical(); });

    m.def(
        "infonce",
        [](const F32& q, const F32& pos, const F32& negs, float temperature) {
            if (q.ndim() != 1 || pos.ndim() != 1 || negs.ndim() != 2 ||
                pos.shape(0) != q.shape(0) || negs.shape(1) != q.shape(0))
                throw DataError("expected q [n], pos [n], negs [m, n]");
            const int n = int(q.shape(0));
            const int nneg = int(negs.shape(0));
            std::vector<const float*> kn;
            kn.reserve(std::size_t(nneg));
            for (int i = 0; i < nneg; ++i) kn.push_back(negs.data() + std::size_t(i) * n);
            F32 grad{py::ssize_t(n)};
            std::memset(grad.mutable_data(), 0, sizeof(float) * std::size_t(n));
            double loss = infonce_loss(q.data(), pos.data(), kn.data(), nneg, n, temperature,
                                       grad.mutable_data());
            return py::make_tuple(loss, std::move(grad));
        },
        py::arg("q"), py::arg("pos"), py::arg("negs"), py::arg("temperature"),
        "Returns (loss, dloss/dq).");

    m.def(
        "augment",
        [](const F32& x, const RunConfig& cfg, std::uint64_t seed, std::uint64_t call_index) {
            if (x.ndim() != 4) throw DataError("batch must be [B, C, H, W]");
            AugmentationSpec spec = cfg.aug;
            spec.seed = seed;
            TextureBank bank(splitmix64(seed ^ fnv1a64("textures")), 24, int(x.shape(2)),
                             int(x.shape(3)));
            Tensor in = tensor_from(x);
            Tensor out(in.shape());
            apply_aug(in.data(), out.data(), int(x.shape(0)), int(x.shape(1)), int(x.shape(2)),
                      int(x.shape(3)), spec, bank, call_index);
            return array_from(out);
        },
        py::arg("x"), py::arg("config"), py::arg("seed"), py::arg("call_index") = 0,
        "Shift + overlay + jitter on a [B,C,H,W] batch in [0,255].");

    m.def(
        "evaluate_oracle",
        [](int episodes, const std::vector<std::uint64_t>& seeds, const std::string& mode) {
            EvalStats s = evaluate(oracle_policy(), EnvParams{}, mode_from_string(mode), episodes,
                                   seeds);
            return py::make_tuple(s.mean, s.stddev, s.returns);
        },
        py::arg("episodes") = 4, py::arg("seeds") = std::vector<std::uint64_t>{1, 2, 3},
        py::arg("mode") = "train");
    m.attr("ORACLE_BAND") = py::make_tuple(kOracleReturnLo, kOracleReturnHi);

    m.def(
        "train",
        [](const std::string& config_path, const std::vector<std::string>& overrides,
           const std::string& run_dir, const std::string& seed, const std::string& resume) {
            CliTrain args;
            args.config_path = config_path;
            args.overrides = overrides;
            args.run_dir = run_dir;
            args.seed = seed;
            args.resume = resume;
            return cmd_train(args);
        },
        py::arg("config_path") = "", py::arg("overrides") = std::vector<std::string>{},
        py::arg("run_dir") = "", py::arg("seed") = "", py::arg("resume") = "",
        "Full training pipeline; returns the CLI exit code.");
}
