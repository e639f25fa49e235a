#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gqakit/checkpoint_io.hpp"
#include "gqakit/costmodel.hpp"
#include "gqakit/decoder.hpp"
#include "gqakit/report.hpp"
#include "gqakit/train.hpp"
#include "gqakit/version.hpp"

namespace py = pybind11;
using namespace gqakit;

// Python surface works on the f32 (default runtime) precision.
using CkptF32 = Checkpoint<float>;

namespace {

py::buffer_info tensor_buffer(Tensor<float>& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    std::vector<py::ssize_t> strides(shape.size());
    py::ssize_t stride = sizeof(float);
    for (std::size_t i = shape.size(); i-- > 0;) {
        strides[i] = stride;
        stride *= shape[i];
    }
    return py::buffer_info(t.data().data(), sizeof(float),
                           py::format_descriptor<float>::format(),
                           static_cast<py::ssize_t>(shape.size()), shape, strides);
}

ConversionMethod method_from(const std::string& name, std::uint64_t seed) {
    return ConversionMethod::parse(name, seed);
}

} // namespace

PYBIND11_MODULE(gqakit, m) {
    m.doc() = "Grouped-query attention toolkit: GQA/MQA/MHA decoding, checkpoint "
              "conversion, KV-cache cost modeling and toy uptraining.";
    m.attr("__version__") = kVersion;

    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    py::class_<AttentionConfig>(m, "AttentionConfig")
        .def(py::init([](std::size_t n_heads, std::size_t n_kv_groups, std::size_t head_dim,
                         std::size_t n_layers, std::size_t vocab, bool causal) {
                 AttentionConfig cfg;
                 cfg.n_heads = n_heads;
                 cfg.n_kv_groups = n_kv_groups;
                 cfg.head_dim = head_dim;
                 cfg.d_model = n_heads * head_dim;
                 cfg.n_layers = n_layers;
                 cfg.vocab = vocab;
                 cfg.causal = causal;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("n_heads"), py::arg("n_kv_groups"), py::arg("head_dim"),
             py::arg("n_layers"), py::arg("vocab"), py::arg("causal") = true)
        .def_readonly("d_model", &AttentionConfig::d_model)
        .def_readonly("n_heads", &AttentionConfig::n_heads)
        .def_readonly("n_kv_groups", &AttentionConfig::n_kv_groups)
        .def_readonly("head_dim", &AttentionConfig::head_dim)
        .def_readonly("n_layers", &AttentionConfig::n_layers)
        .def_readonly("vocab", &AttentionConfig::vocab)
        .def_readonly("causal", &AttentionConfig::causal)
        .def("__repr__", [](const AttentionConfig& c) {
            return "AttentionConfig(H=" + std::to_string(c.n_heads) +
                   ", G=" + std::to_string(c.n_kv_groups) +
                   ", head_dim=" + std::to_string(c.head_dim) +
                   ", layers=" + std::to_string(c.n_layers) +
                   ", vocab=" + std::to_string(c.vocab) + ")";
        });

    py::class_<Tensor<float>>(m, "Tensor", py::buffer_protocol())
        .def_buffer(&tensor_buffer)
        .def_property_readonly("shape", [](const Tensor<float>& t) { return t.shape(); });

    py::class_<CkptF32>(m, "Checkpoint")
        .def_property_readonly("config", [](const CkptF32& c) { return c.config; });

    m.def("group_of_head", &group_of_head, py::arg("head"), py::arg("config"));
    m.def("random_checkpoint", &random_checkpoint<float>, py::arg("config"), py::arg("seed"));
    m.def("model_forward",
          [](const CkptF32& c, const std::vector<int>& tokens) {
              return model_forward(c, tokens);
          },
          py::arg("ckpt"), py::arg("tokens"));

    m.def("save_checkpoint",
          static_cast<void (*)(const CkptF32&, const std::filesystem::path&)>(&save_checkpoint),
          py::arg("ckpt"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint<float>, py::arg("path"));

    m.def("convert_checkpoint",
          [](const CkptF32& c, std::size_t groups, const std::string& method,
             std::uint64_t seed) {
              return convert_checkpoint(c, groups, method_from(method, seed));
          },
          py::arg("ckpt"), py::arg("groups"), py::arg("method") = "mean",
          py::arg("seed") = 0);

    py::class_<ConversionReport>(m, "ConversionReport")
        .def_readonly("source_groups", &ConversionReport::source_groups)
        .def_readonly("target_groups", &ConversionReport::target_groups)
        .def_readonly("method", &ConversionReport::method)
        .def_readonly("per_layer_max_abs_delta", &ConversionReport::per_layer_max_abs_delta)
        .def_readonly("output_drift", &ConversionReport::output_drift);

    m.def("conversion_report",
          [](const CkptF32& src, const CkptF32& converted, const std::string& method) {
              return make_conversion_report(src, converted, method_from(method, 0));
          },
          py::arg("src"), py::arg("converted"), py::arg("method") = "mean");

    py::class_<DecodeTrace>(m, "DecodeTrace")
        .def_readonly("prompt", &DecodeTrace::prompt)
        .def_readonly("tokens", &DecodeTrace::tokens)
        .def_readonly("step_cache_bytes", &DecodeTrace::step_cache_bytes)
        .def_readonly("step_seconds", &DecodeTrace::step_seconds)
        .def_readonly("prefill_cache_bytes", &DecodeTrace::prefill_cache_bytes)
        .def_readonly("prefill_seconds", &DecodeTrace::prefill_seconds)
        .def_readonly("total_seconds", &DecodeTrace::total_seconds);

    m.def("generate",
          [](const CkptF32& c, const std::vector<int>& prompt, std::size_t steps, bool greedy,
             std::size_t capacity) { return generate(c, prompt, steps, greedy, capacity); },
          py::arg("ckpt"), py::arg("prompt"), py::arg("steps"), py::arg("greedy") = true,
          py::arg("capacity") = kDefaultCapacity);

    m.def("kv_cache_bytes",
          [](const AttentionConfig& cfg, std::size_t seq_len, std::size_t batch,
             const std::string& precision) {
              return kv_cache_bytes(cfg, seq_len, batch, parse_precision(precision));
          },
          py::arg("config"), py::arg("seq_len"), py::arg("batch") = 1,
          py::arg("precision") = "f32");
    m.def("sharded_kv_heads_per_partition", &sharded_kv_heads_per_partition,
          py::arg("groups"), py::arg("partitions"));
    m.def("sharding_waste_factor", &sharding_waste_factor, py::arg("groups"),
          py::arg("partitions"));

    py::class_<HardwareSpec>(m, "HardwareSpec")
        .def(py::init([](double bandwidth, double peak, std::size_t partitions) {
                 HardwareSpec hw{bandwidth, peak, partitions};
                 hw.validate();
                 return hw;
             }),
             py::arg("mem_bandwidth_bytes_per_s"), py::arg("peak_flops_per_s"),
             py::arg("partitions") = 1)
        .def_static("desk_default", &HardwareSpec::desk_default)
        .def_readonly("mem_bandwidth_bytes_per_s", &HardwareSpec::mem_bandwidth_bytes_per_s)
        .def_readonly("peak_flops_per_s", &HardwareSpec::peak_flops_per_s)
        .def_readonly("partitions", &HardwareSpec::partitions);

    py::class_<CostReport>(m, "CostReport")
        .def_readonly("kv_bytes_per_step", &CostReport::kv_bytes_per_step)
        .def_readonly("weight_bytes_per_step", &CostReport::weight_bytes_per_step)
        .def_readonly("flops_per_step", &CostReport::flops_per_step)
        .def_readonly("bandwidth_seconds", &CostReport::bandwidth_seconds)
        .def_readonly("compute_seconds", &CostReport::compute_seconds)
        .def_readonly("predicted_step_seconds", &CostReport::predicted_step_seconds)
        .def_readonly("bandwidth_bound", &CostReport::bandwidth_bound)
        .def_readonly("arithmetic_intensity", &CostReport::arithmetic_intensity);

    m.def("predict_step_time",
          [](const AttentionConfig& cfg, const HardwareSpec& hw, std::size_t seq_len,
             std::size_t batch, const std::string& precision) {
              return predict_step_time(cfg, hw, seq_len, batch, parse_precision(precision));
          },
          py::arg("config"), py::arg("hw"), py::arg("seq_len"), py::arg("batch") = 1,
          py::arg("precision") = "f32");

    py::class_<SyntheticTask>(m, "SyntheticTask")
        .def_static("markov", &SyntheticTask::markov, py::arg("seed"), py::arg("vocab"),
                    py::arg("seq_len"))
        .def_static("copy", &SyntheticTask::copy, py::arg("seed"), py::arg("vocab"),
                    py::arg("seq_len"), py::arg("offset") = 4)
        .def_property_readonly("vocab", &SyntheticTask::vocab)
        .def_property_readonly("seq_len", &SyntheticTask::seq_len);

    py::class_<EvalPoint>(m, "EvalPoint")
        .def_readonly("alpha", &EvalPoint::alpha)
        .def_readonly("step", &EvalPoint::step)
        .def_readonly("eval_loss", &EvalPoint::eval_loss);

    py::class_<TrainRun>(m, "TrainRun")
        .def_readonly("method", &TrainRun::method)
        .def_readonly("alpha", &TrainRun::alpha)
        .def_readonly("learning_rate", &TrainRun::learning_rate)
        .def_readonly("batch_size", &TrainRun::batch_size)
        .def_readonly("seed", &TrainRun::seed)
        .def_readonly("base_steps", &TrainRun::base_steps)
        .def_readonly("steps", &TrainRun::steps)
        .def_readonly("loss_trajectory", &TrainRun::loss_trajectory)
        .def_readonly("eval_points", &TrainRun::eval_points)
        .def_readonly("final_eval_loss", &TrainRun::final_eval_loss)
        .def_readonly("max_loss_spike", &TrainRun::max_loss_spike)
        .def_readonly("divergence_retries", &TrainRun::divergence_retries);

    m.def("pretrain_base",
          [](const AttentionConfig& cfg, const SyntheticTask& task, std::size_t steps,
             double learning_rate, std::size_t batch_size, std::uint64_t seed) {
              TrainConfig tc;
              tc.steps = steps;
              tc.learning_rate = learning_rate;
              tc.batch_size = batch_size;
              tc.seed = seed;
              auto res = pretrain_base<float>(cfg, task, tc);
              return py::make_tuple(std::move(res.ckpt), std::move(res.run));
          },
          py::arg("config"), py::arg("task"), py::arg("steps") = 2000,
          py::arg("learning_rate") = 0.25, py::arg("batch_size") = 8, py::arg("seed") = 0);

    m.def("uptrain",
          [](const CkptF32& base, const TrainRun& base_run, std::size_t groups,
             const std::string& method, double alpha, std::uint64_t seed,
             std::uint64_t method_seed) {
              auto res = uptrain(base, base_run, groups, method_from(method, method_seed),
                                 alpha, seed);
              return py::make_tuple(std::move(res.ckpt), std::move(res.run));
          },
          py::arg("base"), py::arg("base_run"), py::arg("groups"), py::arg("method") = "mean",
          py::arg("alpha") = 0.05, py::arg("seed") = 0, py::arg("method_seed") = 0);

    m.def("eval_loss",
          [](const CkptF32& ckpt, const SyntheticTask& task, std::size_t n_sequences) {
              return eval_loss(ckpt, task, n_sequences);
          },
          py::arg("ckpt"), py::arg("task"), py::arg("n_sequences") = 32);
}
