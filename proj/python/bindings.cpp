#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "menas/analysis.hpp"
#include "menas/evolution.hpp"

namespace py = pybind11;
using namespace menas;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Maximum-entropy scoring and evolutionary search for CNN-Transformer backbones";

    py::register_exception<ValidationError>(m, "ValidationFailure");
    py::register_exception<ConfigError>(m, "ConfigFailure", PyExc_ValueError);
    py::register_exception<ScoringError>(m, "ScoringFailure", PyExc_ValueError);

    // ----- architecture model -----
    py::class_<ConvStage>(m, "ConvStage")
        .def(py::init<>())
        .def_readwrite("kernel", &ConvStage::kernel)
        .def_readwrite("in_channels", &ConvStage::in_channels)
        .def_readwrite("out_channels", &ConvStage::out_channels)
        .def_readwrite("stride", &ConvStage::stride)
        .def_readwrite("bottleneck_width", &ConvStage::bottleneck_width)
        .def_readwrite("layers", &ConvStage::layers)
        .def_readwrite("has_pool", &ConvStage::has_pool)
        .def(py::self == py::self);

    py::class_<TransformerStage>(m, "TransformerStage")
        .def(py::init<>())
        .def_readwrite("in_channels", &TransformerStage::in_channels)
        .def_readwrite("out_channels", &TransformerStage::out_channels)
        .def_readwrite("hidden_dim", &TransformerStage::hidden_dim)
        .def_readwrite("dim_feedforward", &TransformerStage::dim_feedforward)
        .def_readwrite("layers", &TransformerStage::layers)
        .def(py::self == py::self);

    py::class_<Architecture>(m, "Architecture")
        .def(py::init<>())
        .def_readwrite("name", &Architecture::name)
        .def_readwrite("conv_stages", &Architecture::conv_stages)
        .def_readwrite("transformer", &Architecture::transformer)
        .def(py::self == py::self)
        .def("__repr__", [](const Architecture& a) { return "<Architecture " + a.name + ">"; });

    py::class_<InputShape>(m, "InputShape")
        .def(py::init<int, int, int>(), py::arg("height") = 320, py::arg("width") = 320,
             py::arg("channels") = 3)
        .def_readwrite("height", &InputShape::height)
        .def_readwrite("width", &InputShape::width)
        .def_readwrite("channels", &InputShape::channels);

    py::class_<FlopsCount>(m, "FlopsCount")
        .def_readonly("total", &FlopsCount::total)
        .def_readonly("per_stage", &FlopsCount::per_stage);

    py::class_<Violation>(m, "Violation")
        .def_readonly("stage_index", &Violation::stage_index)
        .def_readonly("field", &Violation::field)
        .def_readonly("message", &Violation::message);

    py::class_<ValidationReport>(m, "ValidationReport")
        .def_readonly("violations", &ValidationReport::violations)
        .def("ok", &ValidationReport::ok)
        .def("__str__", &ValidationReport::to_string);

    m.def("validate", &validate, py::arg("arch"));
    m.def("estimate_flops", &estimate_flops, py::arg("arch"), py::arg("shape"));
    m.def("conv_layer_flops", &conv_layer_flops);
    m.def("to_json", &to_json);
    m.def("from_json", &from_json);
    m.def("save_arch", &save_arch, py::arg("arch"), py::arg("path"));
    m.def("load_arch", &load_arch, py::arg("path"));
    m.def("digest", &digest);

    // ----- entropy engine -----
    py::class_<StageStats>(m, "StageStats")
        .def_readonly("stage_index", &StageStats::stage_index)
        .def_readonly("log_effective_variance", &StageStats::log_effective_variance)
        .def_readonly("in_channels", &StageStats::in_channels);

    py::class_<McConfig>(m, "McConfig")
        .def(py::init<>())
        .def_readwrite("repeats", &McConfig::repeats)
        .def_readwrite("seed", &McConfig::seed)
        .def_readwrite("shape", &McConfig::shape)
        .def_readwrite("workers", &McConfig::workers);

    py::class_<ScaleLedger>(m, "ScaleLedger")
        .def(py::init<>())
        .def_readwrite("entries", &ScaleLedger::entries)
        .def("sum", &ScaleLedger::sum);

    py::class_<ConvLayerSpec>(m, "ConvLayerSpec")
        .def(py::init<int, int, int, int>(), py::arg("kernel"), py::arg("in_channels"),
             py::arg("out_channels"), py::arg("stride") = 1)
        .def_readwrite("kernel", &ConvLayerSpec::kernel)
        .def_readwrite("in_channels", &ConvLayerSpec::in_channels)
        .def_readwrite("out_channels", &ConvLayerSpec::out_channels)
        .def_readwrite("stride", &ConvLayerSpec::stride);

    py::enum_<ScalingMode>(m, "ScalingMode")
        .value("none", ScalingMode::none)
        .value("per_layer", ScalingMode::per_layer);

    py::class_<ConvStackMcResult>(m, "ConvStackMcResult")
        .def_readonly("mean_log_variance", &ConvStackMcResult::mean_log_variance)
        .def_readonly("per_layer_log_variance", &ConvStackMcResult::per_layer_log_variance)
        .def_readonly("all_finite", &ConvStackMcResult::all_finite);

    m.def("conv_layer_log_gain", &conv_layer_log_gain);
    m.def("transformer_layer_log_gain", &transformer_layer_log_gain);
    m.def(
        "conv_stack_log_variance",
        [](const std::vector<ConvLayerSpec>& layers) { return conv_stack_log_variance(layers); },
        py::arg("layers"));
    m.def("analytic_stage_stats", &analytic_stage_stats, py::arg("arch"), py::arg("shape"));
    m.def("mc_stage_stats", &mc_stage_stats, py::arg("arch"), py::arg("config"));
    m.def(
        "mc_conv_stack",
        [](const std::vector<ConvLayerSpec>& layers, int height, int width, int repeats,
           std::uint64_t seed, ScalingMode mode, int workers) {
            return mc_conv_stack(layers, height, width, repeats, seed, mode, workers);
        },
        py::arg("layers"), py::arg("height"), py::arg("width"), py::arg("repeats"), py::arg("seed"),
        py::arg("mode") = ScalingMode::per_layer, py::arg("workers") = 1);
    m.def("reconstruct_effective_log_variance", &reconstruct_effective_log_variance,
          py::arg("ledger"), py::arg("final_log_variance"));

    // ----- fitness -----
    py::class_<FitnessWeights>(m, "FitnessWeights")
        .def(py::init<>())
        .def_readwrite("a", &FitnessWeights::a)
        .def_static("a1", &FitnessWeights::a1)
        .def_static("a2", &FitnessWeights::a2)
        .def_static("parse", &FitnessWeights::parse)
        .def("label", &FitnessWeights::label)
        .def(py::self == py::self);

    py::class_<FitnessValue>(m, "FitnessValue")
        .def_readonly("value", &FitnessValue::value)
        .def_readonly("per_stage_z", &FitnessValue::per_stage_z);

    py::enum_<Scorer>(m, "Scorer")
        .value("analytic", Scorer::analytic)
        .value("monte_carlo", Scorer::monte_carlo);

    m.def("stage_score", &stage_score);
    m.def("fitness", &fitness, py::arg("stats"), py::arg("weights"));
    m.def("failed_fitness", &failed_fitness);
    m.def("score_architecture", &score_architecture, py::arg("arch"), py::arg("scorer"),
          py::arg("weights"), py::arg("config"));

    // ----- evolution -----
    py::enum_<MutationKind>(m, "MutationKind")
        .value("kernel", MutationKind::kernel)
        .value("layers", MutationKind::layers)
        .value("channels", MutationKind::channels)
        .value("bottleneck_width", MutationKind::bottleneck_width)
        .value("hidden_dim", MutationKind::hidden_dim)
        .value("dim_feedforward", MutationKind::dim_feedforward);

    m.def(
        "mutate",
        [](const Architecture& arch, std::uint64_t seed) {
            Architecture out = arch;
            Rng rng(seed);
            mutate_arch(out, rng);
            return out;
        },
        py::arg("arch"), py::arg("seed"), "One full mutation round (copy) with its own rng seed");

    py::class_<SearchConfig>(m, "SearchConfig")
        .def(py::init<>())
        .def_readwrite("population", &SearchConfig::population)
        .def_readwrite("iterations", &SearchConfig::iterations)
        .def_readwrite("flops_budget", &SearchConfig::flops_budget)
        .def_readwrite("weights", &SearchConfig::weights)
        .def_readwrite("scorer", &SearchConfig::scorer)
        .def_readwrite("mc", &SearchConfig::mc)
        .def_readwrite("seed", &SearchConfig::seed)
        .def_readwrite("seed_arch", &SearchConfig::seed_arch)
        .def_readwrite("mutable_stages", &SearchConfig::mutable_stages)
        .def_readwrite("allowed_kinds", &SearchConfig::allowed_kinds)
        .def_readwrite("workers", &SearchConfig::workers);

    py::class_<IterationRecord>(m, "IterationRecord")
        .def_readonly("iteration", &IterationRecord::iteration)
        .def_readonly("best_fitness", &IterationRecord::best_fitness)
        .def_readonly("mean_fitness", &IterationRecord::mean_fitness)
        .def_readonly("best_digest", &IterationRecord::best_digest)
        .def_readonly("rejected_total", &IterationRecord::rejected_total);

    py::class_<SearchHistory>(m, "SearchHistory")
        .def_readonly("records", &SearchHistory::records);

    py::class_<SearchResult>(m, "SearchResult")
        .def_readonly("best", &SearchResult::best)
        .def_readonly("best_fitness", &SearchResult::best_fitness)
        .def_readonly("history", &SearchResult::history)
        .def_readonly("final_population", &SearchResult::final_population);

    m.def("evolve", &evolve, py::arg("config"), py::call_guard<py::gil_scoped_release>());

    // ----- analysis -----
    py::class_<ArchSummary>(m, "ArchSummary")
        .def_readonly("total_layers", &ArchSummary::total_layers)
        .def_readonly("avg_channels", &ArchSummary::avg_channels)
        .def_readonly("avg_kernel", &ArchSummary::avg_kernel)
        .def_readonly("hidden_dim", &ArchSummary::hidden_dim)
        .def_readonly("dim_feedforward", &ArchSummary::dim_feedforward);

    py::class_<UniformConvNet>(m, "UniformConvNet")
        .def_readonly("layers", &UniformConvNet::layers)
        .def_readonly("channels", &UniformConvNet::channels)
        .def_readonly("kernel", &UniformConvNet::kernel);

    m.def("summarize", &summarize);
    m.def("uniformize", &uniformize);
    m.def("uniform_net_log_variance", &uniform_net_log_variance);
    m.def("conv_entropy", &conv_entropy);

    m.def(
        "spearman",
        [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
        py::arg("x"), py::arg("y"));
    m.def(
        "spearman_permutation_pvalue",
        [](const std::vector<double>& x, const std::vector<double>& y, int shuffles,
           std::uint64_t seed) { return spearman_permutation_pvalue(x, y, shuffles, seed); },
        py::arg("x"), py::arg("y"), py::arg("shuffles") = 1000, py::arg("seed") = 0);

    py::class_<DatasetRow>(m, "DatasetRow")
        .def_readonly("summary", &DatasetRow::summary)
        .def_readonly("score", &DatasetRow::score);

    py::class_<CorrelationDataset>(m, "CorrelationDataset")
        .def_readonly("rows", &CorrelationDataset::rows)
        .def_readonly("weight_label", &CorrelationDataset::weight_label)
        .def("to_csv", [](const CorrelationDataset& d) {
            std::ostringstream os;
            write_dataset_csv(os, d);
            return os.str();
        });

    py::class_<CorrelationEntry>(m, "CorrelationEntry")
        .def_readonly("parameter", &CorrelationEntry::parameter)
        .def_readonly("rho", &CorrelationEntry::rho)
        .def_readonly("p_value", &CorrelationEntry::p_value)
        .def_readonly("stars", &CorrelationEntry::stars);

    m.def("sample_dataset", &sample_dataset, py::arg("seed_arch"), py::arg("n"), py::arg("weights"),
          py::arg("scorer"), py::arg("flops_budget"), py::arg("config"), py::arg("seed"),
          py::arg("walk_length") = 25, py::call_guard<py::gil_scoped_release>());
    m.def("correlation_table", &correlation_table, py::arg("dataset"), py::arg("shuffles") = 1000,
          py::arg("seed") = 0);

    py::class_<SweepPoint>(m, "SweepPoint")
        .def_readonly("d_model", &SweepPoint::d_model)
        .def_readonly("dim_feedforward", &SweepPoint::dim_feedforward)
        .def_readonly("entropy", &SweepPoint::entropy);

    m.def("bivariate_sweep", &bivariate_sweep, py::arg("fixed_cnn"), py::arg("weights"),
          py::arg("shape"), py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());
    m.def("sweep_d_model_grid", &sweep_d_model_grid);
    m.def("sweep_dim_feedforward_grid", &sweep_dim_feedforward_grid);

    m.attr("__version__") = "0.1.0";
}
