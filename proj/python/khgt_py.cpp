#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "khgt/cli/run.hpp"
#include "khgt/data/dataset.hpp"
#include "khgt/data/synthetic.hpp"
#include "khgt/errors.hpp"
#include "khgt/eval/evaluator.hpp"
#include "khgt/eval/metrics.hpp"
#include "khgt/model/khgt.hpp"
#include "khgt/trainer/checkpoint.hpp"
#include "khgt/trainer/reference.hpp"
#include "khgt/trainer/trainer.hpp"

namespace py = pybind11;
using namespace khgt;

namespace {

using Record = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::int64_t>;

data::Dataset make_dataset(const std::vector<Record>& records, const std::vector<std::uint32_t>& categories,
                           std::uint32_t target_behavior, std::uint32_t num_users, std::uint32_t num_items,
                           std::uint32_t num_behaviors, bool target_only) {
  data::InteractionLog log;
  for (const auto& [u, i, b, t] : records) {
    log.records.push_back({u, i, b, t});
    log.num_users = std::max(log.num_users, u + 1);
    log.num_items = std::max(log.num_items, i + 1);
    log.num_behaviors = std::max(log.num_behaviors, b + 1);
  }
  log.num_users = std::max(log.num_users, num_users);
  log.num_items = std::max(log.num_items, num_items);
  log.num_behaviors = std::max(log.num_behaviors, num_behaviors);
  data::validate(log);
  std::vector<std::uint32_t> cats = categories;
  if (cats.empty()) cats.assign(log.num_items, 0);
  if (cats.size() != log.num_items) throw ValidationError("need one category per item");
  data::DatasetOptions o;
  o.target_behavior = target_behavior;
  o.target_only = target_only;
  return data::build_dataset(log, cats, o);
}

py::dict hyper_dict(const model::Hyper& h) {
  py::dict d;
  d["dim"] = h.dim;
  d["heads"] = h.heads;
  d["channels"] = h.channels;
  d["layers"] = h.layers;
  d["behaviors"] = h.behaviors;
  d["relations"] = h.relations;
  d["users"] = h.users;
  d["items"] = h.items;
  return d;
}

py::dict metrics_dict(const eval::MetricsReport& r) {
  py::dict d;
  for (std::uint32_t n : eval::kCutoffs) {
    d[py::str("HR@" + std::to_string(n))] = r.all.hr_at(n);
    d[py::str("NDCG@" + std::to_string(n))] = r.all.ndcg_at(n);
  }
  std::vector<std::uint32_t> ranks;
  for (const auto& c : r.cases) ranks.push_back(c.rank);
  d["ranks"] = ranks;
  return d;
}

model::EncodedGraph encode_dataset(const model::ModelParams& p, const data::Dataset& ds, const model::Variant& v) {
  model::ForwardOptions o;
  o.variant = v;
  return model::encode_values(p, model::prepare_graph(data::full_view(ds.interactions, ds.item_relations), p.hyper), o);
}

std::vector<std::vector<double>> rows(const numerics::Tensor& t) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.emplace_back(t.row(r).begin(), t.row(r).end());
  return out;
}

}  // namespace

PYBIND11_MODULE(khgt, m) {
  m.doc() = "Multi-behavior recommendation with a knowledge-enhanced hierarchical graph transformer";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a CLI command; returns (exit code, stdout, stderr).");

  m.def(
      "generate_synthetic",
      [](std::uint32_t users, std::uint32_t items, std::uint32_t behaviors, double correlation, double noise,
         std::uint64_t seed) {
        data::SyntheticSpec s;
        s.users = users;
        s.items = items;
        s.behaviors = behaviors;
        s.correlation = correlation;
        s.noise = noise;
        const auto c = data::generate_synthetic(s, seed);
        std::vector<Record> records;
        for (const auto& r : c.log.records) records.emplace_back(r.user, r.item, r.behavior, r.timestamp);
        return py::make_tuple(records, c.categories);
      },
      py::arg("users") = 200, py::arg("items") = 100, py::arg("behaviors") = 3, py::arg("correlation") = 0.8,
      py::arg("noise") = 0.1, py::arg("seed") = 0,
      "Synthetic corpus as ((user, item, behavior, timestamp) records, item categories).");

  m.def("hr_at_n", &eval::hr_at_n, py::arg("rank"), py::arg("n"));
  m.def("ndcg_at_n", &eval::ndcg_at_n, py::arg("rank"), py::arg("n"));
  m.def(
      "gradcheck", [](double eps, std::uint64_t seed) { return trainer::check_tiny_gradients(eps, seed).max_relative_error; },
      py::arg("eps") = 1e-5, py::arg("seed") = 0, "Max relative gradient error on the tiny reference instance.");

  py::class_<model::Variant>(m, "Variant")
      .def(py::init<>())
      .def_readwrite("attentive_aggregation", &model::Variant::attentive_aggregation)
      .def_readwrite("mutual_attention", &model::Variant::mutual_attention)
      .def_readwrite("gated_fusion", &model::Variant::gated_fusion)
      .def_readwrite("temporal", &model::Variant::temporal)
      .def_readwrite("item_relations", &model::Variant::item_relations)
      .def_readwrite("channel_gates", &model::Variant::channel_gates);

  py::class_<trainer::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("dim", &trainer::TrainConfig::dim)
      .def_readwrite("heads", &trainer::TrainConfig::heads)
      .def_readwrite("channels", &trainer::TrainConfig::channels)
      .def_readwrite("layers", &trainer::TrainConfig::layers)
      .def_readwrite("learning_rate", &trainer::TrainConfig::learning_rate)
      .def_readwrite("decay", &trainer::TrainConfig::decay)
      .def_readwrite("batch_size", &trainer::TrainConfig::batch_size)
      .def_readwrite("pairs_per_user", &trainer::TrainConfig::pairs_per_user)
      .def_readwrite("reg_weight", &trainer::TrainConfig::reg_weight)
      .def_readwrite("epochs", &trainer::TrainConfig::epochs)
      .def_readwrite("seed", &trainer::TrainConfig::seed)
      .def_readwrite("subgraph_nodes", &trainer::TrainConfig::subgraph_nodes)
      .def_readwrite("restart_prob", &trainer::TrainConfig::restart_prob)
      .def_readwrite("time_resolution", &trainer::TrainConfig::time_resolution)
      .def_readwrite("dropout", &trainer::TrainConfig::dropout)
      .def_readwrite("variant", &trainer::TrainConfig::variant);

  py::class_<data::Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("records"), py::arg("categories") = std::vector<std::uint32_t>{},
           py::arg("target_behavior") = 0, py::arg("num_users") = 0, py::arg("num_items") = 0,
           py::arg("num_behaviors") = 0, py::arg("target_only") = false,
           "Leave-one-out split plus user-item and item-item graphs built from the train part.")
      .def_property_readonly("num_users", [](const data::Dataset& d) { return d.interactions.num_users; })
      .def_property_readonly("num_items", [](const data::Dataset& d) { return d.interactions.num_items; })
      .def_property_readonly("num_behaviors", [](const data::Dataset& d) { return d.interactions.num_behaviors; })
      .def_property_readonly("num_relations", [](const data::Dataset& d) { return d.item_relations.num_relations(); })
      .def_property_readonly("num_edges", [](const data::Dataset& d) { return d.interactions.num_edges(); })
      .def_property_readonly("test_users", [](const data::Dataset& d) { return d.split.test.size(); });

  py::class_<model::ModelParams>(m, "Model")
      .def_property_readonly("hyper", [](const model::ModelParams& p) { return hyper_dict(p.hyper); })
      .def_property_readonly("num_parameters", &model::ModelParams::num_scalars)
      .def("save", [](const model::ModelParams& p, const std::filesystem::path& path) { trainer::save_checkpoint(path, p); })
      .def_static("load", &trainer::load_checkpoint, py::arg("path"))
      .def(
          "embeddings",
          [](const model::ModelParams& p, const data::Dataset& ds, const model::Variant& v) {
            const auto e = encode_dataset(p, ds, v);
            return py::make_tuple(rows(e.users), rows(e.items));
          },
          py::arg("dataset"), py::arg("variant") = model::Variant{}, "Final (user, item) embeddings.")
      .def(
          "score",
          [](const model::ModelParams& p, const data::Dataset& ds, std::uint32_t user,
             const std::vector<std::uint32_t>& items, const model::Variant& v) {
            const auto e = encode_dataset(p, ds, v);
            if (user >= e.users.rows()) throw ValidationError("user out of range");
            std::vector<double> out;
            for (auto j : items) {
              if (j >= e.items.rows()) throw ValidationError("item out of range");
              out.push_back(model::score(e.users.row(user), e.items.row(j), p.at(model::names::kScore).data()));
            }
            return out;
          },
          py::arg("dataset"), py::arg("user"), py::arg("items"), py::arg("variant") = model::Variant{});

  m.def(
      "train",
      [](const trainer::TrainConfig& c, const data::Dataset& ds) {
        trainer::check(c);
        trainer::TrainResult r;
        {
          py::gil_scoped_release release;
          r = trainer::train(c, ds.split, ds.interactions, ds.item_relations);
        }
        py::list history;
        for (const auto& e : r.history) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["mean_loss"] = e.mean_loss;
          d["mean_hinge"] = e.mean_hinge;
          d["learning_rate"] = e.learning_rate;
          history.append(d);
        }
        return py::make_tuple(std::move(r.params), history);
      },
      py::arg("config"), py::arg("dataset"), "Returns (model, per-epoch history).");

  m.def(
      "evaluate",
      [](const model::ModelParams& p, const data::Dataset& ds, std::uint64_t seed, std::uint32_t workers,
         const model::Variant& v) {
        eval::EvalConfig c;
        c.seed = seed;
        c.workers = workers;
        c.variant = v;
        eval::MetricsReport r;
        {
          py::gil_scoped_release release;
          r = eval::evaluate(p, ds.interactions, ds.item_relations, ds.split, c);
        }
        return metrics_dict(r);
      },
      py::arg("model"), py::arg("dataset"), py::arg("seed") = 0, py::arg("workers") = 1,
      py::arg("variant") = model::Variant{}, "Leave-one-out HR@N / NDCG@N with 99 sampled negatives.");
}
