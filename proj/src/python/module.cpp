// Python bindings for the core operations. Structured results cross the
// boundary as plain dicts and lists.

#include "vrag/common.hpp"
#include "vrag/dataset.hpp"
#include "vrag/evaluation.hpp"
#include "vrag/fcot.hpp"
#include "vrag/pipeline.hpp"
#include "vrag/retrieval.hpp"
#include "vrag/reward.hpp"
#include "vrag/synthetic.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_py(v));
      return std::move(out);
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
      return std::move(out);
    }
    default:
      throw py::type_error("unsupported JSON value");
  }
}

json from_py(const py::handle& h) {
  // Round-trip through the stdlib encoder keeps the conversion rules in one place.
  const auto text = py::module_::import("json").attr("dumps")(h).cast<std::string>();
  return json::parse(text);
}

vrag::Label label_arg(const std::string& text) {
  const auto l = vrag::parse_label(text);
  if (!l) throw vrag::Error(vrag::ErrorCode::InvalidArgument, "not a label: '" + text + "'");
  return *l;
}

vrag::MaybeLabel maybe_label_arg(const std::optional<std::string>& text) {
  if (!text) return std::nullopt;
  return label_arg(*text);
}

class PyIndex {
 public:
  PyIndex(std::vector<std::string> ids, const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) throw vrag::Error(vrag::ErrorCode::InvalidArgument, "index needs at least one row");
    const auto dim = rows.front().size();
    std::vector<float> flat;
    for (const auto& r : rows) {
      if (r.size() != dim) throw vrag::Error(vrag::ErrorCode::DimensionMismatch, "rows differ in length");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    index_ = vrag::retrieval::VectorIndex::build(std::move(ids), static_cast<std::uint32_t>(dim), flat);
  }

  py::list top_k(const std::vector<float>& query, std::size_t k, const std::optional<std::string>& exclude) const {
    std::optional<std::size_t> row;
    if (exclude) {
      row = index_.find(*exclude);
      if (!row) throw vrag::Error(vrag::ErrorCode::InvalidArgument, "unknown id '" + *exclude + "'");
    }
    py::list out;
    for (const auto& h : index_.top_k(query, k, row)) out.append(py::make_tuple(index_.ids()[h.row], h.similarity));
    return out;
  }

  std::size_t size() const { return index_.size(); }

 private:
  vrag::retrieval::VectorIndex index_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core operations of the vrag pipeline";
  m.attr("__version__") = std::string(vrag::pipeline::kToolVersion);

  static py::exception<vrag::Error> error_type(m, "VragError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const vrag::Error& e) {
      py::object exc = py::handle(error_type.ptr())(e.what());
      exc.attr("code") = std::string(vrag::to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  // Structured responses.
  m.def("parse_fcot", [](const std::string& text, bool strict) {
          return to_py(vrag::fcot::to_json(vrag::fcot::parse_fcot(
              text, strict ? vrag::fcot::ParseMode::Strict : vrag::fcot::ParseMode::Lenient)));
        },
        py::arg("text"), py::arg("strict") = true);
  m.def("canonicalize_fcot", [](const std::string& text, bool strict) {
          return vrag::fcot::serialize_fcot(vrag::fcot::parse_fcot(
              text, strict ? vrag::fcot::ParseMode::Strict : vrag::fcot::ParseMode::Lenient));
        },
        py::arg("text"), py::arg("strict") = true, "Parse, then re-emit in canonical layout.");
  m.def("extract_s1_pred", [](const std::string& text) -> std::optional<std::string> {
    const auto l = vrag::fcot::extract_s1_pred(text);
    if (!l) return std::nullopt;
    return std::string(vrag::to_string(*l));
  });

  // Rewards.
  m.def("conflict_reward", &vrag::reward::conflict_reward, py::arg("A"), py::arg("C"));
  m.def("detect_conflict", [](const std::optional<std::string>& s1, const std::string& rag, const std::string& policy) {
          return vrag::reward::detect_conflict(maybe_label_arg(s1), label_arg(rag),
                                               vrag::reward::parse_unknown_policy(policy));
        },
        py::arg("s1_pred"), py::arg("rag_majority"), py::arg("unknown_s1") = "ZeroConflictReward");
  m.def("score_rollout",
        [](const std::string& text, const std::string& ground_truth, const py::handle& bundle, double alpha,
           double beta, double format_valid, double format_invalid) {
          vrag::reward::RewardConfig cfg;
          cfg.alpha = alpha;
          cfg.beta = beta;
          cfg.format_reward_valid = format_valid;
          cfg.format_reward_invalid = format_invalid;
          return to_py(vrag::reward::to_json(vrag::reward::score_rollout(
              text, label_arg(ground_truth), vrag::retrieval::bundle_from_json(from_py(bundle)), cfg)));
        },
        py::arg("text"), py::arg("ground_truth"), py::arg("bundle"), py::arg("alpha") = 1.0, py::arg("beta") = 1.0,
        py::arg("format_valid") = 1.0, py::arg("format_invalid") = 0.0);
  m.def("batch_reward", [](const std::vector<double>& rewards) {
    std::vector<vrag::reward::RewardRecord> records(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) records[i].R_i = rewards[i];
    return vrag::reward::batch_reward(records);
  });
  m.def("group_advantages", [](const std::vector<double>& rewards, double epsilon) {
          return vrag::reward::group_advantages(rewards, epsilon).advantages;
        },
        py::arg("rewards"), py::arg("epsilon") = 1e-8);

  // Retrieval.
  py::class_<PyIndex>(m, "VectorIndex")
      .def(py::init<std::vector<std::string>, const std::vector<std::vector<float>>&>(), py::arg("ids"),
           py::arg("rows"))
      .def("top_k", &PyIndex::top_k, py::arg("query"), py::arg("k") = 5, py::arg("exclude") = std::nullopt)
      .def("__len__", &PyIndex::size);
  m.def("assemble_bundle", [](const std::string& query_id, const py::handle& items,
                              const std::optional<std::string>& ground_truth) {
          std::vector<vrag::retrieval::EvidenceItem> parsed;
          for (const auto& j : from_py(items)) parsed.push_back(vrag::retrieval::evidence_item_from_json(j));
          return to_py(vrag::retrieval::to_json(
              vrag::retrieval::assemble_bundle(query_id, std::move(parsed), maybe_label_arg(ground_truth))));
        },
        py::arg("query_id"), py::arg("items"), py::arg("ground_truth") = std::nullopt);

  // Dataset construction.
  m.def("classify_sample", [](bool s1_correct, bool rag_correct) {
    return std::string(vrag::fcot::to_string(vrag::dataset::classify_sample(s1_correct, rag_correct)));
  });
  m.def("training_recipe", [](int stage) {
    return to_py(vrag::dataset::to_json(vrag::dataset::export_training_recipe(stage)));
  });

  // Metrics.
  m.def("video_level_auc", [](const py::handle& frames, const std::string& aggregation) {
          std::vector<vrag::eval::FrameScore> parsed;
          for (const auto& j : from_py(frames)) parsed.push_back(vrag::eval::frame_score_from_json(j));
          return vrag::eval::video_level_auc(parsed, vrag::eval::parse_aggregation(aggregation));
        },
        py::arg("frames"), py::arg("aggregation") = "mean");
  m.def("robustness_rate", [](std::int64_t adversarial, std::int64_t correct) {
    return vrag::eval::robustness_from_counts(adversarial, correct).rate_percent;
  });
  m.def("weighted_robustness", [](const std::vector<std::pair<std::int64_t, std::int64_t>>& sets) {
    std::vector<vrag::eval::RobustnessResult> results;
    for (const auto& [n, c] : sets) results.push_back(vrag::eval::robustness_from_counts(n, c));
    return vrag::eval::weighted_robustness(results).rate_percent;
  });
  m.def("cost_ratio", [](const std::vector<std::pair<std::string, double>>& components) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& s : vrag::eval::cost_ratio({components})) out.emplace_back(s.name, s.percent);
    return out;
  });
  m.def("parse_judge_reply", [](const std::string& reply) {
    return to_py(vrag::eval::to_json(vrag::eval::parse_judge_reply("", reply)));
  });
  m.def("cross_judge_average", [](const std::vector<double>& means) {
    std::vector<vrag::eval::ExactMean> exact;
    for (double v : means) exact.push_back(vrag::eval::ExactMean::from_decimal("", v));
    return vrag::eval::cross_judge_average(exact).rounded(2);
  });

  // Whole-pipeline entry points.
  m.def("run_cli", [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = vrag::pipeline::run(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one CLI subcommand in-process; returns (exit_code, stdout, stderr).");
  m.def("write_synthetic_workspace",
        [](const std::filesystem::path& root, std::uint64_t seed) {
          vrag::synthetic::Options opt;
          opt.seed = seed;
          const auto ws = vrag::synthetic::write_workspace(root, opt);
          py::dict out;
          out["root"] = ws.root;
          out["config"] = ws.config;
          out["queries"] = ws.queries;
          out["scores"] = ws.scores;
          out["corpus_entries"] = ws.corpus_entries;
          out["query_frames"] = ws.query_frames;
          return out;
        },
        py::arg("root"), py::arg("seed") = 7);
}
