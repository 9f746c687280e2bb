#include "irlad/bench.hpp"
#include "irlad/cli.hpp"
#include "irlad/data.hpp"
#include "irlad/eval.hpp"
#include "irlad/io.hpp"
#include "irlad/scoring.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>

namespace py = pybind11;
using namespace irlad;

namespace {

using ObsMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows are [lon, lat, lon0, lat0, elapsed, v_lon, v_lat].
std::vector<StateAction> rows_to_obs(const ObsMatrix& m) {
  if (m.cols() != static_cast<Eigen::Index>(kInputDim))
    throw std::invalid_argument("observations need 7 columns: lon, lat, lon0, lat0, t, v_lon, v_lat");
  std::vector<StateAction> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (std::size_t k = 0; k < kStateDim; ++k) out[static_cast<std::size_t>(i)].state[k] = m(i, static_cast<Eigen::Index>(k));
    for (std::size_t k = 0; k < kActionDim; ++k)
      out[static_cast<std::size_t>(i)].action[k] = m(i, static_cast<Eigen::Index>(kStateDim + k));
  }
  return out;
}

ObsMatrix obs_to_rows(const std::vector<StateAction>& obs) {
  ObsMatrix m(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(kInputDim));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t k = 0; k < kStateDim; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = obs[i].state[k];
    for (std::size_t k = 0; k < kActionDim; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(kStateDim + k)) = obs[i].action[k];
  }
  return m;
}

py::dict score(const io::ModelFile& mf, const ObsMatrix& rows, double epsilon, double gamma, const std::string& mode) {
  if (!mf.stats) throw std::invalid_argument("model file has no normalization statistics");
  const Thresholds th{epsilon, gamma};
  const DetectMode dm = detect_mode_from_string(mode);
  const auto obs = rows_to_obs(rows);
  Eigen::VectorXd mean(rows.rows()), sd(rows.rows()), n(rows.rows());
  std::vector<std::string> flags;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const PointScore p = score_point(mf.reward, *mf.stats, obs[i], th, dm);
    const auto k = static_cast<Eigen::Index>(i);
    mean[k] = p.reward_mean;
    sd[k] = p.reward_std;
    n[k] = p.detection.normality;
    flags.push_back(to_string(p.detection.flag));
  }
  py::dict d;
  d["reward_mean"] = mean;
  d["reward_std"] = sd;
  d["normality"] = n;
  d["flag"] = flags;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bootstrapped-IRL anomaly detection core";

  py::class_<io::ModelFile>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return io::load_model_file(p); }, py::arg("path"))
      .def_property_readonly("agent_id", [](const io::ModelFile& f) { return f.agent_id; })
      .def_property_readonly("seed", [](const io::ModelFile& f) { return f.seed; })
      .def_property_readonly("config_hash", [](const io::ModelFile& f) { return f.config_hash; })
      .def_property_readonly("num_heads", [](const io::ModelFile& f) { return f.reward.num_heads(); })
      .def_property_readonly("stats",
                             [](const io::ModelFile& f) -> py::object {
                               if (!f.stats) return py::none();
                               py::dict d;
                               d["mean"] = f.stats->mean;
                               d["std"] = f.stats->stddev;
                               d["count"] = f.stats->count;
                               d["floored"] = f.stats->floored;
                               return d;
                             })
      .def("ensemble",
           [](const io::ModelFile& f, const ObsMatrix& rows) {
             const EnsembleStats e = ensemble_rewards(f.reward, rows_to_obs(rows));
             return py::make_tuple(e.mean, e.stddev);
           },
           py::arg("observations"), "per-row ensemble mean and standard deviation of the reward")
      .def("score", &score, py::arg("observations"), py::arg("epsilon") = -2.0, py::arg("gamma") = 1.5,
           py::arg("mode") = "ADU");

  m.def(
      "read_canonical",
      [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + p.string());
        const TrajectorySet set = data::read_canonical(in, p.string());
        py::list out;
        for (const auto& t : set.trajectories) {
          py::dict d;
          d["agent_id"] = t.agent_id;
          d["traj_id"] = t.traj_id;
          d["label"] = label_to_int(t.label);
          d["observations"] = obs_to_rows(t.observations);
          out.append(d);
        }
        return out;
      },
      py::arg("path"));

  m.def(
      "metrics",
      [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
        const eval::Metrics x = eval::metrics(eval::ConfusionCounts{tp, fp, fn, tn});
        py::dict d;
        d["precision"] = x.precision;
        d["recall"] = x.recall;
        d["f1"] = x.f1;
        return d;
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn") = 0);

  m.def(
      "roc_area",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        std::vector<Label> l;
        for (int v : labels) l.push_back(label_from_int(v));
        return eval::roc_area(scores, l);
      },
      py::arg("scores"), py::arg("labels"), "lower scores are more anomalous; labels 1 = anomaly, 0 = normal");

  m.def(
      "gradient_check",
      [](std::size_t rollouts, std::uint64_t seed, bool corrupt) {
        Rng rng = cli::agent_rng(seed, "gradient_agreement");
        const bench::GradientCheck g = bench::random_gradient_check(
            rollouts, rng, corrupt ? bench::Corruption::IgnoreProposal : bench::Corruption::None);
        py::dict d;
        d["exact"] = g.exact;
        d["estimate"] = g.estimate;
        d["standard_error"] = g.standard_error;
        d["max_z"] = g.max_z;
        d["pass"] = g.pass;
        return d;
      },
      py::arg("rollouts") = 10000, py::arg("seed") = 0, py::arg("corrupt") = false);

  m.def(
      "run",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "irlad");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "runs the command line with these arguments and returns its exit code");
}
