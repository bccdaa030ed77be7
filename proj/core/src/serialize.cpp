#include "prgp/serialize.hpp"

#include <fstream>

#include <json.hpp>

namespace prgp {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back(v[i]);
  }
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    }
  }
  return m;
}

}  // namespace

void save_methods(const std::string& path, const std::vector<TrainedMethod>& methods) {
  json root;
  root["format"] = "prgp-models";
  root["version"] = 1;
  json methods_json = json::array();
  for (const TrainedMethod& method : methods) {
    json mj;
    mj["name"] = method.name;
    json vehicles = json::array();
    for (const VehicleFit& fit : method.fits) {
      json vj;
      vj["vehicle_id"] = fit.vehicle_id;
      vj["t0"] = fit.t0;
      vj["aborted"] = fit.result.aborted;
      vj["iterations_run"] = fit.result.iterations_run;
      const GPModel& model = fit.result.model;
      vj["inputs"] = vector_to_json(model.inputs());
      vj["outputs"] = matrix_to_json(model.outputs());
      vj["output_offset"] = vector_to_json(model.output_offset());
      json hp = json::array();
      json log_tau = json::array();
      for (int j = 0; j < model.dims(); ++j) {
        hp.push_back({{"log_lengthscale", model.hyperparams(j).log_lengthscale},
                      {"log_signal_variance", model.hyperparams(j).log_signal_variance},
                      {"jitter", model.hyperparams(j).jitter}});
        log_tau.push_back(model.log_tau(j));
      }
      vj["hyperparams"] = std::move(hp);
      vj["log_tau"] = std::move(log_tau);
      json eqs = json::array();
      for (const ShadowEquation& eq : fit.result.shadow.equations) {
        eqs.push_back({{"kind", kind_name(eq.model.kind)},
                       {"beta", vector_to_json(eq.model.beta)},
                       {"omega", eq.omega},
                       {"gamma", eq.gamma},
                       {"shadow_log_lengthscale", eq.shadow_hp.log_lengthscale},
                       {"shadow_log_signal_variance", eq.shadow_hp.log_signal_variance},
                       {"shadow_jitter", eq.shadow_hp.jitter}});
      }
      vj["equations"] = std::move(eqs);
      vehicles.push_back(std::move(vj));
    }
    mj["vehicles"] = std::move(vehicles);
    methods_json.push_back(std::move(mj));
  }
  root["methods"] = std::move(methods_json);

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("save_methods: cannot write " + path);
  }
  out << root.dump(2) << '\n';
  if (!out) {
    throw IoError("save_methods: write failed for " + path);
  }
}

std::vector<TrainedMethod> load_methods(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("load_methods: cannot open " + path);
  }
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("load_methods: invalid JSON: ") + e.what());
  }
  if (root.value("format", "") != "prgp-models" || root.value("version", 0) != 1) {
    throw SchemaError("load_methods: unrecognized container format/version");
  }

  std::vector<TrainedMethod> methods;
  for (const json& mj : root.at("methods")) {
    TrainedMethod method;
    method.name = mj.at("name").get<std::string>();
    for (const json& vj : mj.at("vehicles")) {
      const Eigen::VectorXd inputs = vector_from_json(vj.at("inputs"));
      const Eigen::MatrixXd outputs = matrix_from_json(vj.at("outputs"));
      std::vector<KernelHyperparams> hp;
      for (const json& hj : vj.at("hyperparams")) {
        KernelHyperparams h;
        h.log_lengthscale = hj.at("log_lengthscale").get<double>();
        h.log_signal_variance = hj.at("log_signal_variance").get<double>();
        h.jitter = hj.at("jitter").get<double>();
        hp.push_back(h);
      }
      const Eigen::VectorXd log_tau = vector_from_json(vj.at("log_tau"));
      Eigen::VectorXd offset;
      if (vj.contains("output_offset")) {
        offset = vector_from_json(vj.at("output_offset"));
      }

      ShadowGP shadow;
      for (const json& ej : vj.at("equations")) {
        ShadowEquation eq;
        const auto kind = kind_from_name(ej.at("kind").get<std::string>());
        if (!kind) {
          throw SchemaError("load_methods: unknown physics kind " +
                            ej.at("kind").get<std::string>());
        }
        eq.model = make_physics_model(*kind, vector_from_json(ej.at("beta")));
        eq.omega = ej.at("omega").get<double>();
        eq.gamma = ej.at("gamma").get<double>();
        eq.shadow_hp.log_lengthscale = ej.at("shadow_log_lengthscale").get<double>();
        eq.shadow_hp.log_signal_variance = ej.at("shadow_log_signal_variance").get<double>();
        eq.shadow_hp.jitter = ej.at("shadow_jitter").get<double>();
        shadow.equations.push_back(std::move(eq));
      }

      VehicleFit fit{vj.at("vehicle_id").get<long long>(), vj.at("t0").get<double>(),
                     TrainResult{GPModel(inputs, outputs, std::move(hp), log_tau, offset),
                                 std::move(shadow),
                                 {},
                                 vj.value("iterations_run", 0),
                                 false,
                                 vj.value("aborted", false),
                                 {}}};
      method.fits.push_back(std::move(fit));
    }
    methods.push_back(std::move(method));
  }
  return methods;
}

}  // namespace prgp
