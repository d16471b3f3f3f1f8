#include "stockpred/modelstore.hpp"

#include <json.hpp>

#include "stockpred/errors.hpp"
#include "stockpred/ioutil.hpp"

namespace stockpred {

namespace {

using nlohmann::json; // std::map-backed: keys dump in sorted order

json kernel_to_json(const Eigen::MatrixXd& m) {
    json values = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(format_g17(m(r, c)));
    }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::move(values)}};
}

json vector_to_json(const Eigen::VectorXd& v) {
    json values = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) values.push_back(format_g17(v[k]));
    return values;
}

Eigen::MatrixXd kernel_from_json(const json& j, Eigen::Index want_rows, Eigen::Index want_cols,
                                 const std::string& name) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto& values = j.at("values");
    if (rows != want_rows || cols != want_cols || static_cast<Eigen::Index>(values.size()) != rows * cols) {
        fail("ShapeMismatch", name + ": declared " + std::to_string(rows) + "x" + std::to_string(cols) +
                                  " with " + std::to_string(values.size()) + " values, expected " +
                                  std::to_string(want_rows) + "x" + std::to_string(want_cols));
    }
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = parse_double_strict(values.at(k++).get<std::string>());
    }
    return m;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index want_size, const std::string& name) {
    if (static_cast<Eigen::Index>(j.size()) != want_size) {
        fail("ShapeMismatch",
             name + ": got " + std::to_string(j.size()) + " values, expected " + std::to_string(want_size));
    }
    Eigen::VectorXd v(want_size);
    for (Eigen::Index k = 0; k < want_size; ++k) v[k] = parse_double_strict(j.at(static_cast<std::size_t>(k)).get<std::string>());
    return v;
}

json recurrent_to_json(const RecurrentParams& p) {
    return json{{"input_kernel", kernel_to_json(p.input_kernel)},
                {"recurrent_kernel", kernel_to_json(p.recurrent_kernel)},
                {"bias", vector_to_json(p.bias)}};
}

RecurrentParams recurrent_from_json(const json& j, int gates, Eigen::Index H, Eigen::Index D_in,
                                    const std::string& name) {
    RecurrentParams p;
    p.input_kernel = kernel_from_json(j.at("input_kernel"), gates * H, D_in, name + ".input_kernel");
    p.recurrent_kernel = kernel_from_json(j.at("recurrent_kernel"), gates * H, H, name + ".recurrent_kernel");
    p.bias = vector_from_json(j.at("bias"), gates * H, name + ".bias");
    return p;
}

} // namespace

void save_model(const NetworkState& state, const ModelSpec& spec, const ScalerParams& scaler,
                const Provenance& provenance, const std::filesystem::path& path) {
    json doc;
    doc["format_version"] = kModelFormatVersion;
    doc["model_spec"] = {{"neurons", spec.neurons},
                         {"extra_layer", to_string(spec.extra_layer)},
                         {"dropout", format_g17(spec.dropout)},
                         {"input_dim", spec.input_dim},
                         {"time_steps", spec.time_steps}};
    doc["scaler"] = {{"feature_names", scaler.feature_names},
                     {"min", vector_to_json(scaler.min_values)},
                     {"max", vector_to_json(scaler.max_values)},
                     {"fit_begin", scaler.fit_begin},
                     {"fit_end", scaler.fit_end},
                     {"close_index", scaler.close_index}};
    json weights;
    weights["base"] = recurrent_to_json(state.base);
    if (state.extra) weights["extra"] = recurrent_to_json(*state.extra);
    weights["head"] = {{"weight", vector_to_json(state.head.weight)}, {"bias", format_g17(state.head.bias)}};
    doc["weights"] = std::move(weights);
    doc["provenance"] = {{"symbol", provenance.symbol},
                         {"seeds", provenance.seeds},
                         {"config", provenance.config_echo},
                         {"created_utc", provenance.created_utc},
                         {"checkpoint", provenance.checkpoint}};
    write_file_atomic(path, doc.dump(2) + "\n");
}

LoadedModel load_model(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail("ParseError", path.string() + ": " + e.what());
    }

    LoadedModel out;
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            fail("UnknownVersion", "format_version " + std::to_string(version) + " (expected " +
                                       std::to_string(kModelFormatVersion) + ")");
        }
        const json& ms = doc.at("model_spec");
        out.spec.neurons = ms.at("neurons").get<int>();
        out.spec.extra_layer = extra_layer_from_string(ms.at("extra_layer").get<std::string>());
        out.spec.dropout = parse_double_strict(ms.at("dropout").get<std::string>());
        out.spec.input_dim = ms.at("input_dim").get<int>();
        out.spec.time_steps = ms.at("time_steps").get<int>();

        const json& sc = doc.at("scaler");
        out.scaler.feature_names = sc.at("feature_names").get<std::vector<std::string>>();
        const Eigen::Index D = static_cast<Eigen::Index>(out.scaler.feature_names.size());
        out.scaler.min_values = vector_from_json(sc.at("min"), D, "scaler.min");
        out.scaler.max_values = vector_from_json(sc.at("max"), D, "scaler.max");
        out.scaler.fit_begin = sc.at("fit_begin").get<int>();
        out.scaler.fit_end = sc.at("fit_end").get<int>();
        out.scaler.close_index = sc.at("close_index").get<int>();
        if (out.scaler.close_index < 0 || out.scaler.close_index >= D) {
            fail("ShapeMismatch", "scaler close_index out of range");
        }
        if (static_cast<Eigen::Index>(out.spec.input_dim) != D) {
            fail("ShapeMismatch", "scaler feature count does not match model input_dim");
        }

        const Eigen::Index H = out.spec.neurons;
        const json& w = doc.at("weights");
        out.state.base = recurrent_from_json(w.at("base"), 4, H, out.spec.input_dim, "base");
        if (out.spec.extra_layer != ExtraLayer::none) {
            const int gates = out.spec.extra_layer == ExtraLayer::gru ? 3 : 4;
            out.state.extra = recurrent_from_json(w.at("extra"), gates, H, H, "extra");
        } else if (w.contains("extra")) {
            fail("ShapeMismatch", "weights contain an extra layer but the spec declares none");
        }
        out.state.head.weight = vector_from_json(w.at("head").at("weight"), H, "head.weight");
        out.state.head.bias = parse_double_strict(w.at("head").at("bias").get<std::string>());

        const json& prov = doc.at("provenance");
        out.provenance.symbol = prov.at("symbol").get<std::string>();
        out.provenance.seeds = prov.at("seeds").get<std::map<std::string, std::uint64_t>>();
        out.provenance.config_echo = prov.at("config").get<std::map<std::string, std::string>>();
        out.provenance.created_utc = prov.at("created_utc").get<std::string>();
        out.provenance.checkpoint = prov.at("checkpoint").get<bool>();
    } catch (const json::exception& e) {
        fail("ParseError", path.string() + ": " + e.what());
    }

    for (const auto& [ptr, n] : param_spans(out.state)) {
        for (Eigen::Index k = 0; k < n; ++k) {
            if (!std::isfinite(ptr[k])) fail("CorruptNumber", "non-finite weight in " + path.string());
        }
    }
    return out;
}

} // namespace stockpred
