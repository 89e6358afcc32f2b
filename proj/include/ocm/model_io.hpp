#pragma once

#include "ocm/model.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ocm {

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& doc, const std::string& key) {
    auto it = doc.find(key);
    if (it == doc.end())
        throw ValidationError(key, "missing required key");
    return *it;
}

inline double read_number(const json& v, const std::string& path) {
    if (!v.is_number())
        throw ValidationError(path, "expected a number");
    return v.get<double>();
}

inline int read_int(const json& v, const std::string& path) {
    if (!v.is_number_integer())
        throw ValidationError(path, "expected an integer");
    return v.get<int>();
}

inline Matrix read_matrix(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty())
        throw ValidationError(path, "expected a nonempty list of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    Eigen::Index cols = -1;
    Matrix m;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = v[static_cast<std::size_t>(i)];
        const auto row_path = indexed(path, static_cast<std::size_t>(i));
        if (!row.is_array())
            throw ValidationError(row_path, "expected a list of numbers");
        if (cols < 0) {
            cols = static_cast<Eigen::Index>(row.size());
            m.resize(rows, cols);
        } else if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError(row_path, "expected " + std::to_string(cols) + " entries");
        }
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = read_number(row[static_cast<std::size_t>(j)], indexed(row_path, static_cast<std::size_t>(j)));
    }
    return m;
}

inline std::vector<Matrix> read_matrix_list(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty())
        throw ValidationError(key, "expected a nonempty list of matrices");
    std::vector<Matrix> out;
    for (std::size_t a = 0; a < v.size(); ++a)
        out.push_back(read_matrix(v[a], indexed(key, a)));
    return out;
}

inline std::vector<std::string> read_labels(const json& doc, const std::string& key, int expected) {
    auto it = doc.find(key);
    if (it == doc.end())
        return {};
    if (it->is_number_integer()) {
        if (it->get<int>() != expected)
            throw ValidationError(key, "declared " + std::to_string(it->get<int>()) + " but the matrices imply " +
                                           std::to_string(expected));
        return {};
    }
    if (!it->is_array())
        throw ValidationError(key, "expected a count or a list of labels");
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& item = (*it)[i];
        labels.push_back(item.is_string() ? item.get<std::string>() : item.dump());
    }
    if (static_cast<int>(labels.size()) != expected)
        throw ValidationError(key, "has " + std::to_string(labels.size()) + " labels, expected " +
                                       std::to_string(expected));
    return labels;
}

} // namespace detail

/**
 * Builds a model from a parsed document. Keys: `transition` (list of
 * row-major matrices) or `generator` (exponentiated), `reward`, `c_obs`,
 * `gamma`, `horizon`, and optionally `states`, `actions`, `switching_cost`
 * (number or matrix), `absorbing` (list of `{state, pinned_value}`) and
 * `reward_timing` (`start_of_step` or `end_of_step`).
 */
inline OcmModel model_from_json(const nlohmann::json& doc) {
    using detail::require;
    if (!doc.is_object())
        throw ValidationError("", "model document must be an object");
    const bool has_p = doc.contains("transition");
    const bool has_q = doc.contains("generator");
    if (has_p == has_q)
        throw ValidationError("transition", "exactly one of 'transition' and 'generator' is required");

    std::vector<Matrix> kernels;
    if (has_p) {
        kernels = detail::read_matrix_list(doc["transition"], "transition");
    } else {
        const auto gens = detail::read_matrix_list(doc["generator"], "generator");
        for (std::size_t a = 0; a < gens.size(); ++a) {
            check_generator(gens[a], detail::indexed("generator", a));
            kernels.push_back(expm(gens[a]));
        }
    }
    const Matrix reward = detail::read_matrix(require(doc, "reward"), "reward");
    const double c_obs = detail::read_number(require(doc, "c_obs"), "c_obs");
    const double gamma = detail::read_number(require(doc, "gamma"), "gamma");
    const int horizon = detail::read_int(require(doc, "horizon"), "horizon");

    Matrix g;
    if (auto it = doc.find("switching_cost"); it != doc.end()) {
        if (it->is_number()) {
            const double s = it->get<double>();
            const auto d = static_cast<Eigen::Index>(kernels.size());
            g = Matrix::Constant(d, d, s);
            g.diagonal().setZero();
        } else {
            g = detail::read_matrix(*it, "switching_cost");
        }
    }

    std::vector<AbsorbingState> absorbing;
    if (auto it = doc.find("absorbing"); it != doc.end()) {
        if (!it->is_array())
            throw ValidationError("absorbing", "expected a list of {state, pinned_value}");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto path = detail::indexed("absorbing", i);
            const auto& item = (*it)[i];
            if (!item.is_object())
                throw ValidationError(path, "expected an object");
            absorbing.push_back({detail::read_int(require(item, "state"), path + ".state"),
                                 detail::read_number(require(item, "pinned_value"), path + ".pinned_value")});
        }
    }

    OcmModel model(std::move(kernels), reward, c_obs, gamma, horizon, g, std::move(absorbing));
    auto states = detail::read_labels(doc, "states", model.num_states());
    auto actions = detail::read_labels(doc, "actions", model.num_actions());
    if (!states.empty() || !actions.empty())
        model = model.with_labels(std::move(states), std::move(actions));
    if (auto it = doc.find("reward_timing"); it != doc.end()) {
        const auto s = it->is_string() ? it->get<std::string>() : std::string();
        if (s == "start_of_step")
            model = model.with_reward_timing(RewardTiming::start_of_step);
        else if (s == "end_of_step")
            model = model.with_reward_timing(RewardTiming::end_of_step);
        else
            throw ValidationError("reward_timing", "expected 'start_of_step' or 'end_of_step'");
    }
    return model;
}

inline OcmModel parse_model(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("", std::string("malformed model document: ") + e.what());
    }
    return model_from_json(doc);
}

inline OcmModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

inline nlohmann::json model_to_json(const OcmModel& model) {
    auto matrix = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                row.push_back(m(i, j));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    nlohmann::json doc;
    doc["states"] = model.state_labels().empty() ? nlohmann::json(model.num_states())
                                                  : nlohmann::json(model.state_labels());
    doc["actions"] = model.action_labels().empty() ? nlohmann::json(model.num_actions())
                                                    : nlohmann::json(model.action_labels());
    nlohmann::json kernels = nlohmann::json::array();
    for (int a = 0; a < model.num_actions(); ++a)
        kernels.push_back(matrix(model.transition(a).to_dense()));
    doc["transition"] = std::move(kernels);
    doc["reward"] = matrix(model.reward());
    doc["c_obs"] = model.observation_cost();
    doc["gamma"] = model.gamma();
    doc["horizon"] = model.horizon();
    doc["switching_cost"] = matrix(model.switching_cost());
    nlohmann::json abs = nlohmann::json::array();
    for (const auto& s : model.absorbing())
        abs.push_back({{"state", s.state}, {"pinned_value", s.pinned_value}});
    doc["absorbing"] = std::move(abs);
    doc["reward_timing"] = model.reward_timing() == RewardTiming::end_of_step ? "end_of_step" : "start_of_step";
    return doc;
}

} // namespace ocm
