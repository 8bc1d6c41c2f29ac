#pragma once

// Internal helpers shared by the model artifact serializers.

#include <json.hpp>

#include "delay_adapt/gbm.hpp"

namespace da::detail {

inline nlohmann::ordered_json nodes_to_json(const RegressionTree& tree) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes) {
        nlohmann::ordered_json jn;
        if (n.is_leaf()) {
            jn["value"] = n.value;
        } else {
            jn["feature"] = n.feature;
            jn["threshold"] = n.threshold;
            jn["left"] = n.left;
            jn["right"] = n.right;
        }
        arr.push_back(std::move(jn));
    }
    return arr;
}

inline RegressionTree nodes_from_json(const nlohmann::json& arr) {
    RegressionTree tree;
    for (const auto& jn : arr) {
        TreeNode n;
        if (jn.contains("feature")) {
            n.feature = jn.at("feature").get<int>();
            n.threshold = jn.at("threshold").get<double>();
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
        } else {
            n.value = jn.at("value").get<double>();
        }
        tree.nodes.push_back(n);
    }
    return tree;
}

}  // namespace da::detail
