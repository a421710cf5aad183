#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedhpo/data.hpp"
#include "fedhpo/models.hpp"
#include "fedhpo/search_space.hpp"
#include "fedhpo/tpe.hpp"

namespace fedhpo {

/// Invalid or unreadable experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HpoSettings {
    std::size_t budget = 20;
    /// Centralized training epochs per trial.
    std::size_t epochs = 20;
    TpeOptions tpe;
};

struct FederatedSettings {
    std::size_t clients = 4;
    double alpha = 0.5;
    std::size_t min_per_client = 8;
    std::size_t rounds = 3;
    std::size_t local_epochs = 50;
    double participation = 1.0;
};

/// Whole experiment: two tasks, split, HPO budget, search space, model sweep
/// and federated schedule. Defaults are the desk-scale setup documented in
/// the README.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    /// Shared by both tasks so they match in class balance.
    double positive_fraction = 0.5;
    std::array<TaskSpec, 2> tasks = default_tasks();
    SplitSpec split;
    HpoSettings hpo;
    SearchSpace space = SearchSpace::defaults();
    std::vector<ModelKind> models = {ModelKind::logistic(), ModelKind::mlp(8)};
    FederatedSettings federated;
    std::string output_dir = "out";

    static std::array<TaskSpec, 2> default_tasks() {
        TaskSpec ovary{"ovary-like", 498, 0.5, TaskDifficulty::Linear, 4, 1.0};
        TaskSpec colon{"colon-like", 498, 0.5, TaskDifficulty::Rings, 4, 0.25};
        return {ovary, colon};
    }

    /// Task specs with the shared positive fraction applied.
    std::array<TaskSpec, 2> effective_tasks() const {
        auto t = tasks;
        for (auto& s : t) s.positive_fraction = positive_fraction;
        return t;
    }

    void validate() const {
        try {
            for (const auto& t : effective_tasks()) t.validate();
            split.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (tasks[0].name == tasks[1].name) throw ConfigError("config: task names must differ");
        if (tasks[0].feature_dim != tasks[1].feature_dim)
            throw ConfigError("config: both tasks need the same feature_dim so their data can be pooled");
        if (hpo.budget < 1) throw ConfigError("config: hpo.budget must be >= 1");
        if (!(hpo.tpe.gamma > 0.0 && hpo.tpe.gamma < 1.0)) throw ConfigError("config: hpo.gamma must be in (0, 1)");
        if (hpo.tpe.n_candidates < 1) throw ConfigError("config: hpo.n_candidates must be >= 1");
        if (models.empty()) throw ConfigError("config: models must list at least one model kind");
        for (std::size_t i = 0; i < models.size(); ++i)
            for (std::size_t j = i + 1; j < models.size(); ++j)
                if (models[i] == models[j]) throw ConfigError("config: duplicate model kind " + models[i].name());
        if (federated.clients < 1) throw ConfigError("config: federated.clients must be >= 1");
        if (!(federated.alpha > 0.0)) throw ConfigError("config: federated.alpha must be > 0");
        if (federated.rounds < 1 || federated.local_epochs < 1)
            throw ConfigError("config: federated.rounds and federated.local_epochs must be >= 1");
        if (!(federated.participation > 0.0 && federated.participation <= 1.0))
            throw ConfigError("config: federated.participation must be in (0, 1]");
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    using nlohmann::json;
    json tasks = json::array();
    for (const auto& t : c.tasks)
        tasks.push_back({{"name", t.name},
                         {"n_samples", t.n_samples},
                         {"difficulty", to_string(t.difficulty)},
                         {"feature_dim", t.feature_dim},
                         {"noise_scale", t.noise_scale}});
    json optimizers = json::array();
    for (auto o : c.space.optimizer_candidates()) optimizers.push_back(std::string(to_string(o)));
    json models = json::array();
    for (const auto& m : c.models) models.push_back(m.name());
    return {
        {"seed", c.seed},
        {"positive_fraction", c.positive_fraction},
        {"tasks", tasks},
        {"split", {{"train_fraction", c.split.train_fraction}, {"val_fraction_of_train", c.split.val_fraction_of_train}}},
        {"hpo",
         {{"budget", c.hpo.budget},
          {"epochs", c.hpo.epochs},
          {"gamma", c.hpo.tpe.gamma},
          {"startup_trials", c.hpo.tpe.startup_trials},
          {"n_candidates", c.hpo.tpe.n_candidates}}},
        {"search_space",
         {{"lr_low", c.space.lr_low()},
          {"lr_high", c.space.lr_high()},
          {"batch_sizes", c.space.batch_candidates()},
          {"optimizers", optimizers}}},
        {"models", models},
        {"federated",
         {{"clients", c.federated.clients},
          {"alpha", c.federated.alpha},
          {"min_per_client", c.federated.min_per_client},
          {"rounds", c.federated.rounds},
          {"local_epochs", c.federated.local_epochs},
          {"participation", c.federated.participation}}},
        {"output_dir", c.output_dir},
    };
}

namespace detail {

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        obj.at(key).get_to(out);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    using detail::read_field;
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    detail::reject_unknown(j,
                           {"seed", "positive_fraction", "tasks", "split", "hpo", "search_space", "models", "federated",
                            "output_dir"},
                           "top level");
    ExperimentConfig c;
    read_field(j, "seed", c.seed);
    read_field(j, "positive_fraction", c.positive_fraction);
    read_field(j, "output_dir", c.output_dir);

    if (j.contains("tasks")) {
        const auto& tasks = j.at("tasks");
        if (!tasks.is_array() || tasks.size() != 2) throw ConfigError("config: tasks must be an array of two tasks");
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& t = tasks[i];
            detail::reject_unknown(t, {"name", "n_samples", "difficulty", "feature_dim", "noise_scale"}, "tasks[]");
            auto& spec = c.tasks[i];
            read_field(t, "name", spec.name);
            read_field(t, "n_samples", spec.n_samples);
            read_field(t, "feature_dim", spec.feature_dim);
            read_field(t, "noise_scale", spec.noise_scale);
            if (t.contains("difficulty")) {
                try {
                    spec.difficulty = parse_difficulty(t.at("difficulty").get<std::string>());
                } catch (const std::exception& e) {
                    throw ConfigError(std::string("config: ") + e.what());
                }
            }
        }
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        detail::reject_unknown(s, {"train_fraction", "val_fraction_of_train"}, "split");
        read_field(s, "train_fraction", c.split.train_fraction);
        read_field(s, "val_fraction_of_train", c.split.val_fraction_of_train);
    }
    if (j.contains("hpo")) {
        const auto& h = j.at("hpo");
        detail::reject_unknown(h, {"budget", "epochs", "gamma", "startup_trials", "n_candidates"}, "hpo");
        read_field(h, "budget", c.hpo.budget);
        read_field(h, "epochs", c.hpo.epochs);
        read_field(h, "gamma", c.hpo.tpe.gamma);
        read_field(h, "startup_trials", c.hpo.tpe.startup_trials);
        read_field(h, "n_candidates", c.hpo.tpe.n_candidates);
    }
    if (j.contains("search_space")) {
        const auto& s = j.at("search_space");
        detail::reject_unknown(s, {"lr_low", "lr_high", "batch_sizes", "optimizers"}, "search_space");
        double lo = c.space.lr_low(), hi = c.space.lr_high();
        std::vector<std::size_t> batches = c.space.batch_candidates();
        std::vector<std::string> opt_names;
        for (auto o : c.space.optimizer_candidates()) opt_names.emplace_back(to_string(o));
        read_field(s, "lr_low", lo);
        read_field(s, "lr_high", hi);
        read_field(s, "batch_sizes", batches);
        read_field(s, "optimizers", opt_names);
        try {
            std::vector<OptimizerKind> opts;
            for (const auto& n : opt_names) opts.push_back(parse_optimizer(n));
            c.space = SearchSpace(lo, hi, batches, opts);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    if (j.contains("models")) {
        std::vector<std::string> names;
        read_field(j, "models", names);
        c.models.clear();
        try {
            for (const auto& n : names) c.models.push_back(ModelKind::parse(n));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    if (j.contains("federated")) {
        const auto& f = j.at("federated");
        detail::reject_unknown(f, {"clients", "alpha", "min_per_client", "rounds", "local_epochs", "participation"},
                               "federated");
        read_field(f, "clients", c.federated.clients);
        read_field(f, "alpha", c.federated.alpha);
        read_field(f, "min_per_client", c.federated.min_per_client);
        read_field(f, "rounds", c.federated.rounds);
        read_field(f, "local_epochs", c.federated.local_epochs);
        read_field(f, "participation", c.federated.participation);
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace fedhpo
