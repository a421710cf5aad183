#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedhpo/config.hpp"
#include "fedhpo/data.hpp"
#include "fedhpo/fedavg.hpp"
#include "fedhpo/format.hpp"
#include "fedhpo/heuristic.hpp"
#include "fedhpo/models.hpp"
#include "fedhpo/report.hpp"
#include "fedhpo/rng.hpp"
#include "fedhpo/tpe.hpp"

namespace fedhpo {

/// Append-only CSV sink. Rows are written and flushed under a lock, so
/// concurrent producers never interleave partial lines.
class CsvLedger {
public:
    CsvLedger(std::ostream& out, std::string header) : out_(&out) { write_line(header); }

    CsvLedger(const std::filesystem::path& path, std::string header)
        : file_(std::make_unique<std::ofstream>(path, std::ios::trunc)), out_(file_.get()) {
        if (!*file_) throw std::runtime_error("cannot open ledger " + path.string());
        write_line(header);
    }

    void append(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ',';
            line += cells[i];
        }
        write_line(line);
    }

private:
    void write_line(const std::string& line) {
        std::lock_guard lock(mutex_);
        *out_ << line << '\n';
        out_->flush();
    }

    std::unique_ptr<std::ofstream> file_;
    std::ostream* out_;
    std::mutex mutex_;
};

inline constexpr const char* kTrialsHeader = "task,model,trial,lr,optimizer,batch,val_loss,val_f1";
inline constexpr const char* kRoundsHeader = "model,scheme,round,accuracy,precision,recall,f1,mean_client_loss";
inline constexpr const char* kTaskMetricsHeader = "model,scheme,task,accuracy,precision,recall,f1";

/// One generated task with its stratified split.
struct TaskData {
    TaskSpec spec;
    Dataset full;
    DataSplit split;
};

/// Generates and splits both tasks. Streams are derived from the experiment
/// seed, so every phase sees the same data.
inline std::vector<TaskData> prepare_tasks(const ExperimentConfig& cfg) {
    std::vector<TaskData> out;
    const auto specs = cfg.effective_tasks();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        SeededRng gen(derive_seed(cfg.seed, "task", {i}));
        SeededRng splitter(derive_seed(cfg.seed, "split", {i}));
        TaskData t{specs[i], gen_task(specs[i], gen), {}};
        t.split = stratified_split(t.full, cfg.split, splitter);
        out.push_back(std::move(t));
    }
    return out;
}

using OptimumKey = std::pair<std::string, std::string>;  // (task, model)

struct Phase1Result {
    std::map<OptimumKey, ScoredOptimum> optima;
    std::map<OptimumKey, HpoResult> runs;
};

/// Centralized objective: train on the train split from a fixed initial model,
/// score validation loss and F1. Divergence yields (+inf, 0).
inline HpoObjective make_centralized_objective(const DataSplit& split, const ModelKind& kind, std::size_t epochs,
                                               std::uint64_t seed) {
    auto trial = std::make_shared<std::size_t>(0);
    return [&split, kind, epochs, seed, trial](const Configuration& config) -> std::pair<double, double> {
        const std::size_t index = (*trial)++;
        SeededRng init_rng(derive_seed(seed, "init"));
        SeededRng train_rng(derive_seed(seed, "train", {index}));
        try {
            auto params = init_model(kind, split.train.dim(), init_rng);
            params = train_epochs(std::move(params), split.train, config, epochs, train_rng);
            return {mean_loss(params, split.val), evaluate(params, split.val).f1};
        } catch (const NonFiniteError&) {
            return {std::numeric_limits<double>::infinity(), 0.0};
        }
    };
}

/// Phase 1: TPE per (task, model) on the task's own train/validation split.
inline Phase1Result run_phase1(const ExperimentConfig& cfg, CsvLedger* trials_ledger = nullptr) {
    cfg.validate();
    const auto tasks = prepare_tasks(cfg);
    Phase1Result result;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        const auto& task = tasks[ti];
        for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
            const auto& kind = cfg.models[mi];
            const auto objective =
                make_centralized_objective(task.split, kind, cfg.hpo.epochs, derive_seed(cfg.seed, "hpo", {ti, mi}));
            SeededRng tpe_rng(derive_seed(cfg.seed, "tpe", {ti, mi}));
            auto run = run_hpo(objective, cfg.space, cfg.hpo.budget, tpe_rng, cfg.hpo.tpe);

            if (trials_ledger) {
                for (std::size_t i = 0; i < run.history.size(); ++i) {
                    const auto& t = run.history[i];
                    trials_ledger->append({task.spec.name, kind.name(), std::to_string(i),
                                           format_exact(t.config.learning_rate), std::string(to_string(t.config.optimizer)),
                                           std::to_string(t.config.batch_size), format_exact(t.objective),
                                           format_exact(t.val_f1)});
                }
            }
            const OptimumKey key{task.spec.name, kind.name()};
            result.optima[key] = ScoredOptimum{run.best.config, run.best.objective, run.best.val_f1, task.spec.name};
            result.runs[key] = std::move(run);
        }
    }
    return result;
}

/// Training data of both tasks (train + validation rows) and their test sets.
struct PooledData {
    Dataset train;
    Dataset test;
    std::vector<Dataset> task_tests;
};

inline PooledData pool_tasks(const std::vector<TaskData>& tasks) {
    std::vector<Dataset> trains, tests;
    for (const auto& t : tasks) {
        std::vector<std::size_t> rows = t.split.train_rows;
        rows.insert(rows.end(), t.split.val_rows.begin(), t.split.val_rows.end());
        std::sort(rows.begin(), rows.end());
        trains.push_back(t.full.subset(rows));
        tests.push_back(t.split.test);
    }
    return {concat(trains, "pooled-train"), concat(tests, "pooled-test"), tests};
}

/// FNV-1a over the raw bytes of a value sequence.
template <typename T>
std::uint64_t hash_values(const std::vector<T>& values, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (const auto& v : values) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

inline std::uint64_t hash_partition(const ClientPartition& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& rows : p.assignments) {
        h = hash_values(std::vector<std::uint64_t>{rows.size()}, h);
        h = hash_values(rows, h);
    }
    return h;
}

/// Fingerprint of what a scheme run was held fixed on.
struct RunFingerprint {
    std::string model;
    std::string scheme;
    std::uint64_t partition_hash = 0;
    std::uint64_t initial_params_hash = 0;
    std::uint64_t client_stream_seed = 0;
};

struct Phase2Result {
    SchemeReport report;
    std::vector<RunFingerprint> fingerprints;
    std::map<std::pair<std::string, std::string>, Configuration> scheme_configs;  // (model, scheme)
};

inline std::string scheme_label(const std::string& key, const std::string& task_a, const std::string& task_b) {
    if (key == kSchemeA) return task_a + "-optimized";
    if (key == kSchemeB) return task_b + "-optimized";
    return key;
}

/// Phase 2: FedAvg over a non-IID partition of the pooled data, once per
/// scheme per model. Partition, initial parameters and client streams are
/// shared by the three schemes of a model, so only the configuration varies.
inline Phase2Result run_phase2(const ExperimentConfig& cfg, const std::map<OptimumKey, ScoredOptimum>& optima,
                               CsvLedger* rounds_ledger = nullptr, CsvLedger* task_ledger = nullptr) {
    cfg.validate();
    const auto tasks = prepare_tasks(cfg);
    const auto pooled = pool_tasks(tasks);
    SeededRng part_rng(derive_seed(cfg.seed, "partition"));
    const auto partition = partition_non_iid(pooled.train, cfg.federated.clients, cfg.federated.alpha,
                                             cfg.federated.min_per_client, part_rng);
    const auto partition_hash = hash_partition(partition);

    const std::string& name_a = tasks[0].spec.name;
    const std::string& name_b = tasks[1].spec.name;

    Phase2Result result;
    for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
        const auto& kind = cfg.models[mi];
        const auto ia = optima.find({name_a, kind.name()});
        const auto ib = optima.find({name_b, kind.name()});
        if (ia == optima.end() || ib == optima.end())
            throw std::invalid_argument("run_phase2: missing optimum for model " + kind.name());

        const auto schemes = build_schemes(ia->second, ib->second);
        for (const char* key : {kSchemeA, kSchemeB, kSchemeCombined}) {
            const std::string label = scheme_label(key, name_a, name_b);
            FederatedConfig fc;
            fc.rounds = cfg.federated.rounds;
            fc.local_epochs = cfg.federated.local_epochs;
            fc.config = schemes.at(key);
            fc.model_kind = kind;
            fc.participation = cfg.federated.participation;

            const std::uint64_t fed_seed = derive_seed(cfg.seed, "federated", {mi});
            SeededRng fed_rng(fed_seed);
            const auto run = run_federated(partition, pooled.train, pooled.test, fc, fed_rng);

            if (rounds_ledger) {
                for (const auto& log : run.rounds) {
                    const auto& m = log.test_metrics;
                    rounds_ledger->append({kind.name(), label, std::to_string(log.round), format_exact(m.accuracy),
                                           format_exact(m.precision), format_exact(m.recall), format_exact(m.f1),
                                           format_exact(log.mean_client_loss())});
                }
            }
            if (task_ledger) {
                for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
                    const auto m = evaluate(run.final_params, pooled.task_tests[ti]);
                    task_ledger->append({kind.name(), label, tasks[ti].spec.name, format_exact(m.accuracy),
                                         format_exact(m.precision), format_exact(m.recall), format_exact(m.f1)});
                }
            }

            result.report.rows.push_back({kind.name(), label, run.rounds.back().test_metrics, false});
            result.fingerprints.push_back(
                {kind.name(), label, partition_hash, hash_values(run.initial.values), fed_seed});
            result.scheme_configs[{kind.name(), label}] = fc.config;
        }
    }
    result.report.finalize();
    return result;
}

/// optima.json: the per-(task, model) optima handed from phase 1 to phase 2.
inline nlohmann::json optima_to_json(const std::map<OptimumKey, ScoredOptimum>& optima) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [key, o] : optima) {
        nlohmann::json loss = std::isfinite(o.val_loss) ? nlohmann::json(o.val_loss) : nlohmann::json(nullptr);
        arr.push_back({{"task", key.first},
                       {"model", key.second},
                       {"learning_rate", o.config.learning_rate},
                       {"optimizer", std::string(to_string(o.config.optimizer))},
                       {"batch_size", o.config.batch_size},
                       {"val_loss", loss},
                       {"val_f1", o.val_f1}});
    }
    return {{"optima", arr}};
}

inline std::map<OptimumKey, ScoredOptimum> optima_from_json(const nlohmann::json& j) {
    std::map<OptimumKey, ScoredOptimum> out;
    try {
        for (const auto& e : j.at("optima")) {
            ScoredOptimum o;
            o.dataset_name = e.at("task").get<std::string>();
            o.config.learning_rate = e.at("learning_rate").get<double>();
            o.config.optimizer = parse_optimizer(e.at("optimizer").get<std::string>());
            o.config.batch_size = e.at("batch_size").get<std::size_t>();
            o.val_loss = e.at("val_loss").is_null() ? std::numeric_limits<double>::infinity()
                                                    : e.at("val_loss").get<double>();
            o.val_f1 = e.at("val_f1").get<double>();
            out[{o.dataset_name, e.at("model").get<std::string>()}] = o;
        }
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("optima.json: ") + e.what());
    }
    return out;
}

/// File names written under the output directory.
struct OutputFiles {
    static constexpr const char* trials = "hpo_trials.csv";
    static constexpr const char* optima = "optima.json";
    static constexpr const char* rounds = "fed_rounds.csv";
    static constexpr const char* task_metrics = "fed_task_metrics.csv";
    static constexpr const char* report_csv = "report.csv";
    static constexpr const char* report_md = "report.md";
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Phase 1 to disk: hpo_trials.csv and optima.json.
inline Phase1Result write_phase1(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    CsvLedger trials(dir / OutputFiles::trials, kTrialsHeader);
    auto result = run_phase1(cfg, &trials);
    write_text(dir / OutputFiles::optima, optima_to_json(result.optima).dump(2) + "\n");
    return result;
}

/// Phase 2 to disk: fed_rounds.csv, fed_task_metrics.csv, report.csv, report.md.
inline Phase2Result write_phase2(const ExperimentConfig& cfg, const std::map<OptimumKey, ScoredOptimum>& optima,
                                 const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    CsvLedger rounds(dir / OutputFiles::rounds, kRoundsHeader);
    CsvLedger task_metrics(dir / OutputFiles::task_metrics, kTaskMetricsHeader);
    auto result = run_phase2(cfg, optima, &rounds, &task_metrics);
    write_text(dir / OutputFiles::report_csv, emit_report(result.report, ReportFormat::Csv));
    write_text(dir / OutputFiles::report_md, emit_report(result.report, ReportFormat::Markdown));
    return result;
}

}  // namespace fedhpo
