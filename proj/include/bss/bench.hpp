#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "bss/error.hpp"
#include "bss/evaluator.hpp"
#include "bss/hsi.hpp"
#include "bss/rng.hpp"
#include "bss/surrogate.hpp"

namespace bss {

struct BenchKey {
    TaskKind task = TaskKind::Classification;
    std::string dataset_id;
    std::string backbone_id;
    BandCombination bands;

    friend bool operator==(const BenchKey& a, const BenchKey& b) {
        return a.task == b.task && a.dataset_id == b.dataset_id &&
               a.backbone_id == b.backbone_id && a.bands == b.bands;
    }
    friend bool operator<(const BenchKey& a, const BenchKey& b) {
        return std::tie(a.task, a.dataset_id, a.backbone_id, a.bands.indices) <
               std::tie(b.task, b.dataset_id, b.backbone_id, b.bands.indices);
    }

    std::string to_string() const {
        return task_kind_name(task) + "/" + dataset_id + "/" + backbone_id + "/bands=" +
               bands.to_string();
    }
};

struct BenchRecord {
    BenchKey key;
    std::map<std::uint64_t, MetricMap> per_seed;  // seed -> metric -> value
    double cost_seconds = 0.0;

    friend bool operator==(const BenchRecord& a, const BenchRecord& b) {
        return a.key == b.key && a.per_seed == b.per_seed && a.cost_seconds == b.cost_seconds;
    }
};

// The benchmark artifact: an immutable map from (task, dataset, backbone,
// band combination) to per-seed metric records. Searches query it instead of
// retraining.
struct BenchTable {
    TaskSpec task;
    std::map<BenchKey, BenchRecord> records;

    friend bool operator==(const BenchTable& a, const BenchTable& b) {
        return a.task == b.task && a.records == b.records;
    }
};

namespace detail {

inline int env_thread_cap() {
    const char* v = std::getenv("BSS_THREADS");
    if (v == nullptr) return 1;
    const int n = std::atoi(v);
    return n < 1 ? 1 : n;
}

// Static-partition parallel for. Work item i is independent and writes only
// slot i of its output, so assembly order cannot affect results.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const int threads = std::min<int>(env_thread_cap(), static_cast<int>(count ? count : 1));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = static_cast<std::size_t>(t); i < count;
                     i += static_cast<std::size_t>(threads))
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// Evaluates every (bc, seed) pair and assembles the table. Duplicate input
// combinations are a precondition violation. Evaluations may run concurrently
// (BSS_THREADS); each (bc, seed) evaluation is pure, so results do not depend
// on the schedule.
inline BenchTable build_table(const Evaluator& evaluator, const std::string& dataset_id,
                              const std::vector<BandCombination>& bcs,
                              const std::vector<std::uint64_t>& seeds) {
    if (bcs.empty()) throw std::invalid_argument("build_table: no band combinations given");
    if (seeds.empty()) throw std::invalid_argument("build_table: no seeds given");
    {
        std::set<BandCombination> dedup(bcs.begin(), bcs.end());
        if (dedup.size() != bcs.size())
            throw std::invalid_argument("build_table: duplicate band combination in input");
    }

    BenchTable table;
    table.task = evaluator.task;
    std::vector<BenchRecord> built(bcs.size());

    detail::parallel_for(bcs.size(), [&](std::size_t i) {
        const auto start = std::chrono::steady_clock::now();
        BenchRecord rec;
        rec.key = BenchKey{evaluator.task.kind, dataset_id, evaluator.backbone_id, bcs[i]};
        for (std::uint64_t seed : seeds) {
            MetricMap m;
            try {
                m = evaluator(bcs[i], seed);
            } catch (const std::exception& e) {
                throw std::runtime_error("build_table: evaluator failed on bands=" +
                                         bcs[i].to_string() + ": " + e.what());
            }
            for (const auto& [name, dir] : evaluator.task.metric_directions) {
                (void)dir;
                if (m.find(name) == m.end())
                    throw std::runtime_error("build_table: evaluator omitted metric '" + name +
                                             "' on bands=" + bcs[i].to_string());
            }
            rec.per_seed[seed] = std::move(m);
        }
        rec.cost_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        built[i] = std::move(rec);
    });

    for (auto& rec : built) {
        const BenchKey key = rec.key;
        table.records.emplace(key, std::move(rec));
    }
    return table;
}

// Seed-averaged metrics of one record (arithmetic mean per metric).
inline MetricMap query(const BenchTable& table, const BenchKey& key) {
    const auto it = table.records.find(key);
    if (it == table.records.end())
        throw not_found_error("query: no record for " + key.to_string());
    MetricMap out;
    for (const auto& [seed, metrics] : it->second.per_seed) {
        (void)seed;
        for (const auto& [name, value] : metrics) out[name] += value;
    }
    const auto n = static_cast<double>(it->second.per_seed.size());
    for (auto& [name, value] : out) {
        (void)name;
        value /= n;
    }
    return out;
}

// Resolves a record by bands alone. Requires the bands to identify exactly
// one record (true for the single-dataset single-backbone tables the CLI
// builds).
inline const BenchRecord& find_by_bands(const BenchTable& table, const BandCombination& bc) {
    const BenchRecord* found = nullptr;
    for (const auto& [key, rec] : table.records) {
        if (key.bands == bc) {
            if (found != nullptr)
                throw std::invalid_argument("find_by_bands: bands " + bc.to_string() +
                                            " are ambiguous in this table");
            found = &rec;
        }
    }
    if (found == nullptr)
        throw not_found_error("no record for bands=" + bc.to_string());
    return *found;
}

inline MetricMap query_bands(const BenchTable& table, const BandCombination& bc) {
    return query(table, find_by_bands(table, bc).key);
}

// Best combination under the metric's direction over seed-averaged values.
// Ties break toward the lexicographically smallest band sequence, which the
// map iteration order supplies for free.
inline std::pair<BandCombination, double> oracle(const BenchTable& table,
                                                 const std::string& metric) {
    if (table.records.empty()) throw std::invalid_argument("oracle: empty table");
    const MetricDirection dir = table.task.direction(metric);
    bool have = false;
    BandCombination best_bc;
    double best = worst_value(dir);
    for (const auto& [key, rec] : table.records) {
        (void)rec;
        const double v = query(table, key).at(metric);
        if (!have || improves(v, best, dir) ||
            (v == best && key.bands.indices < best_bc.indices)) {
            have = true;
            best = v;
            best_bc = key.bands;
        }
    }
    return {best_bc, best};
}

// Gap to the oracle, oriented so 0 means optimal and every value is >= 0.
inline double regret(const BenchTable& table, const BandCombination& bc,
                     const std::string& metric) {
    const double v = query_bands(table, bc).at(metric);
    const auto [best_bc, best] = oracle(table, metric);
    (void)best_bc;
    return table.task.direction(metric) == MetricDirection::HigherBetter ? best - v : v - best;
}

// All C(N, K) combinations in lexicographic order.
inline std::vector<BandCombination> enumerate_space(int num_bands, int k,
                                                    std::uint64_t cap = 2'000'000) {
    if (k < 1 || k > num_bands)
        throw std::invalid_argument("enumerate_space: need 1 <= K <= N");
    const std::uint64_t count =
        count_combinations(static_cast<std::uint64_t>(num_bands), static_cast<std::uint64_t>(k));
    if (count > cap)
        throw std::invalid_argument("enumerate_space: C(" + std::to_string(num_bands) + "," +
                                    std::to_string(k) + ")=" + std::to_string(count) +
                                    " exceeds cap " + std::to_string(cap));
    std::vector<BandCombination> out;
    out.reserve(count);
    std::vector<int> c = first_combination(k);
    do {
        out.emplace_back(c);
    } while (next_combination(c, num_bands));
    return out;
}

struct PredictAndExpandConfig {
    std::size_t initial_count = 50;   // n0; paper-scale default is 5,000
    std::size_t budget = 100;         // total; paper-scale default is 21,600
    SurrogateConfig surrogate;        // num_bands/k are filled from the space
    std::vector<std::uint64_t> eval_seeds = {0};
};

// Candidate selection for large spaces: evaluate a uniform initial sample,
// fit the surrogate on it, and expand with the combinations whose predicted
// primary metric ranks best among the remainder. Returns exactly
// cfg.budget distinct combinations, initial sample first.
inline std::vector<BandCombination> predict_and_expand(const Evaluator& evaluator,
                                                       const std::vector<BandCombination>& space,
                                                       const PredictAndExpandConfig& cfg,
                                                       std::uint64_t seed) {
    if (space.empty()) throw std::invalid_argument("predict_and_expand: empty space");
    if (cfg.initial_count > cfg.budget)
        throw std::invalid_argument("predict_and_expand: n0 exceeds budget");
    if (cfg.budget > space.size())
        throw std::invalid_argument("predict_and_expand: budget " + std::to_string(cfg.budget) +
                                    " exceeds space size " + std::to_string(space.size()));
    if (cfg.eval_seeds.empty())
        throw std::invalid_argument("predict_and_expand: no evaluation seeds");

    Rng rng(mix_seed(seed, 0xAE0ULL));
    std::vector<std::size_t> order(space.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<BandCombination> chosen;
    chosen.reserve(cfg.budget);
    std::vector<char> taken(space.size(), 0);
    for (std::size_t i = 0; i < cfg.initial_count; ++i) {
        chosen.push_back(space[order[i]]);
        taken[order[i]] = 1;
    }
    if (cfg.initial_count == cfg.budget) return chosen;

    const std::string& metric = evaluator.task.primary_metric;
    const MetricDirection dir = evaluator.task.direction(metric);

    std::vector<std::pair<BandCombination, double>> samples;
    samples.reserve(chosen.size());
    for (const auto& bc : chosen) {
        double acc = 0.0;
        for (std::uint64_t s : cfg.eval_seeds) acc += evaluator(bc, s).at(metric);
        samples.emplace_back(bc, acc / static_cast<double>(cfg.eval_seeds.size()));
    }

    SurrogateConfig scfg = cfg.surrogate;
    int max_band = 0;
    for (const auto& bc : space) max_band = std::max(max_band, bc.indices.back());
    scfg.num_bands = cfg.surrogate.num_bands > 0 ? cfg.surrogate.num_bands : max_band + 1;
    scfg.k = space.front().k();
    const SurrogateModel model = fit(samples, scfg);

    // Rank the remainder by prediction; direction-aware, ties lexicographic.
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(space.size() - cfg.initial_count);
    for (std::size_t i = 0; i < space.size(); ++i) {
        if (taken[i]) continue;
        ranked.emplace_back(predict(model, space[i], scfg.num_bands, scfg.cube.get()), i);
    }
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first)
            return dir == MetricDirection::HigherBetter ? a.first > b.first : a.first < b.first;
        return space[a.second].indices < space[b.second].indices;
    });
    for (std::size_t i = 0; i < cfg.budget - cfg.initial_count; ++i)
        chosen.push_back(space[ranked[i].second]);
    return chosen;
}

// Jaccard index of the two tables' top-frac band sets (each under its own
// records for the given metric). Set size is floor(frac * record count).
inline double top_overlap(const BenchTable& a, const BenchTable& b, const std::string& metric,
                          double frac) {
    if (frac < 0.0 || frac > 1.0)
        throw std::invalid_argument("top_overlap: frac must be in [0, 1]");

    const auto top_set = [&](const BenchTable& t) {
        const MetricDirection dir = t.task.direction(metric);
        std::vector<std::pair<double, const BandCombination*>> vals;
        vals.reserve(t.records.size());
        for (const auto& [key, rec] : t.records) {
            (void)rec;
            vals.emplace_back(query(t, key).at(metric), &key.bands);
        }
        std::sort(vals.begin(), vals.end(), [&](const auto& x, const auto& y) {
            if (x.first != y.first)
                return dir == MetricDirection::HigherBetter ? x.first > y.first
                                                            : x.first < y.first;
            return x.second->indices < y.second->indices;
        });
        const std::size_t n = static_cast<std::size_t>(frac * static_cast<double>(vals.size()));
        std::set<BandCombination> out;
        for (std::size_t i = 0; i < n && i < vals.size(); ++i) out.insert(*vals[i].second);
        return out;
    };

    std::set<BandCombination> universe_a, universe_b;
    for (const auto& [key, rec] : a.records) {
        (void)rec;
        universe_a.insert(key.bands);
    }
    for (const auto& [key, rec] : b.records) {
        (void)rec;
        universe_b.insert(key.bands);
    }
    std::vector<BandCombination> common;
    std::set_intersection(universe_a.begin(), universe_a.end(), universe_b.begin(),
                          universe_b.end(), std::back_inserter(common));
    if (common.empty())
        throw std::invalid_argument("top_overlap: tables have disjoint band universes");

    const auto ta = top_set(a);
    const auto tb = top_set(b);
    std::vector<BandCombination> inter, uni;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(inter));
    std::set_union(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(uni));
    if (uni.empty()) return 1.0;  // both top sets empty: trivially identical
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

namespace detail {

// Mean ranks (1-based) with ties sharing the average rank of their block.
inline std::vector<double> mean_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 && syy == 0.0) return 1.0;  // both constant: trivially consistent
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Spearman rank correlation of the seed-averaged metric between two tables
// over the same band combinations.
inline double rank_correlation(const BenchTable& a, const BenchTable& b,
                               const std::string& metric) {
    std::map<BandCombination, double> va, vb;
    for (const auto& [key, rec] : a.records) {
        (void)rec;
        va[key.bands] = query(a, key).at(metric);
    }
    for (const auto& [key, rec] : b.records) {
        (void)rec;
        vb[key.bands] = query(b, key).at(metric);
    }
    if (va.size() != vb.size() ||
        !std::equal(va.begin(), va.end(), vb.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; })) {
        std::string diff;
        int shown = 0;
        for (const auto& [bands, v] : va) {
            (void)v;
            if (vb.find(bands) == vb.end() && shown < 5) {
                diff += " -" + bands.to_string();
                ++shown;
            }
        }
        for (const auto& [bands, v] : vb) {
            (void)v;
            if (va.find(bands) == va.end() && shown < 10) {
                diff += " +" + bands.to_string();
                ++shown;
            }
        }
        throw std::invalid_argument("rank_correlation: key sets differ:" + diff);
    }
    if (va.size() < 2)
        throw std::invalid_argument("rank_correlation: need at least 2 shared records");

    std::vector<double> xa, xb;
    xa.reserve(va.size());
    xb.reserve(vb.size());
    for (const auto& [bands, v] : va) {
        xa.push_back(v);
        xb.push_back(vb.at(bands));
    }
    return detail::pearson(detail::mean_ranks(xa), detail::mean_ranks(xb));
}

// ---------------------------------------------------------------------------
// Table file: one JSON object per line with exactly the fields task,
// dataset_id, backbone_id, bands, seeds, cost_seconds. Unknown fields are
// rejected. Line order does not matter.
// ---------------------------------------------------------------------------

inline void save_table(const BenchTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    for (const auto& [key, rec] : table.records) {
        nlohmann::ordered_json j;
        j["task"] = task_kind_name(key.task);
        j["dataset_id"] = key.dataset_id;
        j["backbone_id"] = key.backbone_id;
        j["bands"] = key.bands.indices;
        nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
        for (const auto& [seed, metrics] : rec.per_seed) {
            nlohmann::ordered_json m = nlohmann::ordered_json::object();
            for (const auto& [name, value] : metrics) m[name] = value;
            seeds[std::to_string(seed)] = std::move(m);
        }
        j["seeds"] = std::move(seeds);
        j["cost_seconds"] = rec.cost_seconds;
        out << j.dump() << '\n';
    }
    out.flush();
    if (!out) throw io_error("write failure on '" + path + "'");
}

inline BenchTable load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "' for reading");

    BenchTable table;
    bool task_set = false;
    std::string line;
    std::size_t line_no = 0;
    static const std::set<std::string> allowed = {"task",  "dataset_id",   "backbone_id",
                                                  "bands", "seeds",        "cost_seconds"};
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw format_error("table line " + std::to_string(line_no) + ": " + e.what(), 0);
        }
        if (!j.is_object())
            throw format_error("table line " + std::to_string(line_no) + ": not an object", 0);
        for (const auto& [field, value] : j.items()) {
            (void)value;
            if (allowed.find(field) == allowed.end())
                throw format_error("table line " + std::to_string(line_no) +
                                       ": unknown field '" + field + "'",
                                   0);
        }
        for (const char* field : {"task", "dataset_id", "backbone_id", "bands", "seeds",
                                  "cost_seconds"}) {
            if (!j.contains(field))
                throw format_error("table line " + std::to_string(line_no) +
                                       ": missing field '" + std::string(field) + "'",
                                   0);
        }

        BenchRecord rec;
        rec.key.task = parse_task_kind(j.at("task").get<std::string>());
        rec.key.dataset_id = j.at("dataset_id").get<std::string>();
        rec.key.backbone_id = j.at("backbone_id").get<std::string>();
        rec.key.bands = BandCombination(j.at("bands").get<std::vector<int>>());
        rec.cost_seconds = j.at("cost_seconds").get<double>();

        const TaskSpec spec = TaskSpec::for_kind(rec.key.task);
        if (!task_set) {
            table.task = spec;
            task_set = true;
        } else if (!(table.task == spec)) {
            throw format_error("table line " + std::to_string(line_no) + ": mixed task kinds", 0);
        }

        const auto& seeds = j.at("seeds");
        if (!seeds.is_object() || seeds.empty())
            throw format_error("table line " + std::to_string(line_no) +
                                   ": 'seeds' must be a non-empty object",
                               0);
        for (const auto& [seed_str, metrics] : seeds.items()) {
            std::uint64_t seed = 0;
            try {
                seed = std::stoull(seed_str);
            } catch (const std::exception&) {
                throw format_error("table line " + std::to_string(line_no) + ": bad seed '" +
                                       seed_str + "'",
                                   0);
            }
            MetricMap m;
            for (const auto& [name, value] : metrics.items()) {
                if (!table.task.has_metric(name))
                    throw format_error("table line " + std::to_string(line_no) +
                                           ": metric '" + name + "' not part of task",
                                       0);
                m[name] = value.get<double>();
            }
            for (const auto& [name, dir] : table.task.metric_directions) {
                (void)dir;
                if (m.find(name) == m.end())
                    throw format_error("table line " + std::to_string(line_no) +
                                           ": missing metric '" + name + "'",
                                       0);
            }
            rec.per_seed[seed] = std::move(m);
        }

        const BenchKey key = rec.key;
        if (!table.records.emplace(key, std::move(rec)).second)
            throw format_error("table line " + std::to_string(line_no) + ": duplicate key " +
                                   key.to_string(),
                               0);
    }
    if (in.bad()) throw io_error("read failure on '" + path + "'");
    if (table.records.empty()) throw format_error("empty table file", 0);
    return table;
}

// Table-backed evaluator: returns seed-averaged metrics for any requested
// seed (queries aggregate by mean; per-seed values stay available on the
// records themselves).
inline Evaluator make_table_evaluator(std::shared_ptr<const BenchTable> table) {
    Evaluator ev;
    ev.task = table->task;
    ev.backbone_id = table->records.empty() ? std::string("table")
                                            : table->records.begin()->first.backbone_id;
    ev.eval = [table](const BandCombination& bc, std::uint64_t) -> MetricMap {
        return query_bands(*table, bc);
    };
    return ev;
}

}  // namespace bss
