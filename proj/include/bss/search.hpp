#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bss/bench.hpp"
#include "bss/evaluator.hpp"
#include "bss/hsi.hpp"
#include "bss/rng.hpp"
#include "bss/stats.hpp"
#include "bss/surrogate.hpp"

namespace bss {

// The space A of candidate combinations: implicit C(N, K) over all bands, or
// an explicit candidate list.
struct SearchSpace {
    int num_bands = 0;
    int k = 0;
    std::vector<BandCombination> candidates;  // empty = implicit full space
    std::uint64_t exhaustive_cap = 2'000'000;

    std::uint64_t size() const {
        if (!candidates.empty()) return candidates.size();
        return count_combinations(static_cast<std::uint64_t>(num_bands),
                                  static_cast<std::uint64_t>(k));
    }

    void validate() const {
        if (candidates.empty()) {
            if (k < 1 || k > num_bands)
                throw std::invalid_argument("SearchSpace: need 1 <= K <= N");
        } else {
            for (const auto& bc : candidates) bc.validate(num_bands);
        }
    }
};

struct SearchResult {
    BandCombination best;
    double best_score = 0.0;
    std::uint64_t evaluations = 0;  // unique evaluator calls (memoized revisits are free)
    double wall_seconds = 0.0;      // in-memory only; result files never include it
    std::vector<std::pair<BandCombination, double>> trace;  // unique evaluations in call order
};

namespace detail {

// Memoizing scalar scorer over an Evaluator. Scores are the mean of the
// chosen metric across eval_seeds; repeated combinations are served from the
// memo and do not count as evaluations.
class ScoreContext {
public:
    ScoreContext(const Evaluator& ev, std::string metric, std::vector<std::uint64_t> eval_seeds)
        : ev_(&ev),
          metric_(std::move(metric)),
          dir_(ev.task.direction(metric_)),
          eval_seeds_(std::move(eval_seeds)) {
        if (eval_seeds_.empty())
            throw std::invalid_argument("search: need at least one evaluation seed");
        start_ = std::chrono::steady_clock::now();
    }

    double score(const BandCombination& bc) {
        const auto it = memo_.find(bc);
        if (it != memo_.end()) return it->second;
        double acc = 0.0;
        for (std::uint64_t s : eval_seeds_) acc += (*ev_)(bc, s).at(metric_);
        const double v = acc / static_cast<double>(eval_seeds_.size());
        memo_.emplace(bc, v);
        trace_.emplace_back(bc, v);
        return v;
    }

    bool seen(const BandCombination& bc) const { return memo_.count(bc) != 0; }
    MetricDirection direction() const { return dir_; }

    // Argbest over everything evaluated so far; ties break lexicographically.
    SearchResult finish() const {
        if (trace_.empty()) throw std::invalid_argument("search: nothing was evaluated");
        SearchResult r;
        r.trace = trace_;
        r.evaluations = trace_.size();
        bool have = false;
        for (const auto& [bc, v] : trace_) {
            if (!have || improves(v, r.best_score, dir_) ||
                (v == r.best_score && bc.indices < r.best.indices)) {
                have = true;
                r.best = bc;
                r.best_score = v;
            }
        }
        r.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        return r;
    }

private:
    const Evaluator* ev_;
    std::string metric_;
    MetricDirection dir_;
    std::vector<std::uint64_t> eval_seeds_;
    std::map<BandCombination, double> memo_;
    std::vector<std::pair<BandCombination, double>> trace_;
    std::chrono::steady_clock::time_point start_;
};

// Stream of distinct uniform samples from the space. Draw M2 > M1 samples
// with the same seed and the first M1 agree, which is what gives random
// search its monotone-in-M property.
class SampleStream {
public:
    SampleStream(const SearchSpace& space, std::uint64_t seed)
        : space_(&space), rng_(mix_seed(seed, 0x5a3eULL)) {
        if (!space.candidates.empty()) {
            order_.resize(space.candidates.size());
            for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
            rng_.shuffle(order_);
        }
    }

    BandCombination next() {
        if (!space_->candidates.empty()) {
            if (pos_ >= order_.size())
                throw std::invalid_argument("sample stream exhausted the candidate list");
            return space_->candidates[order_[pos_++]];
        }
        for (;;) {
            BandCombination bc(rng_.sample_without_replacement(space_->num_bands, space_->k));
            if (seen_.insert(bc).second) return bc;
        }
    }

private:
    const SearchSpace* space_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    std::set<BandCombination> seen_;
};

inline std::vector<BandCombination> all_candidates(const SearchSpace& space) {
    if (!space.candidates.empty()) return space.candidates;
    return enumerate_space(space.num_bands, space.k, space.exhaustive_cap);
}

}  // namespace detail

// Evaluates every combination in the space once. The true argbest, usable
// whenever C(N, K) fits under the cap.
inline SearchResult exhaustive(const Evaluator& evaluator, const SearchSpace& space,
                               const std::string& metric,
                               const std::vector<std::uint64_t>& eval_seeds = {0}) {
    space.validate();
    if (space.candidates.empty() && space.size() > space.exhaustive_cap)
        throw std::invalid_argument("exhaustive: space size " + std::to_string(space.size()) +
                                    " exceeds cap " + std::to_string(space.exhaustive_cap));
    detail::ScoreContext ctx(evaluator, metric, eval_seeds);
    for (const auto& bc : detail::all_candidates(space)) ctx.score(bc);
    return ctx.finish();
}

// M distinct uniform samples (whole space when M >= |space|), best wins.
inline SearchResult random_search(const Evaluator& evaluator, const SearchSpace& space,
                                  std::uint64_t m, const std::string& metric, std::uint64_t seed,
                                  const std::vector<std::uint64_t>& eval_seeds = {0}) {
    space.validate();
    if (m < 1) throw std::invalid_argument("random_search: M must be >= 1");
    m = std::min<std::uint64_t>(m, space.size());
    detail::ScoreContext ctx(evaluator, metric, eval_seeds);
    detail::SampleStream stream(space, seed);
    for (std::uint64_t i = 0; i < m; ++i) ctx.score(stream.next());
    return ctx.finish();
}

// Sequential floating forward selection. Evaluators only accept size-K
// combinations, so a partial subset of size k < K is scored by the mean over
// a fixed number of seeded random completions to size K (the documented
// deviation from classical SFFS). Deterministic: the completion RNG is keyed
// on the subset itself.
inline SearchResult sffs(const Evaluator& evaluator, const SearchSpace& space,
                         const std::string& metric,
                         const std::vector<std::uint64_t>& eval_seeds = {0},
                         int completions = 8) {
    space.validate();
    if (!space.candidates.empty())
        throw std::invalid_argument("sffs: explicit candidate lists are not supported");
    const int n = space.num_bands;
    const int target_k = space.k;

    detail::ScoreContext ctx(evaluator, metric, eval_seeds);
    const MetricDirection dir = ctx.direction();

    // Score of a (possibly partial) sorted subset.
    const auto subset_score = [&](const std::vector<int>& subset) -> double {
        const int k = static_cast<int>(subset.size());
        if (k == target_k) return ctx.score(BandCombination(subset));
        std::vector<int> complement;
        complement.reserve(static_cast<std::size_t>(n - k));
        std::set<int> in(subset.begin(), subset.end());
        for (int b = 0; b < n; ++b)
            if (in.find(b) == in.end()) complement.push_back(b);
        Rng rng(mix_seed(0x5FF5ULL, hash_bands(BandCombination(subset))));
        double acc = 0.0;
        for (int c = 0; c < completions; ++c) {
            std::vector<int> pick =
                rng.sample_without_replacement(static_cast<int>(complement.size()), target_k - k);
            std::vector<int> full = subset;
            for (int p : pick) full.push_back(complement[static_cast<std::size_t>(p)]);
            std::sort(full.begin(), full.end());
            acc += ctx.score(BandCombination(full));
        }
        return acc / static_cast<double>(completions);
    };

    std::vector<int> current;  // sorted
    std::map<int, std::pair<double, std::vector<int>>> best_at_size;

    while (static_cast<int>(current.size()) < target_k) {
        // Forward: add the single band whose inclusion scores best.
        double best_v = worst_value(dir);
        int best_b = -1;
        std::vector<int> best_subset;
        for (int b = 0; b < n; ++b) {
            if (std::binary_search(current.begin(), current.end(), b)) continue;
            std::vector<int> cand = current;
            cand.insert(std::lower_bound(cand.begin(), cand.end(), b), b);
            const double v = subset_score(cand);
            if (best_b < 0 || improves(v, best_v, dir) ||
                (v == best_v && cand < best_subset)) {
                best_v = v;
                best_b = b;
                best_subset = std::move(cand);
            }
        }
        current = best_subset;
        const int k = static_cast<int>(current.size());
        const int just_added = best_b;
        auto rec = best_at_size.find(k);
        if (rec == best_at_size.end() || improves(best_v, rec->second.first, dir))
            best_at_size[k] = {best_v, current};

        // Floating backward: drop a band (never the one just added) while the
        // reduced set strictly improves the recorded best at its size.
        bool removed = true;
        while (removed && static_cast<int>(current.size()) > 2) {
            removed = false;
            const int size_now = static_cast<int>(current.size());
            double best_drop_v = worst_value(dir);
            int best_drop = -1;
            std::vector<int> best_drop_subset;
            for (int b : current) {
                if (b == just_added && size_now == k) continue;
                std::vector<int> cand;
                cand.reserve(current.size() - 1);
                for (int x : current)
                    if (x != b) cand.push_back(x);
                const double v = subset_score(cand);
                if (best_drop < 0 || improves(v, best_drop_v, dir) ||
                    (v == best_drop_v && cand < best_drop_subset)) {
                    best_drop_v = v;
                    best_drop = b;
                    best_drop_subset = std::move(cand);
                }
            }
            auto prev = best_at_size.find(size_now - 1);
            if (best_drop >= 0 && prev != best_at_size.end() &&
                improves(best_drop_v, prev->second.first, dir)) {
                current = best_drop_subset;
                best_at_size[size_now - 1] = {best_drop_v, current};
                removed = true;
            }
        }
    }
    return ctx.finish();
}

struct GeneticConfig {
    int population = 20;
    int generations = 20;
    int tournament = 3;
    double mutation_rate = 0.2;
};

// Generational GA on band sets: tournament selection, union-sampling
// crossover, single-band mutation, elitism of 1. Repeated combinations are
// memoized, so unique evaluations stay within P*(G+1).
inline SearchResult genetic(const Evaluator& evaluator, const SearchSpace& space,
                            const GeneticConfig& cfg, const std::string& metric,
                            std::uint64_t seed,
                            const std::vector<std::uint64_t>& eval_seeds = {0}) {
    space.validate();
    if (!space.candidates.empty())
        throw std::invalid_argument("genetic: explicit candidate lists are not supported");
    if (cfg.population < 2) throw std::invalid_argument("genetic: population must be >= 2");
    if (cfg.generations < 0) throw std::invalid_argument("genetic: generations must be >= 0");
    if (cfg.tournament < 1) throw std::invalid_argument("genetic: tournament size must be >= 1");
    if (cfg.mutation_rate < 0.0 || cfg.mutation_rate > 1.0)
        throw std::invalid_argument("genetic: mutation rate must be in [0, 1]");

    const int n = space.num_bands;
    const int k = space.k;
    detail::ScoreContext ctx(evaluator, metric, eval_seeds);
    const MetricDirection dir = ctx.direction();
    Rng rng(mix_seed(seed, 0x6e7ULL));

    std::vector<BandCombination> pop;
    pop.reserve(static_cast<std::size_t>(cfg.population));
    for (int i = 0; i < cfg.population; ++i)
        pop.emplace_back(rng.sample_without_replacement(n, k));
    std::vector<double> fitness(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) fitness[i] = ctx.score(pop[i]);

    const auto better = [&](std::size_t a, std::size_t b) {
        if (fitness[a] != fitness[b]) return improves(fitness[a], fitness[b], dir);
        return pop[a].indices < pop[b].indices;
    };

    for (int g = 0; g < cfg.generations; ++g) {
        std::size_t elite = 0;
        for (std::size_t i = 1; i < pop.size(); ++i)
            if (better(i, elite)) elite = i;

        std::vector<BandCombination> next;
        next.reserve(pop.size());
        next.push_back(pop[elite]);
        while (next.size() < pop.size()) {
            const auto pick_parent = [&]() -> const BandCombination& {
                std::size_t best = static_cast<std::size_t>(rng.uniform_u64(pop.size()));
                for (int t = 1; t < cfg.tournament; ++t) {
                    const std::size_t c = static_cast<std::size_t>(rng.uniform_u64(pop.size()));
                    if (better(c, best)) best = c;
                }
                return pop[best];
            };
            const BandCombination& pa = pick_parent();
            const BandCombination& pb = pick_parent();

            std::set<int> union_set(pa.indices.begin(), pa.indices.end());
            union_set.insert(pb.indices.begin(), pb.indices.end());
            std::vector<int> pool(union_set.begin(), union_set.end());
            std::vector<int> child_idx = rng.sample_without_replacement(
                static_cast<int>(pool.size()), k);
            std::vector<int> child;
            child.reserve(static_cast<std::size_t>(k));
            for (int i : child_idx) child.push_back(pool[static_cast<std::size_t>(i)]);
            std::sort(child.begin(), child.end());

            if (rng.uniform_double() < cfg.mutation_rate) {
                std::vector<int> outside;
                outside.reserve(static_cast<std::size_t>(n - k));
                std::set<int> in(child.begin(), child.end());
                for (int b = 0; b < n; ++b)
                    if (in.find(b) == in.end()) outside.push_back(b);
                if (!outside.empty()) {
                    const std::size_t drop = static_cast<std::size_t>(
                        rng.uniform_u64(child.size()));
                    child[drop] = outside[static_cast<std::size_t>(
                        rng.uniform_u64(outside.size()))];
                    std::sort(child.begin(), child.end());
                }
            }
            next.emplace_back(std::move(child));
        }
        pop = std::move(next);
        for (std::size_t i = 0; i < pop.size(); ++i) fitness[i] = ctx.score(pop[i]);
    }
    return ctx.finish();
}

struct PredictorSearchConfig {
    std::size_t n_train = 100;
    std::size_t n_rank = 100000;  // candidates to rank (clamped to the remainder)
    std::size_t top_t = 20;
    SurrogateConfig surrogate;
    // Optional replacement for the fitted surrogate's prediction (any
    // predictor can drive the ranking step).
    std::function<double(const BandCombination&)> predictor_fn;
};

// Predictor baseline: truly evaluate a random training sample, fit the
// surrogate on it, rank unseen candidates by prediction, truly evaluate the
// top_t, and return the best combination actually evaluated.
inline SearchResult predictor_search(const Evaluator& evaluator, const SearchSpace& space,
                                     const PredictorSearchConfig& cfg, const std::string& metric,
                                     std::uint64_t seed,
                                     const std::vector<std::uint64_t>& eval_seeds = {0}) {
    space.validate();
    if (cfg.n_train < 2) throw std::invalid_argument("predictor_search: n_train must be >= 2");
    if (cfg.n_train + cfg.top_t > space.size())
        throw std::invalid_argument("predictor_search: n_train + top_T exceeds the space size");

    detail::ScoreContext ctx(evaluator, metric, eval_seeds);
    const MetricDirection dir = ctx.direction();
    detail::SampleStream stream(space, seed);

    std::vector<std::pair<BandCombination, double>> train;
    train.reserve(cfg.n_train);
    for (std::size_t i = 0; i < cfg.n_train; ++i) {
        BandCombination bc = stream.next();
        train.emplace_back(bc, ctx.score(bc));
    }
    if (cfg.top_t == 0) return ctx.finish();

    std::function<double(const BandCombination&)> predict_fn = cfg.predictor_fn;
    if (!predict_fn) {
        SurrogateConfig scfg = cfg.surrogate;
        if (scfg.num_bands == 0) scfg.num_bands = space.num_bands;
        if (scfg.k == 0) scfg.k = space.k > 0 ? space.k : train.front().first.k();
        const SurrogateModel model = fit(train, scfg);
        const int nb = scfg.num_bands;
        auto cube = scfg.cube;
        predict_fn = [model, nb, cube](const BandCombination& bc) {
            return predict(model, bc, nb, cube.get());
        };
    }

    // Rank unseen candidates by prediction.
    std::vector<BandCombination> pool;
    for (const auto& bc : detail::all_candidates(space))
        if (!ctx.seen(bc)) pool.push_back(bc);
    if (pool.size() > cfg.n_rank) {
        // Deterministic uniform thinning of the ranking pool.
        Rng rng(mix_seed(seed, 0xAA17ULL));
        std::vector<std::size_t> order(pool.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        order.resize(cfg.n_rank);
        std::sort(order.begin(), order.end());
        std::vector<BandCombination> thinned;
        thinned.reserve(cfg.n_rank);
        for (std::size_t i : order) thinned.push_back(pool[i]);
        pool = std::move(thinned);
    }

    std::vector<std::pair<double, const BandCombination*>> ranked;
    ranked.reserve(pool.size());
    for (const auto& bc : pool) ranked.emplace_back(predict_fn(bc), &bc);
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first)
            return dir == MetricDirection::HigherBetter ? a.first > b.first : a.first < b.first;
        return a.second->indices < b.second->indices;
    });
    for (std::size_t i = 0; i < cfg.top_t && i < ranked.size(); ++i) ctx.score(*ranked[i].second);
    return ctx.finish();
}

// Unsupervised-statistics ranking: order the space by a blend of normalized
// BC entropy and BC SAM (higher is better for both), then truly evaluate the
// top M.
inline SearchResult stats_ranked_search(const Evaluator& evaluator, const HsiCube& cube,
                                        const SearchSpace& space, std::uint64_t m,
                                        const std::string& metric, double alpha,
                                        const std::vector<std::uint64_t>& eval_seeds = {0}) {
    space.validate();
    if (m < 1) throw std::invalid_argument("stats_ranked_search: M must be >= 1");
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("stats_ranked_search: alpha must be in [0, 1]");

    const auto candidates = detail::all_candidates(space);
    std::vector<double> ent(candidates.size()), angle(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        ent[i] = bc_entropy(cube, candidates[i]);
        angle[i] = candidates[i].k() >= 2 ? bc_sam(cube, candidates[i]) : 0.0;
    }
    const auto normalize = [](std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double span = *hi - *lo;
        if (span == 0.0) {
            std::fill(v.begin(), v.end(), 0.5);
            return;
        }
        for (double& x : v) x = (x - *lo) / span;
    };
    normalize(ent);
    normalize(angle);

    std::vector<std::pair<double, std::size_t>> ranked(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        ranked[i] = {alpha * ent[i] + (1.0 - alpha) * angle[i], i};
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return candidates[a.second].indices < candidates[b.second].indices;
    });

    detail::ScoreContext ctx(evaluator, metric, eval_seeds);
    const std::uint64_t take = std::min<std::uint64_t>(m, candidates.size());
    for (std::uint64_t i = 0; i < take; ++i) ctx.score(candidates[ranked[i].second]);
    return ctx.finish();
}

}  // namespace bss
