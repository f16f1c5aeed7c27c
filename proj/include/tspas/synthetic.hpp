#pragma once

// Toy selection corpus: clustered instances on which LKH is fast and
// uniform instances on which EAX is fast, with the slower solver about
// 100x worse in PAR10. Used by the CLI `generate` command and the tests.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "tspas/instance.hpp"
#include "tspas/parallel.hpp"
#include "tspas/scoring.hpp"

namespace tspas {

struct SyntheticConfig {
    std::size_t n_instances = 200;
    std::size_t nodes = 200;
    std::size_t k_clusters = 4;
    double spread = 0.02;
    std::size_t runs = 5;
    double cutoff = kDefaultCutoff;
    double slowdown = 100.0;
    std::uint64_t seed = 1;
};

struct SyntheticCorpus {
    std::vector<Instance> instances;
    std::vector<PerformanceRecord> records;
    std::vector<bool> clustered;
};

/// Even indices are clustered (LKH-easy), odd indices uniform (EAX-easy).
/// The easy solver's runs take U[5, 15] seconds; the other solver's runs
/// take `slowdown` times an independent U[5, 15] draw, unsolved if that
/// exceeds the cutoff.
inline SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg) {
    if (cfg.n_instances < 2) throw std::invalid_argument("synthetic corpus needs at least 2 instances");
    if (cfg.runs == 0) throw std::invalid_argument("synthetic corpus needs at least 1 run");
    SyntheticCorpus corpus;
    for (std::size_t i = 0; i < cfg.n_instances; ++i) {
        const std::uint64_t s = derive_seed(cfg.seed, i);
        const bool clustered = i % 2 == 0;
        Instance inst = clustered ? generate_clustered(cfg.nodes, cfg.k_clusters, cfg.spread, s)
                                  : generate_rue(cfg.nodes, s);
        char id[32];
        std::snprintf(id, sizeof id, "toy_%04zu", i);
        inst.id = id;

        std::mt19937_64 rng(derive_seed(s, 0xC0FFEE));
        std::uniform_real_distribution<double> base(5.0, 15.0);
        const Solver easy = clustered ? Solver::LKH : Solver::EAX;
        for (auto solver : kSolvers) {
            PerformanceRecord rec{inst.id, solver, {}, cfg.cutoff};
            for (std::size_t r = 0; r < cfg.runs; ++r) {
                double t = base(rng);
                if (solver != easy) t *= cfg.slowdown;
                rec.runs.push_back(t < cfg.cutoff ? Run{t, true} : Run{cfg.cutoff, false});
            }
            corpus.records.push_back(std::move(rec));
        }
        corpus.instances.push_back(std::move(inst));
        corpus.clustered.push_back(clustered);
    }
    return corpus;
}

}  // namespace tspas
