#pragma once

#include <vector>

#include "excursus/rng.hpp"

namespace excursus {

// Closed loop on the uniform grid t_i = i/n: a base cycle of n values plus a
// rotation index and a subtracted level. Views never copy or re-add values,
// so composing rotations round-trips bit for bit. at(0) and at(n) are the
// seam and always equal base[rot] - offset.
struct LoopPath {
    std::vector<double> base; // n+1 entries; base[n] duplicates base[0]
    int rot = 0;
    double offset = 0.0;

    int n_steps() const { return static_cast<int>(base.size()) - 1; }
    double at(int i) const {
        int n = n_steps();
        int j = rot + i;
        while (j >= n) j -= n;
        return base[j] - offset;
    }
    std::vector<double> to_values() const;
};

// Brownian bridge on [0,1]: partial Gaussian sums minus the linear pull-down,
// so both endpoints are exactly zero.
LoopPath sample_bridge01(int n_steps, Rng& rng);

// Normalized Brownian excursion on [0,1] as the modulus of three independent
// bridges; interior values are strictly positive.
LoopPath sample_excursion01(int n_steps, Rng& rng);

// Earliest view index attaining the minimum over i in [0, n).
int loop_argmin(const LoopPath& w);
// Number of view indices tied with the minimum beyond the first.
int loop_argmin_ties(const LoopPath& w);

// Rotation at the earliest argmin: (Psi w)(t) = w(rho + t mod 1) - min w.
// Bridges map to excursions; the output vanishes exactly at the seam.
LoopPath vervaat_forward(const LoopPath& bridge);

// Inverse rotation at u (snapped to the nearest grid index):
// Phi(w, u)(t) = w(u + t mod 1) - w(u).
LoopPath vervaat_inverse(const LoopPath& excursion, double u);

} // namespace excursus
