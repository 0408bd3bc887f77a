#include "excursus/vervaat.hpp"

#include <cmath>
#include <stdexcept>

namespace excursus {

std::vector<double> LoopPath::to_values() const {
    int n = n_steps();
    std::vector<double> out(n + 1);
    for (int i = 0; i <= n; ++i) out[i] = at(i);
    return out;
}

LoopPath sample_bridge01(int n_steps, Rng& rng) {
    if (n_steps < 2) throw std::invalid_argument("bridge needs n_steps >= 2");
    LoopPath w;
    w.base.resize(n_steps + 1);
    double sd = 1.0 / std::sqrt(static_cast<double>(n_steps));
    double s = 0.0;
    w.base[0] = 0.0;
    for (int i = 1; i <= n_steps; ++i) {
        s += sd * rng.normal();
        w.base[i] = s;
    }
    double wn = w.base[n_steps];
    for (int i = 1; i < n_steps; ++i)
        w.base[i] -= (static_cast<double>(i) / n_steps) * wn;
    w.base[n_steps] = 0.0;
    return w;
}

LoopPath sample_excursion01(int n_steps, Rng& rng) {
    LoopPath b1 = sample_bridge01(n_steps, rng);
    LoopPath b2 = sample_bridge01(n_steps, rng);
    LoopPath b3 = sample_bridge01(n_steps, rng);
    LoopPath e;
    e.base.resize(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) {
        double x = b1.base[i], y = b2.base[i], z = b3.base[i];
        e.base[i] = std::sqrt(x * x + y * y + z * z);
    }
    e.base[0] = 0.0;
    e.base[n_steps] = 0.0;
    return e;
}

int loop_argmin(const LoopPath& w) {
    int n = w.n_steps();
    int best = 0;
    double bv = w.at(0);
    for (int i = 1; i < n; ++i) {
        double v = w.at(i);
        if (v < bv) {
            bv = v;
            best = i;
        }
    }
    return best;
}

int loop_argmin_ties(const LoopPath& w) {
    int n = w.n_steps();
    double bv = w.at(loop_argmin(w));
    int ties = -1;
    for (int i = 0; i < n; ++i)
        if (w.at(i) == bv) ++ties;
    return ties;
}

namespace {

// Rotate the view so index i becomes the seam; the offset is re-read from
// the base array, which is what makes forward-after-inverse exact.
LoopPath rotate_to(const LoopPath& w, int i) {
    int n = w.n_steps();
    int j = w.rot + i;
    while (j >= n) j -= n;
    LoopPath out;
    out.base = w.base;
    out.rot = j;
    out.offset = out.base[j];
    return out;
}

} // namespace

LoopPath vervaat_forward(const LoopPath& bridge) {
    return rotate_to(bridge, loop_argmin(bridge));
}

LoopPath vervaat_inverse(const LoopPath& excursion, double u) {
    int n = excursion.n_steps();
    if (!(u >= 0.0) || !(u < 1.0 + 0.5 / n))
        throw std::invalid_argument("vervaat_inverse: u must lie in [0,1)");
    int i = static_cast<int>(std::lround(u * n)) % n;
    return rotate_to(excursion, i);
}

} // namespace excursus
