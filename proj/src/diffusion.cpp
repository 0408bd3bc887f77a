#include "excursus/diffusion.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace excursus {

const char* to_string(BoundaryClass c) {
    switch (c) {
        case BoundaryClass::natural: return "natural";
        case BoundaryClass::entrance: return "entrance";
        case BoundaryClass::exit: return "exit";
        case BoundaryClass::regular_absorbing: return "regular-absorbing";
        case BoundaryClass::regular: return "regular";
    }
    return "?";
}

namespace {

void tabulate(DiffusionSpec& spec) {
    spec.s_tab = spec.window.map(spec.scale);
    spec.s_deriv_tab = spec.window.map(spec.scale_deriv);
    spec.m_density_tab = spec.window.map(spec.speed_density);
    spec.kill_tab = spec.window.map(spec.kill);
    for (int i = 0; i <= spec.window.n; ++i) {
        if (!(spec.s_deriv_tab[i] > 0.0) || !std::isfinite(spec.s_deriv_tab[i]))
            throw std::domain_error("spec: s' must be positive and finite on the window");
        if (!(spec.m_density_tab[i] > 0.0) || !std::isfinite(spec.m_density_tab[i]))
            throw std::domain_error("spec: m' must be positive and finite on the window");
        if (spec.kill_tab[i] < 0.0)
            throw std::domain_error("spec: kill rate must be nonnegative");
    }
}

Real1D constant(double v) {
    return [v](double) { return v; };
}

} // namespace

DiffusionSpec build_spec_sde(Real1D b, Real1D sigma, Real1D kill,
                             Interval interval, Grid window,
                             std::optional<double> x0) {
    DiffusionSpec spec;
    spec.interval = interval;
    spec.window = window;
    spec.x0 = x0.value_or(0.5 * (window.lo + window.hi));
    spec.drift = b;
    spec.sigma = sigma;
    spec.kill = kill ? kill : constant(0.0);
    spec.kill_is_const = false;

    // log s'(x) = -int_{x0}^x 2 b / sigma^2; tabulate by cumulative Simpson
    // and keep callables that fall back to adaptive quadrature off-window.
    Grid g = window;
    ArrayXd ratio(g.n + 1);
    for (int i = 0; i <= g.n; ++i) {
        double x = g.point(i);
        double s2 = sigma(x) * sigma(x);
        if (!(s2 > 0.0))
            throw std::domain_error("spec: sigma must be positive on the window");
        ratio[i] = 2.0 * b(x) / s2;
    }
    ArrayXd cum = cumulative_integral(g, ratio);
    double at_x0;
    {
        TabulatedFunction t{g, cum, ratio};
        at_x0 = t(spec.x0);
    }
    auto logsp = std::make_shared<TabulatedFunction>();
    logsp->grid = g;
    logsp->values = -(cum - at_x0);
    logsp->derivs = -ratio;

    Real1D b_cb = b, sig_cb = sigma;
    spec.scale_deriv = [logsp, g, b_cb, sig_cb](double x) {
        if (g.contains(x)) return std::exp((*logsp)(x));
        // off-window: extend the exponent by adaptive quadrature
        double edge = x < g.lo ? g.lo : g.hi;
        double base = (*logsp)(edge);
        double extra = integrate(
            [&](double u) { return 2.0 * b_cb(u) / (sig_cb(u) * sig_cb(u)); },
            std::min(edge, x), std::max(edge, x), 1e-12);
        return std::exp(x > edge ? base - extra : base + extra);
    };

    // s(x) = int_{x0}^x s'
    ArrayXd sprime_tab(g.n + 1);
    for (int i = 0; i <= g.n; ++i) sprime_tab[i] = std::exp(logsp->values[i]);
    ArrayXd s_cum = cumulative_integral(g, sprime_tab);
    double s_at_x0;
    {
        TabulatedFunction t{g, s_cum, sprime_tab};
        s_at_x0 = t(spec.x0);
    }
    auto s_tabf = std::make_shared<TabulatedFunction>();
    s_tabf->grid = g;
    s_tabf->values = s_cum - s_at_x0;
    s_tabf->derivs = sprime_tab;
    Real1D sprime_cb = spec.scale_deriv;
    spec.scale = [s_tabf, g, sprime_cb](double x) {
        if (g.contains(x)) return (*s_tabf)(x);
        double edge = x < g.lo ? g.lo : g.hi;
        double base = (*s_tabf)(edge);
        double extra = integrate(sprime_cb, std::min(edge, x),
                                 std::max(edge, x), 1e-12);
        return x > edge ? base + extra : base - extra;
    };

    spec.speed_density = [sprime_cb, sig_cb](double x) {
        return 2.0 / (sig_cb(x) * sig_cb(x) * sprime_cb(x));
    };

    tabulate(spec);
    return spec;
}

DiffusionSpec build_spec_scale_speed(Real1D s_prime, Real1D m_prime,
                                     Real1D kill, Interval interval,
                                     Grid window, std::optional<double> x0) {
    DiffusionSpec spec;
    spec.interval = interval;
    spec.window = window;
    spec.x0 = x0.value_or(0.5 * (window.lo + window.hi));
    spec.kill = kill ? kill : constant(0.0);
    spec.kill_is_const = false;
    spec.scale_deriv = s_prime;
    spec.speed_density = m_prime;

    Grid g = window;
    ArrayXd sprime_tab = g.map(s_prime);
    ArrayXd s_cum = cumulative_integral(g, sprime_tab);
    double s_at_x0;
    {
        TabulatedFunction t{g, s_cum, sprime_tab};
        s_at_x0 = t(spec.x0);
    }
    auto s_tabf = std::make_shared<TabulatedFunction>();
    s_tabf->grid = g;
    s_tabf->values = s_cum - s_at_x0;
    s_tabf->derivs = sprime_tab;
    spec.scale = [s_tabf, g, s_prime](double x) {
        if (g.contains(x)) return (*s_tabf)(x);
        double edge = x < g.lo ? g.lo : g.hi;
        double base = (*s_tabf)(edge);
        double extra = integrate(s_prime, std::min(edge, x),
                                 std::max(edge, x), 1e-12);
        return x > edge ? base + extra : base - extra;
    };

    spec.sigma = [s_prime, m_prime](double x) {
        return std::sqrt(2.0 / (s_prime(x) * m_prime(x)));
    };

    // b = -(sigma^2/2) (log s')'; fourth-order central stencil on log s'.
    spec.drift = [s_prime, m_prime, g](double x) {
        double h = g.h();
        if (x - 2 * h < g.lo) x = g.lo + 2 * h;
        if (x + 2 * h > g.hi) x = g.hi - 2 * h;
        auto L = [&](double u) { return std::log(s_prime(u)); };
        double d = (-L(x + 2 * h) + 8 * L(x + h) - 8 * L(x - h) + L(x - 2 * h)) /
                   (12.0 * h);
        double sig2 = 2.0 / (s_prime(x) * m_prime(x));
        return -0.5 * sig2 * d;
    };

    tabulate(spec);
    return spec;
}

DiffusionSpec build_spec_checked(Real1D b, Real1D sigma, Real1D s_prime,
                                 Real1D m_prime, Real1D kill,
                                 Interval interval, Grid window, double tol) {
    DiffusionSpec spec = build_spec_sde(b, sigma, kill, interval, window);
    // The two representations agree iff s'_given solves the same log-slope
    // equation (up to the affine gauge, which s'(x)/s'(x0) removes).
    double sp0 = s_prime(spec.x0);
    double worst = 0.0;
    for (int i = 0; i <= window.n; i += std::max(1, window.n / 200)) {
        double x = window.point(i);
        double given = s_prime(x) / sp0;
        double built = spec.scale_deriv(x);
        worst = std::max(worst, std::abs(given - built) / std::max(1e-300, built));
        double m_given = m_prime(x) * sp0; // same gauge: m' scales by 1/a
        double m_built = spec.speed_density(x);
        worst = std::max(worst,
                         std::abs(m_given - m_built) / std::max(1e-300, m_built));
    }
    if (worst > tol) {
        std::ostringstream os;
        os << "spec: SDE and scale/speed forms disagree (rel sup "
           << worst << " > " << tol << ")";
        throw std::invalid_argument(os.str());
    }
    return spec;
}

DiffusionSpec make_brownian(double window_lo, double window_hi, int grid_n,
                            double kill_rate) {
    DiffusionSpec spec;
    spec.interval = Interval{};
    spec.window = Grid(window_lo, window_hi, grid_n);
    spec.x0 = 0.5 * (window_lo + window_hi);
    spec.drift = constant(0.0);
    spec.sigma = constant(1.0);
    spec.kill = constant(kill_rate);
    spec.scale = [](double x) { return x; };
    spec.scale_deriv = constant(1.0);
    spec.speed_density = constant(2.0);
    spec.brownian = true;
    spec.brownian_mu = 0.0;
    spec.kill_const = kill_rate;
    spec.kill_is_const = true;
    spec.name = "brownian";
    tabulate(spec);
    return spec;
}

DiffusionSpec make_brownian_drift(double mu, double window_lo,
                                  double window_hi, int grid_n,
                                  double kill_rate) {
    DiffusionSpec spec;
    spec.interval = Interval{};
    spec.window = Grid(window_lo, window_hi, grid_n);
    spec.x0 = 0.5 * (window_lo + window_hi);
    spec.drift = constant(mu);
    spec.sigma = constant(1.0);
    spec.kill = constant(kill_rate);
    spec.scale = [mu](double x) {
        return mu == 0.0 ? x : (1.0 - std::exp(-2.0 * mu * x)) / (2.0 * mu);
    };
    spec.scale_deriv = [mu](double x) { return std::exp(-2.0 * mu * x); };
    spec.speed_density = [mu](double x) { return 2.0 * std::exp(2.0 * mu * x); };
    spec.brownian = true;
    spec.brownian_mu = mu;
    spec.kill_const = kill_rate;
    spec.kill_is_const = true;
    std::ostringstream os;
    os << "bm-drift:mu=" << mu;
    spec.name = os.str();
    tabulate(spec);
    return spec;
}

DiffusionSpec make_bessel3(double window_lo, double window_hi, int grid_n) {
    if (!(window_lo > 0.0))
        throw std::invalid_argument("bessel3: window must sit inside ]0,inf[");
    DiffusionSpec spec;
    spec.interval.lower = 0.0;
    spec.interval.upper = std::numeric_limits<double>::infinity();
    spec.window = Grid(window_lo, window_hi, grid_n);
    spec.x0 = 1.0;
    spec.drift = [](double x) { return 1.0 / x; };
    spec.sigma = constant(1.0);
    spec.kill = constant(0.0);
    spec.scale = [](double x) { return 1.0 - 1.0 / x; }; // anchored at x0 = 1
    spec.scale_deriv = [](double x) { return 1.0 / (x * x); };
    spec.speed_density = [](double x) { return 2.0 * x * x; };
    spec.name = "bessel3";
    tabulate(spec);
    return spec;
}

namespace {

std::map<std::string, std::string> parse_kv(const std::string& text,
                                            char sep) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        auto eq = item.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r\n");
            size_t b = s.find_last_not_of(" \t\r\n");
            return a == std::string::npos ? std::string()
                                          : s.substr(a, b - a + 1);
        };
        kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    return kv;
}

DiffusionSpec from_fields(const std::string& kind,
                          std::map<std::string, std::string> kv) {
    auto get_d = [&](const std::string& k, double dflt) {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : std::stod(it->second);
    };
    auto get_i = [&](const std::string& k, int dflt) {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : std::stoi(it->second);
    };
    double kill = 0.0;
    if (auto it = kv.find("kill_rate_expr"); it != kv.end())
        kill = std::stod(it->second);
    if (auto it = kv.find("kill"); it != kv.end()) kill = std::stod(it->second);

    if (kind == "brownian") {
        return make_brownian(get_d("window_lo", -8.0), get_d("window_hi", 8.0),
                             get_i("grid_n", 2000), kill);
    }
    if (kind == "bm-drift") {
        if (!kv.count("mu"))
            throw std::invalid_argument("spec bm-drift: missing mu");
        return make_brownian_drift(std::stod(kv["mu"]),
                                   get_d("window_lo", -8.0),
                                   get_d("window_hi", 8.0),
                                   get_i("grid_n", 2000), kill);
    }
    if (kind == "bessel3") {
        if (kill != 0.0)
            throw std::invalid_argument("spec bessel3: killing not supported");
        return make_bessel3(get_d("window_lo", 1e-3), get_d("window_hi", 12.0),
                            get_i("grid_n", 2000));
    }
    throw std::invalid_argument("unknown spec kind '" + kind +
                                "' (known: brownian, bm-drift, bessel3)");
}

} // namespace

DiffusionSpec parse_spec(const std::string& text) {
    std::string kind = text;
    std::string rest;
    auto colon = text.find(':');
    if (colon != std::string::npos) {
        kind = text.substr(0, colon);
        rest = text.substr(colon + 1);
    }
    if (kind == "brownian" || kind == "bm-drift" || kind == "bessel3") {
        auto kv = parse_kv(rest, ',');
        if (auto it = kv.find("window"); it != kv.end()) {
            auto sep = it->second.find(':');
            if (sep == std::string::npos)
                throw std::invalid_argument("spec window wants lo:hi");
            kv["window_lo"] = it->second.substr(0, sep);
            kv["window_hi"] = it->second.substr(sep + 1);
        }
        if (auto it = kv.find("grid"); it != kv.end()) kv["grid_n"] = it->second;
        return from_fields(kind, kv);
    }
    return load_spec_file(text);
}

DiffusionSpec load_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument(
            "spec: cannot open '" + path +
            "' and it is not a preset (presets: brownian, bm-drift:mu=..., "
            "bessel3)");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto one = parse_kv(line, '\n');
        for (auto& [k, v] : one) kv[k] = v;
    }
    auto it = kv.find("kind");
    if (it == kv.end())
        throw std::invalid_argument("spec file: missing 'kind'");
    std::string kind = it->second;
    kv.erase(it);
    return from_fields(kind, kv);
}

BoundaryReport classify_boundary(const DiffusionSpec& spec, bool lower) {
    BoundaryReport rep;
    double endpoint = lower ? spec.interval.lower : spec.interval.upper;
    bool declared_absorbing =
        lower ? spec.interval.lower_absorbing : spec.interval.upper_absorbing;
    double p = spec.x0;

    // M(x) - M(p) and s(x) - s(p) from the callables; quadrature toward the
    // endpoint, improper if infinite.
    auto M = [&](double x) {
        return integrate(spec.speed_density, std::min(p, x), std::max(p, x),
                         1e-10) * (x >= p ? 1.0 : -1.0);
    };
    auto time_integrand = [&](double x) {
        return std::abs(M(x)) * spec.scale_deriv(x);
    };
    auto entrance_integrand = [&](double x) {
        return std::abs(spec.scale(x) - spec.scale(p)) * spec.speed_density(x);
    };

    TailIntegral ti, ei;
    if (std::isinf(endpoint)) {
        double dir = lower ? -1.0 : 1.0;
        ti = improper_integral(time_integrand, p, dir, 1e-8);
        ei = improper_integral(entrance_integrand, p, dir, 1e-8);
    } else {
        ti = endpoint_integral(time_integrand, p, endpoint, 1e-8);
        ei = endpoint_integral(entrance_integrand, p, endpoint, 1e-8);
    }
    rep.time_integral = ti.value;
    rep.time_finite = ti.converged;
    rep.entrance_integral = ei.value;
    rep.entrance_finite = ei.converged;

    if (ti.converged && ei.converged)
        rep.cls = declared_absorbing ? BoundaryClass::regular_absorbing
                                     : BoundaryClass::regular;
    else if (ti.converged)
        rep.cls = BoundaryClass::exit;
    else if (ei.converged)
        rep.cls = BoundaryClass::entrance;
    else
        rep.cls = BoundaryClass::natural;
    if (declared_absorbing && rep.cls == BoundaryClass::exit)
        rep.cls = BoundaryClass::regular_absorbing;
    return rep;
}

bool assumptions_hold(const DiffusionSpec& spec, std::string* why) {
    BoundaryReport lo = classify_boundary(spec, true);
    BoundaryReport hi = classify_boundary(spec, false);
    if (lo.cls == BoundaryClass::regular && !spec.interval.lower_absorbing) {
        if (why) *why = "lower boundary regular but not declared absorbing";
        return false;
    }
    if (hi.cls == BoundaryClass::exit || hi.cls == BoundaryClass::regular) {
        // exit at B means B acts as a trap reachable in finite time
        if (hi.cls == BoundaryClass::exit && !spec.interval.upper_absorbing) {
            if (why) *why = "upper boundary is exit but not declared absorbing";
            return false;
        }
    }
    return true;
}

} // namespace excursus
