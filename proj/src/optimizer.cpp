#include "powertalk/optimizer.hpp"

#include "powertalk/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>

namespace powertalk {

using Eigen::Index;

namespace {

std::size_t converter_of(const ValidatedGrid& grid, BusId bus, const char* role) {
    if (bus.index >= grid.bus_count()) throw Error(ErrorKind::InvalidArgument, std::string(role) + " bus out of range");
    auto k = grid.vsc_index(bus.index);
    if (!k) throw Error(ErrorKind::InputOnLoadBus, std::string(role) + " bus " + std::to_string(bus.index) + " hosts no converter");
    return *k;
}

void check_link(const ValidatedGrid& grid, BusId tx, BusId rx) {
    converter_of(grid, tx, "transmitter");
    converter_of(grid, rx, "receiver");
    if (tx == rx) throw Error(ErrorKind::InvalidArgument, "transmitter and receiver must differ");
}

std::vector<double> axis(double lo, double hi, double step) {
    std::vector<double> values;
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) values.push_back(lo + static_cast<double>(i) * step);
    return values;
}

unsigned worker_count(unsigned requested, std::size_t jobs) {
    unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Runs body(i) for i in [0, count), splitting contiguous index blocks across threads.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body body) {
    const unsigned workers = worker_count(threads, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::optional<LinkTerms> try_link_terms(const ValidatedGrid& grid, const DroopState& droop, const SteadyState& nominal_state,
                                        BusId tx, BusId rx, const SolverOptions& options) {
    try {
        return link_terms(grid, droop, nominal_state, tx, rx, options);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::NoRealRoot || e.kind() == ErrorKind::NonConvergence || e.kind() == ErrorKind::SingularSystem) {
            return std::nullopt;
        }
        throw;
    }
}

double resolve_r_max(const ValidatedGrid& grid, const SteadyState& nominal_state, std::size_t k, std::optional<double> override_value) {
    if (override_value) return *override_value;
    if (grid.vsc(k).r_max) return *grid.vsc(k).r_max;
    return default_r_max(grid, nominal_state, k);
}

}  // namespace

LinkTerms link_terms(const ValidatedGrid& grid, const DroopState& droop, const SteadyState& nominal_state, BusId tx, BusId rx,
                     const SolverOptions& options) {
    check_link(grid, tx, rx);
    const SteadyState state = solve_steady_state(grid, droop, options);
    const ChannelModel model = linearize(grid, droop, state);
    const auto k_count = static_cast<Index>(grid.vsc_count());
    LinkTerms terms;
    terms.h = model.H(static_cast<Index>(rx.index), static_cast<Index>(tx.index));
    terms.phi.resize(k_count);
    terms.dp_vr.resize(k_count);
    for (Index k = 0; k < k_count; ++k) {
        const auto n = static_cast<Index>(grid.vsc_buses()[static_cast<std::size_t>(k)]);
        terms.phi[k] = model.Phi(n, static_cast<Index>(tx.index));
        terms.dp_vr[k] = state.p[k] - nominal_state.p[k];
    }
    return terms;
}

SnrEvaluation evaluate_snr(const LinkTerms& terms, const Eigen::VectorXd& pi, double sigma_z) {
    if (!(sigma_z > 0.0)) throw Error(ErrorKind::InvalidArgument, "noise standard deviation must be positive");
    if (pi.size() != terms.phi.size()) throw Error(ErrorKind::InvalidArgument, "one budget per converter is required");
    SnrEvaluation out;
    out.terms = terms;
    out.g.resize(pi.size());
    double g_min = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < pi.size(); ++k) {
        const double room = pi[k] * pi[k] - terms.dp_vr[k] * terms.dp_vr[k];
        if (room < 0.0) out.in_domain = false;
        const double phi = terms.phi[k];
        out.g[k] = phi == 0.0 ? std::numeric_limits<double>::infinity() : terms.h * terms.h / (phi * phi) * room;
        g_min = std::min(g_min, out.g[k]);
    }
    out.snr = out.in_domain ? g_min / (sigma_z * sigma_z) : 0.0;
    return out;
}

SnrEvaluation one_way_snr(const ValidatedGrid& grid, const DroopState& droop, const DroopState& nominal, const Eigen::VectorXd& pi,
                          double sigma_z, BusId tx, BusId rx, const SolverOptions& options) {
    const SteadyState nominal_state = solve_steady_state(grid, nominal, options);
    if (nominal.x != droop.x) throw Error(ErrorKind::InvalidArgument, "droop and nominal states must share reference voltages");
    return evaluate_snr(link_terms(grid, droop, nominal_state, tx, rx, options), pi, sigma_z);
}

double capacity(double snr) {
    if (!(snr >= 0.0)) throw Error(ErrorKind::InvalidArgument, "capacity needs a non-negative SNR");
    return 0.5 * std::log2(1.0 + snr);
}

double default_r_max(const ValidatedGrid& grid, const SteadyState& nominal_state, std::size_t converter) {
    const VscSpec& vsc = grid.vsc(converter);
    const std::size_t bus = grid.vsc_buses()[converter];
    const LoadSpec& load = grid.load(bus);
    double coupling = 0.0;
    double g_fixed = grid.load_conductance(bus);
    for (const Neighbor& nb : grid.neighbors(bus)) {
        coupling += nb.conductance * nominal_state.v[static_cast<Index>(nb.bus)];
        g_fixed += nb.conductance;
    }
    auto viable = [&](double r) {
        const double r_bus = 1.0 / (g_fixed + 1.0 / r);
        const double rhs = r * (std::sqrt(4.0 * load.d_cp / r_bus) - coupling + load.i_cc);
        return vsc.x_nom >= 1.1 * rhs;
    };
    const double cap = 10.0 * vsc.r_nom;
    if (viable(cap)) return cap;
    double best = vsc.r_nom;
    const double dr = vsc.r_nom / 100.0;
    for (double r = vsc.r_nom; r <= cap; r += dr) {
        if (!viable(r)) break;
        best = r;
    }
    return best;
}

SearchSurface::SearchSurface(const ValidatedGrid& grid, const DroopState& nominal, BusId tx, BusId rx, const GridSearchOptions& options)
    : nominal_(nominal) {
    check_link(grid, tx, rx);
    if (!(options.step > 0.0)) throw Error(ErrorKind::EmptySearchSpace, "grid step must be positive");
    k_tx_ = *grid.vsc_index(tx.index);
    k_rx_ = *grid.vsc_index(rx.index);
    step_ = options.step;

    const SteadyState nominal_state = solve_steady_state(grid, nominal, options.solver);
    const double lo_tx = nominal.r[static_cast<Index>(k_tx_)];
    const double lo_rx = nominal.r[static_cast<Index>(k_rx_)];
    const double hi_tx = resolve_r_max(grid, nominal_state, k_tx_, options.r_max_tx);
    const double hi_rx = resolve_r_max(grid, nominal_state, k_rx_, options.r_max_rx);
    if (hi_tx < lo_tx || hi_rx < lo_rx) throw Error(ErrorKind::EmptySearchSpace, "r_max is below the nominal virtual resistance");

    r_tx_ = axis(lo_tx, hi_tx, step_);
    r_rx_ = axis(lo_rx, hi_rx, step_);
    terms_.resize(r_tx_.size() * r_rx_.size());
    parallel_for(r_tx_.size(), options.threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < r_rx_.size(); ++j) {
            terms_[i * r_rx_.size() + j] = try_link_terms(grid, droop_at(r_tx_[i], r_rx_[j]), nominal_state, tx, rx, options.solver);
        }
    });
}

DroopState SearchSurface::droop_at(double r_tx, double r_rx) const {
    DroopState droop = nominal_;
    droop.r[static_cast<Index>(k_tx_)] = r_tx;
    droop.r[static_cast<Index>(k_rx_)] = r_rx;
    return droop;
}

OptimizationResult best_on_surface(const SearchSurface& surface, const Eigen::VectorXd& pi, double sigma_z) {
    OptimizationResult best;
    best.grid_step = surface.step();
    best.snr = -1.0;
    for (std::size_t i = 0; i < surface.tx_points(); ++i) {
        for (std::size_t j = 0; j < surface.rx_points(); ++j) {
            const auto& terms = surface.at(i, j);
            if (!terms) continue;
            ++best.evaluations;
            const SnrEvaluation eval = evaluate_snr(*terms, pi, sigma_z);
            if (i == 0 && j == 0) best.snr_nominal = eval.snr;
            if (eval.snr > best.snr) {
                best.snr = eval.snr;
                best.g_values = eval.g;
                best.tx_index = i;
                best.rx_index = j;
            }
        }
    }
    if (best.snr < 0.0) throw Error(ErrorKind::NoRealRoot, "no point of the search box has a viable operating point");
    best.r_star = surface.droop_at(surface.r_tx(best.tx_index), surface.r_rx(best.rx_index)).r;
    best.capacity = capacity(best.snr);
    return best;
}

OptimizationResult maximize_snr_grid(const ValidatedGrid& grid, const DroopState& nominal, const Eigen::VectorXd& pi,
                                     double sigma_z, BusId tx, BusId rx, const GridSearchOptions& options) {
    const SearchSurface surface(grid, nominal, tx, rx, options);
    OptimizationResult best = best_on_surface(surface, pi, sigma_z);
    if (!options.refine) return best;

    // Local pass at a tenth of the step inside the incumbent's neighbourhood.
    const SteadyState nominal_state = solve_steady_state(grid, nominal, options.solver);
    const double fine = options.step / 10.0;
    const std::size_t k_tx = surface.tx_converter();
    const std::size_t k_rx = surface.rx_converter();
    const double lo_tx = std::max(surface.r_tx(0), best.r_star[static_cast<Index>(k_tx)] - options.step);
    const double hi_tx = std::min(surface.r_tx(surface.tx_points() - 1), best.r_star[static_cast<Index>(k_tx)] + options.step);
    const double lo_rx = std::max(surface.r_rx(0), best.r_star[static_cast<Index>(k_rx)] - options.step);
    const double hi_rx = std::min(surface.r_rx(surface.rx_points() - 1), best.r_star[static_cast<Index>(k_rx)] + options.step);
    for (double ra : axis(lo_tx, hi_tx, fine)) {
        for (double rb : axis(lo_rx, hi_rx, fine)) {
            const DroopState droop = surface.droop_at(ra, rb);
            const auto terms = try_link_terms(grid, droop, nominal_state, tx, rx, options.solver);
            if (!terms) continue;
            ++best.evaluations;
            const SnrEvaluation eval = evaluate_snr(*terms, pi, sigma_z);
            if (eval.snr > best.snr) {
                best.snr = eval.snr;
                best.g_values = eval.g;
                best.r_star = droop.r;
            }
        }
    }
    best.grid_step = fine;
    best.capacity = capacity(best.snr);
    return best;
}

std::vector<SweepRow> capacity_sweep(const ValidatedGrid& grid, const DroopState& nominal, const std::vector<double>& pi_range,
                                     double sigma_z, BusId tx, BusId rx, const GridSearchOptions& options) {
    if (pi_range.empty()) throw Error(ErrorKind::InvalidArgument, "budget range is empty");
    if (!std::is_sorted(pi_range.begin(), pi_range.end())) throw Error(ErrorKind::InvalidArgument, "budget range must be ascending");
    const SearchSurface surface(grid, nominal, tx, rx, options);
    std::vector<SweepRow> rows;
    rows.reserve(pi_range.size());
    for (double pi : pi_range) {
        if (!(pi >= 0.0)) throw Error(ErrorKind::InvalidArgument, "budgets must be non-negative");
        const Eigen::VectorXd budgets = Eigen::VectorXd::Constant(static_cast<Index>(grid.vsc_count()), pi);
        const OptimizationResult best = best_on_surface(surface, budgets, sigma_z);
        SweepRow row;
        row.pi = pi;
        row.snr_nominal = best.snr_nominal;
        row.snr_opt = best.snr;
        row.capacity_nominal = capacity(best.snr_nominal);
        row.capacity_opt = best.capacity;
        row.r_tx_star = best.r_star[static_cast<Index>(surface.tx_converter())];
        row.r_rx_star = best.r_star[static_cast<Index>(surface.rx_converter())];
        rows.push_back(row);
    }
    return rows;
}

ConcavityReport concavity_probe(const ValidatedGrid& grid, const DroopState& nominal, const Eigen::VectorXd& pi, BusId tx, BusId rx,
                                std::size_t samples, const ConcavityOptions& options) {
    check_link(grid, tx, rx);
    if (samples < 1) throw Error(ErrorKind::InvalidArgument, "concavity probe needs at least one sample");
    const SteadyState nominal_state = solve_steady_state(grid, nominal, options.solver);
    const std::size_t k_tx = *grid.vsc_index(tx.index);
    const std::size_t k_rx = *grid.vsc_index(rx.index);
    const double lo_tx = nominal.r[static_cast<Index>(k_tx)];
    const double lo_rx = nominal.r[static_cast<Index>(k_rx)];
    const double hi_tx = resolve_r_max(grid, nominal_state, k_tx, options.r_max_tx);
    const double hi_rx = resolve_r_max(grid, nominal_state, k_rx, options.r_max_rx);
    const auto k_count = static_cast<Index>(grid.vsc_count());

    auto g_at = [&](double ra, double rb) -> std::optional<SnrEvaluation> {
        DroopState droop = nominal;
        droop.r[static_cast<Index>(k_tx)] = ra;
        droop.r[static_cast<Index>(k_rx)] = rb;
        auto terms = try_link_terms(grid, droop, nominal_state, tx, rx, options.solver);
        if (!terms) return std::nullopt;
        return evaluate_snr(*terms, pi, 1.0);
    };
    auto inside = [](const std::optional<SnrEvaluation>& e) { return e && e->in_domain && e->g.allFinite(); };

    ConcavityReport report;

    // Central differences at nominal. The spent-budget term is quadratic in the
    // resistance offset with a large coefficient, so the step must be small or
    // it swamps the slope.
    const double h = options.fd_step;
    const double hg = h / 100.0;
    const auto g0 = g_at(lo_tx, lo_rx);
    const auto g_tx_up = g_at(lo_tx + hg, lo_rx);
    const auto g_tx_dn = g_at(lo_tx - hg, lo_rx);
    const auto g_rx_up = g_at(lo_tx, lo_rx + hg);
    const auto g_rx_dn = g_at(lo_tx, lo_rx - hg);
    if (!g0 || !g_tx_up || !g_tx_dn || !g_rx_up || !g_rx_dn) throw Error(ErrorKind::NoRealRoot, "nominal operating point is not viable");
    report.g_at_nominal = g0->g;
    report.gradient_at_nominal.resize(k_count, 2);
    report.gradient_at_nominal.col(0) = (g_tx_up->g - g_tx_dn->g) / (2.0 * hg);
    report.gradient_at_nominal.col(1) = (g_rx_up->g - g_rx_dn->g) / (2.0 * hg);
    report.grows_in_each_coordinate = (report.gradient_at_nominal.array() >= 0.0).all();
    report.grows_along_joint_increase = (report.gradient_at_nominal.rowwise().sum().array() >= 0.0).all();

    // The feasible domain is a thin band; bound it with a coarse scan before sampling.
    const int coarse = 200;
    const double d_tx = (hi_tx - lo_tx) / coarse;
    const double d_rx = (hi_rx - lo_rx) / coarse;
    double box_lo_tx = hi_tx, box_hi_tx = lo_tx, box_lo_rx = hi_rx, box_hi_rx = lo_rx;
    std::vector<char> hit(static_cast<std::size_t>((coarse + 1) * (coarse + 1)), 0);
    parallel_for(static_cast<std::size_t>(coarse + 1), 0, [&](std::size_t i) {
        for (int j = 0; j <= coarse; ++j) {
            hit[i * (coarse + 1) + static_cast<std::size_t>(j)] =
                inside(g_at(lo_tx + static_cast<double>(i) * d_tx, lo_rx + j * d_rx)) ? 1 : 0;
        }
    });
    for (int i = 0; i <= coarse; ++i) {
        for (int j = 0; j <= coarse; ++j) {
            if (!hit[static_cast<std::size_t>(i * (coarse + 1) + j)]) continue;
            box_lo_tx = std::min(box_lo_tx, lo_tx + i * d_tx);
            box_hi_tx = std::max(box_hi_tx, lo_tx + i * d_tx);
            box_lo_rx = std::min(box_lo_rx, lo_rx + j * d_rx);
            box_hi_rx = std::max(box_hi_rx, lo_rx + j * d_rx);
        }
    }
    box_lo_tx = std::max(lo_tx, box_lo_tx - d_tx);
    box_hi_tx = std::min(hi_tx, box_hi_tx + d_tx);
    box_lo_rx = std::max(lo_rx, box_lo_rx - d_rx);
    box_hi_rx = std::min(hi_rx, box_hi_rx + d_rx);
    if (box_hi_tx <= box_lo_tx || box_hi_rx <= box_lo_rx) return report;

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> draw_tx(box_lo_tx, box_hi_tx);
    std::uniform_real_distribution<double> draw_rx(box_lo_rx, box_hi_rx);
    const std::size_t max_attempts = samples * 100000;
    while (report.points.size() < samples && report.attempts < max_attempts) {
        ++report.attempts;
        const double ra = draw_tx(rng);
        const double rb = draw_rx(rng);
        if (ra - h < lo_tx || rb - h < lo_rx || ra + h > hi_tx || rb + h > hi_rx) continue;

        std::optional<SnrEvaluation> stencil[3][3];
        bool ok = true;
        for (int a = -1; a <= 1 && ok; ++a) {
            for (int b = -1; b <= 1 && ok; ++b) {
                stencil[a + 1][b + 1] = g_at(ra + a * h, rb + b * h);
                ok = inside(stencil[a + 1][b + 1]);
            }
        }
        if (!ok) continue;

        ProbePoint point;
        point.r_tx = ra;
        point.r_rx = rb;
        point.g = stencil[1][1]->g;
        point.max_eigen.resize(k_count);
        point.hessian_norm.resize(k_count);
        for (Index k = 0; k < k_count; ++k) {
            auto g = [&](int a, int b) { return stencil[a + 1][b + 1]->g[k]; };
            Eigen::Matrix2d hess;
            hess(0, 0) = (g(1, 0) - 2.0 * g(0, 0) + g(-1, 0)) / (h * h);
            hess(1, 1) = (g(0, 1) - 2.0 * g(0, 0) + g(0, -1)) / (h * h);
            hess(0, 1) = hess(1, 0) = (g(1, 1) - g(1, -1) - g(-1, 1) + g(-1, -1)) / (4.0 * h * h);
            const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(hess, Eigen::EigenvaluesOnly);
            point.max_eigen[k] = eig.eigenvalues().maxCoeff();
            point.hessian_norm[k] = hess.norm();
            if (point.max_eigen[k] > options.rel_tol * point.hessian_norm[k]) {
                point.concave = false;
                ++report.violations;
            }
        }
        report.points.push_back(std::move(point));
    }
    return report;
}

}  // namespace powertalk
