#include "recsyn/scaling.hpp"

#include "recsyn/common.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>

namespace recsyn {

namespace {

constexpr std::size_t grid_size = 32;
constexpr double grid_lo = 1e-3;
constexpr double grid_hi = 2.0;
constexpr double inf = std::numeric_limits<double>::infinity();

std::vector<double> exponent_grid() {
    std::vector<double> g(grid_size);
    const double a = std::log(grid_lo), b = std::log(grid_hi);
    for (std::size_t i = 0; i < grid_size; ++i)
        g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(grid_size - 1));
    return g;
}

double loss_of(const Eigen::VectorXd& r, const FitOptions& o) {
    if (o.objective == FitObjective::squared) return r.squaredNorm();
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double a = std::abs(r[i]);
        s += a <= o.huber_delta ? 0.5 * a * a : o.huber_delta * (a - 0.5 * o.huber_delta);
    }
    return s;
}

Eigen::VectorXd huber_weights(const Eigen::VectorXd& r, double delta) {
    Eigen::VectorXd w(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double a = std::abs(r[i]);
        w[i] = a <= delta ? 1.0 : delta / a;
    }
    return w;
}

// Runs a weighted linear solver under Huber IRLS, or once for plain squares.
template <class Solve>
Eigen::VectorXd irls(const Solve& solve, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
                     Eigen::Index m, const FitOptions& o) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd coef = solve(w);
    if (o.objective == FitObjective::squared) return coef;
    for (int it = 0; it < 50; ++it) {
        w = huber_weights(residual(coef), o.huber_delta);
        auto next = solve(w);
        const bool done = (next - coef).norm() <= 1e-14 * (1.0 + coef.norm());
        coef = std::move(next);
        if (done) break;
    }
    return coef;
}

struct LmProblem {
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*)> eval;
    std::function<void(Eigen::VectorXd&)> project;
    std::vector<bool> free;
};

// Levenberg-Marquardt with column scaling and a QR solve of the damped system.
Eigen::VectorXd levenberg_marquardt(const LmProblem& prob, Eigen::VectorXd theta) {
    const auto k = static_cast<Eigen::Index>(prob.free.size());
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j)
        if (prob.free[static_cast<std::size_t>(j)]) cols.push_back(j);
    if (cols.empty()) return theta;
    const auto kf = static_cast<Eigen::Index>(cols.size());

    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    prob.eval(theta, r, &J);
    double sse = r.squaredNorm();
    double lambda = 1e-3;
    int stalls = 0;
    for (int iter = 0; iter < 2000 && sse > 0.0; ++iter) {
        const auto m = r.size();
        Eigen::MatrixXd Jf(m, kf);
        Eigen::VectorXd scale(kf);
        for (Eigen::Index c = 0; c < kf; ++c) {
            Jf.col(c) = J.col(cols[static_cast<std::size_t>(c)]);
            const double nrm = Jf.col(c).norm();
            scale[c] = nrm > 0.0 ? 1.0 / nrm : 1.0;
            Jf.col(c) *= scale[c];
        }
        bool accepted = false;
        while (lambda < 1e20) {
            Eigen::MatrixXd aug(m + kf, kf);
            aug.topRows(m) = Jf;
            aug.bottomRows(kf) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(kf, kf);
            Eigen::VectorXd rhs(m + kf);
            rhs.head(m) = -r;
            rhs.tail(kf).setZero();
            const Eigen::VectorXd step = aug.colPivHouseholderQr().solve(rhs).cwiseProduct(scale);
            Eigen::VectorXd trial = theta;
            for (Eigen::Index c = 0; c < kf; ++c) trial[cols[static_cast<std::size_t>(c)]] += step[c];
            prob.project(trial);
            Eigen::VectorXd rt;
            prob.eval(trial, rt, nullptr);
            const double st = rt.squaredNorm();
            if (std::isfinite(st) && st < sse) {
                const double rel_step = (trial - theta).norm() / (1.0 + theta.norm());
                const double gain = sse - st;
                theta = std::move(trial);
                sse = st;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                stalls = (gain <= 1e-15 * sse || rel_step < 1e-15) ? stalls + 1 : 0;
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted || stalls >= 3) break;
        prob.eval(theta, r, &J);
    }
    return theta;
}

// Golden-section minimization of f on [a, b].
double golden_min(const std::function<double(double)>& f, double a, double b) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && (b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return fc <= fd ? c : d;
}

// Nelder-Mead on a 2-D function.
std::array<double, 2> nelder_mead(const std::function<double(const std::array<double, 2>&)>& f,
                                  std::array<double, 2> x0, double step) {
    std::array<std::array<double, 2>, 3> s{x0, {x0[0] + step, x0[1]}, {x0[0], x0[1] + step}};
    std::array<double, 3> fs{f(s[0]), f(s[1]), f(s[2])};
    for (int it = 0; it < 4000; ++it) {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b] || (fs[a] == fs[b] && a < b); });
        auto& best = s[idx[0]];
        auto& worst = s[idx[2]];
        const double size = std::max(std::abs(s[idx[1]][0] - best[0]) + std::abs(s[idx[1]][1] - best[1]),
                                     std::abs(worst[0] - best[0]) + std::abs(worst[1] - best[1]));
        if (size < 1e-13) break;
        const std::array<double, 2> cen{(best[0] + s[idx[1]][0]) / 2, (best[1] + s[idx[1]][1]) / 2};
        auto along = [&](double t) {
            return std::array<double, 2>{cen[0] + t * (worst[0] - cen[0]), cen[1] + t * (worst[1] - cen[1])};
        };
        const auto xr = along(-1.0);
        const double fr = f(xr);
        if (fr < fs[idx[0]]) {
            const auto xe = along(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                worst = xe;
                fs[idx[2]] = fe;
            } else {
                worst = xr;
                fs[idx[2]] = fr;
            }
        } else if (fr < fs[idx[1]]) {
            worst = xr;
            fs[idx[2]] = fr;
        } else {
            const auto xc = fr < fs[idx[2]] ? along(-0.5) : along(0.5);
            const double fcn = f(xc);
            if (fcn < std::min(fr, fs[idx[2]])) {
                worst = xc;
                fs[idx[2]] = fcn;
            } else {
                for (int j : {idx[1], idx[2]}) {
                    s[j] = {best[0] + 0.5 * (s[j][0] - best[0]), best[1] + 0.5 * (s[j][1] - best[1])};
                    fs[j] = f(s[j]);
                }
            }
        }
    }
    int b = 0;
    for (int j = 1; j < 3; ++j)
        if (fs[j] < fs[b]) b = j;
    return s[b];
}

std::vector<double> targets(const LossCurve& c, const FitOptions& o) {
    std::vector<double> y;
    for (const auto& p : c.points) y.push_back(o.log_transform ? std::log(p.loss) : p.loss);
    return y;
}

// ---- per-model ----------------------------------------------------------------------------

struct PerModelData {
    Eigen::VectorXd logd;
    Eigen::VectorXd y;
    double cmax = 0.0;
};

struct Profile1 {
    double c = 0.0, A = 0.0, obj = inf;
};

// Best (c, A) for fixed alpha under 0 <= c <= cmax, A >= 0.
Profile1 profile_per_model(const PerModelData& d, double alpha, const FitOptions& o) {
    const auto m = d.y.size();
    const Eigen::VectorXd f = alpha == 0.0 ? Eigen::VectorXd::Ones(m) : Eigen::VectorXd((-alpha * d.logd).array().exp());

    auto solve = [&](const Eigen::VectorXd& w) {
        const double sw = w.sum(), swf = w.dot(f), swff = w.dot(f.cwiseProduct(f));
        const double swy = w.dot(d.y), swfy = w.dot(f.cwiseProduct(d.y));
        std::vector<std::array<double, 2>> cand;
        const double det = sw * swff - swf * swf;
        if (alpha > 0.0 && det > 1e-14 * sw * swff) {
            const double c = (swff * swy - swf * swfy) / det;
            const double A = (sw * swfy - swf * swy) / det;
            if (c >= 0.0 && c <= d.cmax && A >= 0.0) cand.push_back({c, A});
        }
        if (alpha == 0.0) {
            // c and A collapse into one constant; put what fits under the floor into c
            const double k = swy / sw;
            cand.push_back({std::clamp(k, 0.0, d.cmax), std::max(0.0, k - std::clamp(k, 0.0, d.cmax))});
        } else {
            cand.push_back({std::clamp(swy / sw, 0.0, d.cmax), 0.0});
            cand.push_back({0.0, std::max(0.0, swfy / swff)});
            cand.push_back({d.cmax, std::max(0.0, (swfy - d.cmax * swf) / swff)});
        }
        double best = inf;
        std::array<double, 2> arg{0.0, 0.0};
        for (const auto& c : cand) {
            const double s = (w.array() * (d.y.array() - c[0] - c[1] * f.array()).square()).sum();
            if (s < best) {
                best = s;
                arg = c;
            }
        }
        return Eigen::Vector2d(arg[0], arg[1]);
    };
    auto residual = [&](const Eigen::VectorXd& coef) -> Eigen::VectorXd {
        return (coef[0] + coef[1] * f.array() - d.y.array()).matrix();
    };
    const Eigen::VectorXd coef = irls(solve, residual, m, o);
    return {coef[0], coef[1], loss_of(residual(coef), o)};
}

// ---- joint --------------------------------------------------------------------------------

struct JointData {
    Eigen::VectorXd logn, logd, y;
};

struct Profile2 {
    Eigen::Vector3d coef = Eigen::Vector3d::Zero();  // E, A, B
    double obj = inf;
};

Eigen::MatrixXd joint_design(const JointData& d, double alpha, double beta) {
    Eigen::MatrixXd X(d.y.size(), 3);
    X.col(0).setOnes();
    X.col(1) = (-alpha * d.logn).array().exp().matrix();
    X.col(2) = (-beta * d.logd).array().exp().matrix();
    return X;
}

// Exact 3-variable NNLS by enumerating supports, largest first.
Eigen::Vector3d nnls3(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    const Eigen::VectorXd yw = sw.cwiseProduct(y);
    static constexpr std::array<unsigned, 8> supports{7, 3, 5, 6, 1, 2, 4, 0};
    double best = inf;
    Eigen::Vector3d arg = Eigen::Vector3d::Zero();
    for (unsigned mask : supports) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < 3; ++j)
            if (mask & (1u << j)) cols.push_back(j);
        Eigen::Vector3d coef = Eigen::Vector3d::Zero();
        if (!cols.empty()) {
            Eigen::MatrixXd sub(Xw.rows(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = Xw.col(cols[c]);
            const auto qr = sub.colPivHouseholderQr();
            if (qr.rank() < static_cast<Eigen::Index>(cols.size())) continue;
            const Eigen::VectorXd sol = qr.solve(yw);
            bool ok = true;
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (!(sol[static_cast<Eigen::Index>(c)] >= 0.0)) ok = false;
                coef[cols[c]] = sol[static_cast<Eigen::Index>(c)];
            }
            if (!ok) continue;
        }
        const double s = (yw - Xw * coef).squaredNorm();
        if (s < best) {
            best = s;
            arg = coef;
        }
    }
    return arg;
}

Profile2 profile_joint(const JointData& d, double alpha, double beta, const FitOptions& o) {
    const Eigen::MatrixXd X = joint_design(d, alpha, beta);
    auto solve = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd { return nnls3(X, d.y, w); };
    auto residual = [&](const Eigen::VectorXd& coef) -> Eigen::VectorXd { return X * coef - d.y; };
    const Eigen::VectorXd coef = irls(solve, residual, d.y.size(), o);
    return {coef, loss_of(residual(coef), o)};
}

bool strictly_decreasing_overall(const std::vector<double>& y) { return y.back() < y.front(); }

}  // namespace

void LossCurve::validate() const {
    if (!(model_size > 0.0) || !std::isfinite(model_size))
        throw ValidationError("curve '" + label + "': model size must be positive");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!(p.tokens > 0.0) || !std::isfinite(p.tokens))
            throw ValidationError("curve '" + label + "': token counts must be positive");
        if (!(p.loss > 0.0) || !std::isfinite(p.loss))
            throw ValidationError("curve '" + label + "': losses must be finite and positive");
        if (i > 0 && !(p.tokens > points[i - 1].tokens))
            throw ValidationError("curve '" + label + "': token counts must be strictly increasing");
    }
}

double PerModelFit::predict(double tokens) const { return L_inf + A * std::pow(tokens, -alpha); }

double JointScalingFit::predict(double model_size, double tokens) const {
    return E + A * std::pow(model_size, -alpha) + B * std::pow(tokens, -beta);
}

PerModelFit fit_per_model(const LossCurve& curve, const FitOptions& options) {
    curve.validate();
    if (curve.points.size() < 4) throw ValidationError("per-model fit needs at least 4 points");
    const auto yv = targets(curve, options);
    const auto m = static_cast<Eigen::Index>(yv.size());
    PerModelData d;
    d.logd.resize(m);
    d.y.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        d.logd[i] = std::log(curve.points[static_cast<std::size_t>(i)].tokens);
        d.y[i] = yv[static_cast<std::size_t>(i)];
    }
    d.cmax = d.y.minCoeff();
    if (!(d.cmax >= 0.0)) throw ValidationError("per-model fit needs non-negative targets");

    const auto grid = exponent_grid();
    std::vector<Profile1> prof(grid.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(grid.size()); ++i)
        prof[static_cast<std::size_t>(i)] = profile_per_model(d, grid[static_cast<std::size_t>(i)], options);
    std::size_t bi = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (prof[i].obj < prof[bi].obj) bi = i;

    const double lo = std::log(grid[bi == 0 ? 0 : bi - 1]);
    const double hi = std::log(grid[std::min(bi + 1, grid.size() - 1)]);
    double alpha = std::exp(golden_min([&](double la) { return profile_per_model(d, std::exp(la), options).obj; }, lo, hi));
    Profile1 best = profile_per_model(d, alpha, options);
    if (prof[bi].obj < best.obj) {
        alpha = grid[bi];
        best = prof[bi];
    }

    if (options.objective == FitObjective::squared && best.A > 0.0) {
        LmProblem prob;
        prob.free = {true, true, true};
        prob.eval = [&](const Eigen::VectorXd& t, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
            const Eigen::ArrayXd f = (-t[2] * d.logd).array().exp();
            r = (t[0] + t[1] * f - d.y.array()).matrix();
            if (J) {
                J->resize(m, 3);
                J->col(0).setOnes();
                J->col(1) = f.matrix();
                J->col(2) = (-t[1] * d.logd.array() * f).matrix();
            }
        };
        prob.project = [&](Eigen::VectorXd& t) {
            t[0] = std::clamp(t[0], 0.0, d.cmax);
            t[1] = std::max(t[1], 0.0);
            t[2] = std::clamp(t[2], 1e-9, 10.0);
        };
        const Eigen::VectorXd t = levenberg_marquardt(prob, Eigen::Vector3d(best.c, best.A, alpha));
        Eigen::VectorXd r;
        prob.eval(t, r, nullptr);
        if (r.squaredNorm() < best.obj) {
            best = {t[0], t[1], r.squaredNorm()};
            alpha = t[2];
        }
    }

    // a constant can beat every power law on flat or rising curves
    const Profile1 flat = profile_per_model(d, 0.0, options);
    bool constant = false;
    if (flat.obj < best.obj) {
        best = flat;
        constant = true;
    }

    PerModelFit fit;
    fit.L_inf = best.c;
    fit.A = best.A;
    fit.alpha = constant ? 0.0 : alpha;
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i)
        r[i] = fit.L_inf + fit.A * (constant ? 1.0 : std::exp(-fit.alpha * d.logd[i])) - d.y[i];
    fit.rmse = std::sqrt(r.squaredNorm() / static_cast<double>(m));

    const double scale = std::max(d.y.cwiseAbs().maxCoeff(), 1e-300);
    if (constant || fit.A <= 1e-12 * scale) {
        fit.alpha_identifiable = false;
        fit.flags.push_back("alpha_unidentifiable");
        if (!constant) {
            fit.A = 0.0;
            fit.alpha = 0.0;
        }
    } else if (fit.alpha <= grid_lo * (1 + 1e-9) || fit.alpha >= grid_hi * (1 - 1e-9)) {
        fit.flags.push_back("alpha_at_search_bound");
    }
    if (!strictly_decreasing_overall(yv)) fit.flags.push_back("loss_not_decreasing");
    if (fit.L_inf == 0.0) fit.flags.push_back("L_inf_at_zero");
    if (fit.L_inf == d.cmax && fit.A > 0.0) fit.flags.push_back("L_inf_at_min_loss");
    return fit;
}

JointScalingFit fit_joint(const std::vector<LossCurve>& curves, const FitOptions& options) {
    std::vector<double> sizes;
    JointData d;
    std::vector<double> logn, logd, y;
    for (const auto& c : curves) {
        c.validate();
        if (c.points.size() < 4)
            throw ValidationError("curve '" + c.label + "' has fewer than 4 points; joint fit needs at least 4 each");
        sizes.push_back(c.model_size);
        const auto yt = targets(c, options);
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            logn.push_back(std::log(c.model_size));
            logd.push_back(std::log(c.points[i].tokens));
            y.push_back(yt[i]);
        }
    }
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
    if (sizes.size() < 3)
        throw ValidationError(strprintf("joint fit needs at least 3 distinct model sizes, got %zu; the N term is not identifiable",
                                        sizes.size()));

    const auto m = static_cast<Eigen::Index>(y.size());
    d.logn = Eigen::Map<Eigen::VectorXd>(logn.data(), m);
    d.logd = Eigen::Map<Eigen::VectorXd>(logd.data(), m);
    d.y = Eigen::Map<Eigen::VectorXd>(y.data(), m);

    const auto grid = exponent_grid();
    const std::size_t g = grid.size();
    std::vector<Profile2> prof(g * g);
#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(g * g); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        prof[kk] = profile_joint(d, grid[kk / g], grid[kk % g], options);
    }
    std::size_t bk = 0;
    for (std::size_t k = 1; k < prof.size(); ++k)
        if (prof[k].obj < prof[bk].obj) bk = k;

    const double step = std::log(grid[1]) - std::log(grid[0]);
    const auto lx = nelder_mead(
        [&](const std::array<double, 2>& v) { return profile_joint(d, std::exp(v[0]), std::exp(v[1]), options).obj; },
        {std::log(grid[bk / g]), std::log(grid[bk % g])}, step);
    double alpha = std::exp(lx[0]), beta = std::exp(lx[1]);
    Profile2 best = profile_joint(d, alpha, beta, options);
    if (prof[bk].obj < best.obj) {
        alpha = grid[bk / g];
        beta = grid[bk % g];
        best = prof[bk];
    }

    if (options.objective == FitObjective::squared) {
        LmProblem prob;
        // theta = (E, A, alpha, B, beta); exponents of vanished terms stay put
        prob.free = {true, best.coef[1] > 0.0, best.coef[1] > 0.0, best.coef[2] > 0.0, best.coef[2] > 0.0};
        prob.eval = [&](const Eigen::VectorXd& t, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
            const Eigen::ArrayXd fn = (-t[2] * d.logn).array().exp();
            const Eigen::ArrayXd fd = (-t[4] * d.logd).array().exp();
            r = (t[0] + t[1] * fn + t[3] * fd - d.y.array()).matrix();
            if (J) {
                J->resize(m, 5);
                J->col(0).setOnes();
                J->col(1) = fn.matrix();
                J->col(2) = (-t[1] * d.logn.array() * fn).matrix();
                J->col(3) = fd.matrix();
                J->col(4) = (-t[3] * d.logd.array() * fd).matrix();
            }
        };
        prob.project = [](Eigen::VectorXd& t) {
            t[0] = std::max(t[0], 0.0);
            t[1] = std::max(t[1], 0.0);
            t[3] = std::max(t[3], 0.0);
            t[2] = std::clamp(t[2], 1e-9, 10.0);
            t[4] = std::clamp(t[4], 1e-9, 10.0);
        };
        Eigen::VectorXd t0(5);
        t0 << best.coef[0], best.coef[1], alpha, best.coef[2], beta;
        const Eigen::VectorXd t = levenberg_marquardt(prob, t0);
        Eigen::VectorXd r;
        prob.eval(t, r, nullptr);
        if (r.squaredNorm() < best.obj) {
            best.coef = Eigen::Vector3d(t[0], t[1], t[3]);
            best.obj = r.squaredNorm();
            alpha = t[2];
            beta = t[4];
        }
    }

    JointScalingFit fit;
    fit.E = best.coef[0];
    fit.A = best.coef[1];
    fit.alpha = alpha;
    fit.B = best.coef[2];
    fit.beta = beta;
    const double scale = std::max(d.y.cwiseAbs().maxCoeff(), 1e-300);
    if (fit.A * std::exp(-fit.alpha * d.logn.minCoeff()) <= 1e-12 * scale) {
        fit.A = 0.0;
        fit.alpha = 0.0;
        fit.alpha_identifiable = false;
        fit.flags.push_back("alpha_unidentifiable");
    }
    if (fit.B * std::exp(-fit.beta * d.logd.minCoeff()) <= 1e-12 * scale) {
        fit.B = 0.0;
        fit.beta = 0.0;
        fit.beta_identifiable = false;
        fit.flags.push_back("beta_unidentifiable");
    }
    if (fit.E == 0.0) fit.flags.push_back("E_at_zero");
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i)
        r[i] = fit.E + fit.A * std::exp(-fit.alpha * d.logn[i]) + fit.B * std::exp(-fit.beta * d.logd[i]) - d.y[i];
    fit.rmse = std::sqrt(r.squaredNorm() / static_cast<double>(m));
    return fit;
}

Tradeoff tradeoff_coefficients(const JointScalingFit& fit) { return {fit.alpha * fit.A, fit.beta * fit.B}; }

Allocation compute_optimal_allocation(const JointScalingFit& fit, double compute) {
    if (!(compute > 0.0) || !std::isfinite(compute)) throw ValidationError("compute budget must be positive");
    const auto t = tradeoff_coefficients(fit);
    if (!(t.alpha_A > 0.0) || !(t.beta_B > 0.0))
        throw ComputeError("corner solution: alpha*A and beta*B must both be positive for an interior optimum");
    const double a = fit.alpha, b = fit.beta;
    const double log_c6 = std::log(compute / 6.0);
    double u = (std::log(t.alpha_A) - std::log(t.beta_B) + b * log_c6) / (a + b);
    // one Newton step on g(u) = ln(aA) - a u - ln(bB) + b (log_c6 - u) tidies rounding
    u += (std::log(t.alpha_A) - a * u - std::log(t.beta_B) + b * (log_c6 - u)) / (a + b);
    Allocation out;
    out.N = std::exp(u);
    out.D = compute / (6.0 * out.N);
    out.loss = fit.predict(out.N, out.D);
    return out;
}

double data_multiplier_for_half_loss(double beta) {
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    return std::pow(2.0, 1.0 / beta);
}

namespace {

double parse_number(std::string_view s, std::size_t line, const char* what) {
    const std::string str(trim(s));
    char* end = nullptr;
    const double v = std::strtod(str.c_str(), &end);
    if (str.empty() || end != str.c_str() + str.size())
        throw ParseError(std::string("bad ") + what + " value '" + str + "'", line);
    return v;
}

std::vector<LossCurve> group_curves(const std::vector<std::array<double, 3>>& rows) {
    std::map<double, LossCurve> by_size;
    for (const auto& r : rows) {
        auto& c = by_size[r[0]];
        c.model_size = r[0];
        c.points.push_back({r[1], r[2]});
    }
    std::vector<LossCurve> out;
    for (auto& [size, c] : by_size) {
        std::stable_sort(c.points.begin(), c.points.end(),
                         [](const LossPoint& a, const LossPoint& b) { return a.tokens < b.tokens; });
        c.label = strprintf("%g", size);
        c.validate();
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

std::vector<LossCurve> parse_curves_csv(const std::string& content) {
    const auto lines = split(content, '\n');
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    if (first == lines.size()) throw ParseError("curve file is empty");
    const char sep = lines[first].find('\t') != std::string_view::npos ? '\t' : ',';
    const auto header = split(lines[first], sep);
    int cn = -1, cd = -1, cl = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto h = trim(header[i]);
        if (h == "model_params") cn = static_cast<int>(i);
        if (h == "tokens") cd = static_cast<int>(i);
        if (h == "loss") cl = static_cast<int>(i);
    }
    if (cn < 0 || cd < 0 || cl < 0) throw ParseError("curve header must name model_params, tokens and loss", first + 1);
    std::vector<std::array<double, 3>> rows;
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto f = split(lines[i], sep);
        if (f.size() != header.size())
            throw ParseError(strprintf("expected %zu fields, got %zu", header.size(), f.size()), i + 1);
        rows.push_back({parse_number(f[static_cast<std::size_t>(cn)], i + 1, "model_params"),
                        parse_number(f[static_cast<std::size_t>(cd)], i + 1, "tokens"),
                        parse_number(f[static_cast<std::size_t>(cl)], i + 1, "loss")});
    }
    return group_curves(rows);
}

std::vector<LossCurve> parse_curves_jsonl(const std::string& content) {
    const auto lines = split(content, '\n');
    std::vector<std::array<double, 3>> rows;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            rows.push_back({j.at("model_params").get<double>(), j.at("tokens").get<double>(), j.at("loss").get<double>()});
        } catch (const nlohmann::json::exception& err) {
            throw ParseError(std::string("bad curve row: ") + err.what(), i + 1);
        }
    }
    return group_curves(rows);
}

std::vector<LossCurve> load_curves(const std::filesystem::path& path) {
    const auto content = read_text_file(path);
    const auto body = trim(content);
    if (!body.empty() && body.front() == '{') return parse_curves_jsonl(content);
    return parse_curves_csv(content);
}

void save_curves_csv(const std::vector<LossCurve>& curves, const std::filesystem::path& path) {
    std::string out = "model_params,tokens,loss\n";
    for (const auto& c : curves)
        for (const auto& p : c.points) out += strprintf("%.17g,%.17g,%.17g\n", c.model_size, p.tokens, p.loss);
    write_text_file(path, out);
}

std::string per_model_fit_json(const PerModelFit& fit, const LossCurve& curve) {
    nlohmann::ordered_json j;
    j["label"] = curve.label;
    j["model_params"] = curve.model_size;
    j["L_inf"] = fit.L_inf;
    j["A"] = fit.A;
    j["alpha"] = fit.alpha;
    j["rmse"] = fit.rmse;
    j["alpha_identifiable"] = fit.alpha_identifiable;
    j["flags"] = fit.flags;
    return j.dump();
}

std::string joint_fit_json(const JointScalingFit& fit) {
    const auto t = tradeoff_coefficients(fit);
    nlohmann::ordered_json j;
    j["E"] = fit.E;
    j["A"] = fit.A;
    j["alpha"] = fit.alpha;
    j["B"] = fit.B;
    j["beta"] = fit.beta;
    j["rmse"] = fit.rmse;
    j["alpha_A"] = t.alpha_A;
    j["beta_B"] = t.beta_B;
    j["alpha_identifiable"] = fit.alpha_identifiable;
    j["beta_identifiable"] = fit.beta_identifiable;
    j["flags"] = fit.flags;
    return j.dump(2) + "\n";
}

}  // namespace recsyn
